import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symland import io
from symland.linalg import make_rng
from symland.models import NetworkSpec, ParameterPoint, ShapeError, forward_loss, leaky_relu
from symland.topology import component_index_linear


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.integers(1, 4))
def test_checkpoint_round_trip_is_exact(seed, depth):
    rng = make_rng(seed)
    dims = rng.integers(1, 6, size=depth + 1)
    w = ParameterPoint(tuple(rng.standard_normal((dims[i + 1], dims[i])) * 10.0 ** rng.integers(-8, 8) for i in range(depth)))
    assert io.parse_checkpoint(io.dump_checkpoint(w)) == w


def test_save_load_checkpoint(tmp_path, rng):
    w = ParameterPoint.of(rng.standard_normal((2, 3)), rng.standard_normal((1, 2)))
    path = tmp_path / "w.ckpt"
    io.save_checkpoint(w, path)
    assert io.load_checkpoint(path) == w
    assert b"\r" not in path.read_bytes()


@pytest.mark.parametrize(
    "text",
    [
        "symland-ckpt v1\n1\n2 2\n1 2\n3\n",  # short row
        "symland-ckpt v1\n1\n2 2\n1 2\n",  # missing row
        "symland-ckpt v2\n1\n1 1\n1\n",  # wrong header
        "symland-ckpt v1\n1\n1 1\nabc\n",  # not a number
        "symland-ckpt v1\n1\n1 1\n1\n2\n",  # trailing content
        "symland-ckpt v1\n1\n1 1\nnan\n",
    ],
)
def test_malformed_checkpoints(text):
    with pytest.raises(io.MalformedFileError):
        io.parse_checkpoint(text)


def test_checkpoint_shape_mismatch(tmp_path):
    with pytest.raises(ShapeError):
        io.parse_checkpoint("symland-ckpt v1\n2\n2 2\n1 0\n0 1\n1 3\n1 1 1\n")
    path = tmp_path / "w.ckpt"
    io.save_checkpoint(ParameterPoint.of(1.0, 1.0), path)
    net = NetworkSpec.linear(np.eye(2), np.eye(2), hidden=(2,))
    with pytest.raises(ShapeError):
        io.load_checkpoint(path, net)


def test_sample_fixture(data_dir):
    net = io.load_network(data_dir / "sample.net")
    w = io.load_checkpoint(data_dir / "sample.ckpt", net)
    assert net.layer_dims == (2, 2, 2, 2) and net.is_linear
    assert w == ParameterPoint.of([[0.5, 0.0], [0.0, 2.0]], [[0.0, 1.0], [1.0, 0.0]], [[0.5, 1.0], [0.5, 0.0]])
    assert forward_loss(net, w) == 0.0
    assert component_index_linear(w, net).signs == (1, -1)


def test_network_round_trip(tmp_path, rng):
    net = NetworkSpec.mlp(rng.standard_normal((3, 4)), rng.standard_normal((2, 4)), [5, 2], leaky_relu(0.2))
    io.save_network(net, tmp_path / "n.net")
    back = io.load_network(tmp_path / "n.net")
    assert back.layer_dims == net.layer_dims and back.activations == net.activations
    np.testing.assert_array_equal(back.data.x, net.data.x)
    np.testing.assert_array_equal(back.data.y, net.data.y)
    res = NetworkSpec.resnet1d(1.0, 2.0, 0.5)
    io.save_network(res, tmp_path / "r.net")
    assert io.load_network(tmp_path / "r.net").skip_epsilon == 0.5


def test_csv_schema(tmp_path):
    io.write_csv(tmp_path / "a.csv", ["t", "loss"], [(0.0, 1.0), (0.5, 0.1)])
    header, rows = io.read_csv(tmp_path / "a.csv")
    assert header == ["t", "loss"] and rows.shape == (2, 2)
    with pytest.raises(ValueError):
        io.write_csv(tmp_path / "b.csv", ["t", "loss"], [(0.0,)])
