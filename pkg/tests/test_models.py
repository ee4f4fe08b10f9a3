import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import ACTIVATIONS, central_difference, random_net, relative_error
from symland.linalg import SingularMatrixError, make_rng
from symland.models import (
    DatasetPair,
    DivergenceError,
    NetworkSpec,
    ParameterPoint,
    ShapeError,
    batch_forward_loss,
    fit_last_layer,
    forward_loss,
    gradient,
    identity,
    leaky_relu,
    make_minimum_linear,
    sigmoid,
    train_sgd,
    train_with_halving,
)


def scalar_net(x=1.0, y=6.0, layers=2):
    return NetworkSpec.linear([[x]], [[y]], hidden=(1,) * (layers - 1))


def test_activation_validation():
    with pytest.raises(ValueError):
        leaky_relu(1.5)
    with pytest.raises(ValueError):
        from symland.models import Activation
        Activation("tanh")
    assert sigmoid().homogeneity_degree is None
    assert leaky_relu().homogeneity_degree == 1.0
    assert leaky_relu().slope == 0.01


def test_sigmoid_is_stable():
    z = np.array([-1000.0, 0.0, 1000.0])
    np.testing.assert_allclose(sigmoid()(z), [0.0, 0.5, 1.0])


@settings(max_examples=50, deadline=None)
@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_homogeneous_kinds(c, seed):
    z = make_rng(seed).standard_normal(20)
    for act in (identity(), leaky_relu(0.2)):
        np.testing.assert_allclose(act(c * z), c * act(z), rtol=1e-12, atol=1e-300)


def test_dataset_batch_mismatch():
    with pytest.raises(ShapeError):
        DatasetPair(np.ones((2, 3)), np.ones((2, 4)))


def test_network_validation():
    with pytest.raises(ShapeError):
        NetworkSpec((2, 3, 2), (), DatasetPair(np.ones((2, 1)), np.ones((2, 1))))
    with pytest.raises(ShapeError):
        NetworkSpec.linear(np.ones((2, 1)), np.ones((2, 1)), hidden=(3, 2), skip_epsilon=1.0)


def test_forward_loss_examples():
    assert forward_loss(scalar_net(), ParameterPoint.of(2.0, 3.0)) == 0.0
    assert forward_loss(scalar_net(), ParameterPoint.of(1.0, 1.0)) == 25.0
    res = NetworkSpec.resnet1d(1.0, 1.0, 1.0)
    assert forward_loss(res, ParameterPoint.of(1.0, -2.0, -1.0)) == 0.0


def test_forward_loss_shape_mismatch():
    with pytest.raises(ShapeError):
        forward_loss(scalar_net(), ParameterPoint.of(np.ones((2, 1)), np.ones((1, 2)), 1.0))


def test_batch_loss_matches_single(rng):
    net, w = random_net(rng)
    pts = np.stack([w.flatten(), 2 * w.flatten(), -w.flatten()])
    expected = [forward_loss(net, ParameterPoint.from_flat(p, net.shapes)) for p in pts]
    np.testing.assert_allclose(batch_forward_loss(net, pts), expected, rtol=1e-12)


def test_gradient_scalar_example():
    g = gradient(scalar_net(), ParameterPoint.of(1.0, 1.0))
    assert g[0][0, 0] == -10.0 and g[1][0, 0] == -10.0


def test_gradient_zero_at_minimum(rng):
    net = NetworkSpec.linear(rng.standard_normal((3, 3)), rng.standard_normal((3, 3)), hidden=(3, 3))
    w = make_minimum_linear(net, [rng.standard_normal((3, 3)) for _ in range(2)])
    assert max(np.abs(g).max() for g in gradient(net, w)) < 1e-10


@pytest.mark.parametrize("act", ACTIVATIONS, ids=lambda a: a.kind)
def test_gradient_matches_finite_differences(act):
    rng = make_rng(3)
    for _ in range(5):
        net, w = random_net(rng, act)
        g = gradient(net, w).flatten()
        fd = central_difference(net, w)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(fd).max()))


def test_gradient_with_skip_connection(rng):
    net = NetworkSpec.linear(rng.standard_normal((3, 4)), rng.standard_normal((3, 4)), hidden=(3, 3), skip_epsilon=0.7)
    w = ParameterPoint(tuple(rng.standard_normal((3, 3)) for _ in range(3)))
    assert relative_error(net, w) < 1e-6


def test_train_at_minimum_is_identity():
    w0 = ParameterPoint.of(2.0, 3.0)
    w, rep = train_sgd(scalar_net(), w0, 0.01, 100)
    assert w == w0 and rep.final_loss == 0.0


def test_train_scalar_converges():
    _, rep = train_sgd(scalar_net(), ParameterPoint.of(1.0, 1.0), 0.01, 10000)
    assert rep.final_loss < 1e-8
    assert rep.loss_trace[0] == 25.0


def test_train_divergence_is_loud():
    with pytest.raises(DivergenceError):
        train_sgd(scalar_net(), ParameterPoint.of(1.0, 1.0), 10.0, 100)


def test_train_with_halving_recovers():
    # halving reacts to divergence only; 0.48 -> 0.24 -> 0.12 is the first stable rate
    _, rep = train_with_halving(scalar_net(), ParameterPoint.of(1.0, 1.0), 0.48, 5000)
    assert rep.lr == 0.12 and np.isfinite(rep.final_loss)


def test_train_sigmoid_net():
    rng = make_rng(11)
    for _ in range(3):
        m, n, k = (int(v) for v in rng.integers(2, 21, size=3))
        h = int(rng.integers(k, 21))  # h >= k so the hidden layer can interpolate
        net = NetworkSpec.mlp(rng.standard_normal((n, k)), rng.standard_normal((m, k)), [h], sigmoid())
        _, rep = train_with_halving(net, None, 0.05, 20000, seed=1)
        assert rep.final_loss < 1e-4 * net.y_sq_norm


def test_train_is_deterministic(rng):
    net, _ = random_net(rng, sigmoid())
    a, _ = train_sgd(net, None, 0.01, 50, seed=4)
    b, _ = train_sgd(net, None, 0.01, 50, seed=4)
    assert a == b


def test_make_minimum_linear_examples(rng):
    w = make_minimum_linear(scalar_net(x=2.0), [[[4.0]]])
    assert w == ParameterPoint.of(2.0, 1.5)
    assert forward_loss(scalar_net(x=2.0), w) == 0.0
    net = NetworkSpec.linear(np.eye(3), np.eye(3), hidden=(3, 3))
    assert all(np.array_equal(m, np.eye(3)) for m in make_minimum_linear(net, [np.eye(3)] * 2))
    net = NetworkSpec.linear(rng.standard_normal((2, 2)), rng.standard_normal((2, 2)), hidden=(2, 2))
    w = make_minimum_linear(net, [rng.standard_normal((2, 2)) for _ in range(2)])
    assert forward_loss(net, w) < 1e-10


def test_make_minimum_linear_rejects_singular():
    net = NetworkSpec.linear(np.eye(2), np.eye(2), hidden=(2,))
    with pytest.raises(SingularMatrixError):
        make_minimum_linear(net, [[[1.0, 2.0], [2.0, 4.0]]])
    bad = NetworkSpec.linear([[1.0, 1.0], [1.0, 1.0]], np.eye(2), hidden=(2,))
    with pytest.raises(SingularMatrixError):
        make_minimum_linear(bad, [np.eye(2)])


def test_fit_last_layer_reaches_zero(rng):
    net = NetworkSpec.mlp(rng.standard_normal((4, 3)), rng.standard_normal((2, 3)), [6], leaky_relu())
    w = ParameterPoint(tuple(rng.standard_normal(s) for s in net.shapes))
    assert forward_loss(net, fit_last_layer(net, w)) < 1e-20


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_loss_nonnegative(seed):
    net, w = random_net(make_rng(seed))
    assert forward_loss(net, w) >= 0.0


def test_parameter_point_helpers(rng):
    a = ParameterPoint.of(rng.standard_normal((2, 3)), rng.standard_normal((1, 2)))
    b = ParameterPoint.of(rng.standard_normal((2, 3)), rng.standard_normal((1, 2)))
    assert ParameterPoint.from_flat(a.flatten(), a.shapes) == a
    assert a.lerp(b, 0.0) == a and a.lerp(b, 1.0).allclose(b)
    assert a.distance(a) == 0.0
    with pytest.raises(ShapeError):
        a.lerp(ParameterPoint.of(1.0), 0.5)
