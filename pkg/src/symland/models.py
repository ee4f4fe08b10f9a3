"""Network architectures, squared-error losses, exact gradients and training.

A network maps ``X`` (``n_in x batch``) through ``W_1 ... W_l`` with an
activation after every layer except the last, and is scored by
``||Y - output||_F^2``. The three-layer square architecture additionally
supports a skip connection ``W_3 (W_2 W_1 X + eps X)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .linalg import LinAlgError, SingularMatrixError, as_matrix, det_sign, make_rng

log = logging.getLogger(__name__)

__all__ = [
    "ShapeError",
    "DivergenceError",
    "Activation",
    "identity",
    "leaky_relu",
    "sigmoid",
    "DatasetPair",
    "NetworkSpec",
    "ParameterPoint",
    "TrainReport",
    "network_output",
    "forward_loss",
    "batch_forward_loss",
    "gradient",
    "loss_and_gradient",
    "init_point",
    "train_sgd",
    "train_with_halving",
    "make_minimum_linear",
    "fit_last_layer",
]

DIVERGENCE_LOSS = 1e12


class ShapeError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Activation:
    """Pointwise activation.

    ``kind`` is one of ``identity``, ``leaky_relu`` or ``sigmoid``. Identity
    and leaky ReLU are positively homogeneous of degree 1.
    """

    kind: str
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "leaky_relu", "sigmoid"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise ValueError("leaky_relu slope must lie in (0, 1)")

    @property
    def homogeneity_degree(self) -> float | None:
        return None if self.kind == "sigmoid" else 1.0

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return z
        if self.kind == "leaky_relu":
            return np.where(z > 0, z, self.slope * z)
        # split by sign so exp never overflows
        out = np.empty_like(z, dtype=np.float64)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.ones_like(z)
        if self.kind == "leaky_relu":
            return np.where(z > 0, 1.0, self.slope)
        s = self(z)
        return s * (1.0 - s)

    def param(self) -> float:
        return self.slope


def identity() -> Activation:
    return Activation("identity")


def leaky_relu(slope: float = 0.01) -> Activation:
    return Activation("leaky_relu", slope)


def sigmoid() -> Activation:
    return Activation("sigmoid")


@dataclass(frozen=True, eq=False)
class DatasetPair:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_matrix(self.x))
        object.__setattr__(self, "y", as_matrix(self.y))
        if self.x.shape[1] != self.y.shape[1]:
            raise ShapeError(
                f"x and y batch sizes differ: {self.x.shape[1]} vs {self.y.shape[1]}"
            )


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    layer_dims: tuple[int, ...]
    activations: tuple[Activation, ...]
    data: DatasetPair
    skip_epsilon: float = 0.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(dims) < 2 or min(dims) < 1:
            raise ShapeError("layer_dims needs at least two positive entries")
        if len(self.activations) != len(dims) - 2:
            raise ShapeError(
                f"expected {len(dims) - 2} activations, got {len(self.activations)}"
            )
        if dims[0] != self.data.x.shape[0] or dims[-1] != self.data.y.shape[0]:
            raise ShapeError("layer_dims do not match the data")
        if self.skip_epsilon != 0.0:
            if len(dims) != 4 or len(set(dims)) != 1:
                raise ShapeError("skip connection needs three square layers")
            if any(a.kind != "identity" for a in self.activations):
                raise ShapeError("skip connection is only defined for linear layers")

    @classmethod
    def linear(cls, x, y, hidden: Sequence[int] = (), skip_epsilon: float = 0.0):
        data = DatasetPair(x, y)
        dims = (data.x.shape[0], *hidden, data.y.shape[0])
        acts = tuple(identity() for _ in range(len(dims) - 2))
        return cls(dims, acts, data, skip_epsilon)

    @classmethod
    def mlp(cls, x, y, hidden: Sequence[int], activation: Activation):
        data = DatasetPair(x, y)
        dims = (data.x.shape[0], *hidden, data.y.shape[0])
        return cls(dims, tuple(activation for _ in hidden), data)

    @classmethod
    def resnet1d(cls, x: float, y: float, eps: float):
        return cls.linear([[x]], [[y]], hidden=(1, 1), skip_epsilon=eps)

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def shapes(self) -> list[tuple[int, int]]:
        d = self.layer_dims
        return [(d[i + 1], d[i]) for i in range(self.num_layers)]

    @property
    def is_linear(self) -> bool:
        return all(a.kind == "identity" for a in self.activations)

    @property
    def y_sq_norm(self) -> float:
        return float(np.sum(self.data.y**2))


@dataclass(frozen=True)
class ParameterPoint:
    """An ordered tuple of weight matrices ``(W_1, ..., W_l)``."""

    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(as_matrix(w) for w in self.weights))
        if not self.weights:
            raise ShapeError("a parameter point needs at least one weight")

    @classmethod
    def of(cls, *weights) -> "ParameterPoint":
        return cls(tuple(weights))

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.weights[i]

    def __iter__(self):
        return iter(self.weights)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w in self.weights]

    def replace(self, index: int, value) -> "ParameterPoint":
        ws = list(self.weights)
        ws[index] = value
        return ParameterPoint(tuple(ws))

    def flatten(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights])

    @classmethod
    def from_flat(cls, flat: np.ndarray, shapes) -> "ParameterPoint":
        flat = np.asarray(flat, dtype=np.float64)
        sizes = [r * c for r, c in shapes]
        if flat.size != sum(sizes):
            raise ShapeError("flat vector length does not match shapes")
        out, start = [], 0
        for (r, c), n in zip(shapes, sizes):
            out.append(flat[start:start + n].reshape(r, c))
            start += n
        return cls(tuple(out))

    def _check_same(self, other: "ParameterPoint"):
        if self.shapes != other.shapes:
            raise ShapeError(f"shape mismatch: {self.shapes} vs {other.shapes}")

    def lerp(self, other: "ParameterPoint", alpha: float) -> "ParameterPoint":
        """``(1 - alpha) * self + alpha * other``."""
        self._check_same(other)
        return ParameterPoint(
            tuple((1.0 - alpha) * a + alpha * b for a, b in zip(self, other))
        )

    def distance(self, other: "ParameterPoint") -> float:
        self._check_same(other)
        return float(np.linalg.norm(self.flatten() - other.flatten()))

    def allclose(self, other: "ParameterPoint", rtol=1e-10, atol=1e-12) -> bool:
        return self.shapes == other.shapes and all(
            np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self, other)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParameterPoint):
            return NotImplemented
        return self.shapes == other.shapes and all(
            np.array_equal(a, b) for a, b in zip(self, other)
        )

    __hash__ = None


@dataclass(frozen=True)
class TrainReport:
    final_loss: float
    steps: int
    lr: float
    loss_trace: tuple[float, ...] = field(repr=False)


def _check_point(net: NetworkSpec, w: ParameterPoint) -> None:
    if w.shapes != net.shapes:
        raise ShapeError(f"point shapes {w.shapes} do not match network {net.shapes}")


def network_output(net: NetworkSpec, w: ParameterPoint) -> np.ndarray:
    _check_point(net, w)
    x = net.data.x
    if net.skip_epsilon != 0.0:
        w1, w2, w3 = w
        return w3 @ (w2 @ (w1 @ x) + net.skip_epsilon * x)
    a = x
    for wi, act in zip(w.weights[:-1], net.activations):
        a = act(wi @ a)
    return w.weights[-1] @ a


def forward_loss(net: NetworkSpec, w: ParameterPoint) -> float:
    """Squared Frobenius norm of ``Y - f(X)``."""
    r = net.data.y - network_output(net, w)
    return float(np.sum(r * r))


def batch_forward_loss(net: NetworkSpec, flat_points: np.ndarray) -> np.ndarray:
    """Loss at many flattened points at once; rows of ``flat_points`` are points."""
    flat_points = np.atleast_2d(np.asarray(flat_points, dtype=np.float64))
    b = flat_points.shape[0]
    ws, start = [], 0
    for r, c in net.shapes:
        ws.append(flat_points[:, start:start + r * c].reshape(b, r, c))
        start += r * c
    if start != flat_points.shape[1]:
        raise ShapeError("flattened points do not match the network")
    x = net.data.x
    if net.skip_epsilon != 0.0:
        out = ws[2] @ (ws[1] @ (ws[0] @ x) + net.skip_epsilon * x)
    else:
        a = np.broadcast_to(x, (b, *x.shape))
        for wi, act in zip(ws[:-1], net.activations):
            a = act(wi @ a)
        out = ws[-1] @ a
    r = net.data.y - out
    return np.einsum("bij,bij->b", r, r)


def loss_and_gradient(net: NetworkSpec, w: ParameterPoint) -> tuple[float, ParameterPoint]:
    """Loss and its reverse-mode gradient with respect to every weight."""
    _check_point(net, w)
    x, y = net.data.x, net.data.y
    if net.skip_epsilon != 0.0:
        w1, w2, w3 = w
        h1 = w1 @ x
        z = w2 @ h1 + net.skip_epsilon * x
        r = w3 @ z - y
        d_out = 2.0 * r
        d_z = w3.T @ d_out
        grads = (w2.T @ d_z @ x.T, d_z @ h1.T, d_out @ z.T)
        return float(np.sum(r * r)), ParameterPoint(grads)

    pre, post = [], [x]
    a = x
    for wi, act in zip(w.weights[:-1], net.activations):
        z = wi @ a
        a = act(z)
        pre.append(z)
        post.append(a)
    r = w.weights[-1] @ a - y
    back = 2.0 * r
    grads = [None] * len(w)
    grads[-1] = back @ post[-1].T
    back = w.weights[-1].T @ back
    for i in range(len(w) - 2, -1, -1):
        dz = back * net.activations[i].derivative(pre[i])
        grads[i] = dz @ post[i].T
        back = w.weights[i].T @ dz
    return float(np.sum(r * r)), ParameterPoint(tuple(grads))


def gradient(net: NetworkSpec, w: ParameterPoint) -> ParameterPoint:
    return loss_and_gradient(net, w)[1]


def init_point(net: NetworkSpec, rng: np.random.Generator) -> ParameterPoint:
    """iid normal(0, 1/fan_in) weights."""
    return ParameterPoint(
        tuple(rng.normal(0.0, 1.0 / math.sqrt(c), size=(r, c)) for r, c in net.shapes)
    )


def train_sgd(
    net: NetworkSpec,
    w0: ParameterPoint | None,
    lr: float,
    steps: int,
    seed: int = 0,
) -> tuple[ParameterPoint, TrainReport]:
    """Full-batch gradient descent with a fixed learning rate.

    When ``w0`` is None the starting point is drawn with :func:`init_point`
    from ``seed``; otherwise the run is fully deterministic and ``seed`` is
    unused.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    w = init_point(net, make_rng(seed)) if w0 is None else w0
    _check_point(net, w)
    ws = [np.array(m) for m in w]
    trace = []
    for step in range(int(steps)):
        loss, g = loss_and_gradient(net, ParameterPoint(tuple(ws)))
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise DivergenceError(f"loss {loss:.3e} at step {step} with lr={lr:g}")
        trace.append(loss)
        if loss == 0.0:
            break
        for wi, gi in zip(ws, g):
            wi -= lr * gi
        if not all(np.all(np.isfinite(wi)) for wi in ws):
            raise DivergenceError(f"non-finite weights after step {step} with lr={lr:g}")
    point = ParameterPoint(tuple(ws))
    final = forward_loss(net, point)
    if not math.isfinite(final) or final > DIVERGENCE_LOSS:
        raise DivergenceError(f"final loss {final:.3e} with lr={lr:g}")
    trace.append(final)
    return point, TrainReport(final, len(trace) - 1, lr, tuple(trace))


def train_with_halving(
    net: NetworkSpec,
    w0: ParameterPoint | None,
    lr: float,
    steps: int,
    seed: int = 0,
    max_halvings: int = 20,
) -> tuple[ParameterPoint, TrainReport]:
    """:func:`train_sgd`, restarting from ``w0`` with half the rate on divergence."""
    for _ in range(max_halvings + 1):
        try:
            return train_sgd(net, w0, lr, steps, seed)
        except DivergenceError as exc:
            log.debug("halving learning rate: %s", exc)
            lr /= 2.0
    raise DivergenceError(f"training diverged after {max_halvings} halvings")


def make_minimum_linear(net: NetworkSpec, gs: Iterable) -> ParameterPoint:
    """Zero-loss point ``(g_1 X^-1, g_2, ..., g_{l-1}, Y g_1^-1 ... g_{l-1}^-1)``.

    Requires a linear network with square invertible ``X`` and ``Y``.
    """
    gs = [as_matrix(g) for g in gs]
    x, y = net.data.x, net.data.y
    if not net.is_linear or net.skip_epsilon != 0.0:
        raise ShapeError("make_minimum_linear needs a plain linear network")
    if len(gs) != net.num_layers - 1:
        raise ShapeError(f"expected {net.num_layers - 1} group elements, got {len(gs)}")
    for name, m in [("X", x), ("Y", y)] + [(f"g_{i + 1}", g) for i, g in enumerate(gs)]:
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"{name} must be square")
        if det_sign(m) == 0:
            raise SingularMatrixError(f"{name} is singular")
    if net.num_layers == 1:
        return ParameterPoint((y @ np.linalg.inv(x),))
    weights = [gs[0] @ np.linalg.inv(x), *gs[1:]]
    last = y
    for g in gs:
        last = last @ np.linalg.inv(g)
    weights.append(last)
    try:
        return ParameterPoint(tuple(weights))
    except LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc


def fit_last_layer(net: NetworkSpec, w: ParameterPoint) -> ParameterPoint:
    """Replace ``W_l`` by the least-squares solution given the other layers.

    When the last hidden representation has full column rank this reaches
    zero loss up to rounding.
    """
    if net.skip_epsilon != 0.0:
        raise ShapeError("fit_last_layer is not defined with a skip connection")
    _check_point(net, w)
    a = net.data.x
    for wi, act in zip(w.weights[:-1], net.activations):
        a = act(wi @ a)
    sol, *_ = np.linalg.lstsq(a.T, net.data.y.T, rcond=None)
    return w.replace(len(w) - 1, sol.T)
