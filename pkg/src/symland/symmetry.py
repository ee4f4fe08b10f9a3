"""Group actions on parameter points.

Covers the ``GL_h`` action at one layer interface, positive rescaling of the
last two layers of a homogeneous network, permutation alignment between
components of a full-rank linear minimum, and the pseudoinverse-based map
``(U, V) -> (U s(VX) s(gVX)^+, gV)`` for two-layer networks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    LinAlgError,
    SingularMatrixError,
    as_matrix,
    det_sign,
    matrix_exp,
    pseudoinverse,
)
from .models import Activation, NetworkSpec, ParameterPoint, ShapeError, forward_loss

__all__ = [
    "GroupElement",
    "gl_action",
    "gl_action_all",
    "rescale_action",
    "sample_group_element",
    "approx_symmetry_map",
    "BarrierBoundCheck",
    "verify_barrier_bound",
    "odd_permutation",
    "is_permutation_matrix",
    "align_permutations",
    "apply_permutations",
    "random_invertible",
]

MINIMUM_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Invertible ``g`` acting between ``W_i`` and ``W_{i+1}`` (1-based ``interface_index``).

    ``log_matrix``, when given, is a real ``M`` with ``exp(M) = g``.
    """

    matrix: np.ndarray
    interface_index: int = 1
    log_matrix: np.ndarray | None = None

    def __post_init__(self):
        g = as_matrix(self.matrix)
        object.__setattr__(self, "matrix", g)
        if g.shape[0] != g.shape[1]:
            raise ShapeError("group element must be square")
        if det_sign(g) == 0:
            raise SingularMatrixError("group element is singular")
        if self.interface_index < 1:
            raise ValueError("interface_index is 1-based")
        if self.log_matrix is not None:
            m = as_matrix(self.log_matrix)
            object.__setattr__(self, "log_matrix", m)
            err = np.linalg.norm(matrix_exp(m) - g) / np.linalg.norm(g)
            if err > 1e-8:
                raise LinAlgError(f"exp(log_matrix) != matrix (rel err {err:.2e})")

    @classmethod
    def from_log(cls, log_matrix, interface_index: int = 1) -> "GroupElement":
        m = as_matrix(log_matrix)
        return cls(matrix_exp(m), interface_index, m)

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def _interface_weights(g: GroupElement, w: ParameterPoint) -> tuple[int, int]:
    i = g.interface_index
    if i > len(w) - 1:
        raise ValueError(f"interface {i} invalid for a {len(w)}-layer point")
    h = g.matrix.shape[0]
    if w[i - 1].shape[0] != h or w[i].shape[1] != h:
        raise ShapeError(f"group element of size {h} does not fit interface {i}")
    return i - 1, i


def gl_action(g: GroupElement, w: ParameterPoint) -> ParameterPoint:
    """``W_i <- g W_i`` and ``W_{i+1} <- W_{i+1} g^-1`` at ``g.interface_index``."""
    a, b = _interface_weights(g, w)
    ws = list(w)
    ws[a] = g.matrix @ w[a]
    ws[b] = w[b] @ g.inverse_matrix
    return ParameterPoint(tuple(ws))


def gl_action_all(gs, w: ParameterPoint) -> ParameterPoint:
    """Apply one matrix per interface: ``(g_1 W_1, g_2 W_2 g_1^-1, ..., W_l g_{l-1}^-1)``."""
    if len(gs) != len(w) - 1:
        raise ValueError(f"need {len(w) - 1} group elements, got {len(gs)}")
    for i, g in enumerate(gs, start=1):
        w = gl_action(GroupElement(g, i), w)
    return w


def rescale_action(scale: float, k: float, w: ParameterPoint) -> ParameterPoint:
    """``W_{l-1} <- scale W_{l-1}``, ``W_l <- W_l scale^-k``.

    Only positive scales are accepted: leaky ReLU is homogeneous for
    ``c > 0`` only.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    if not k > 0:
        raise ValueError("homogeneity degree must be positive")
    if len(w) < 2:
        raise ValueError("rescaling needs at least two layers")
    ws = list(w)
    ws[-2] = scale * w[-2]
    ws[-1] = w[-1] * scale ** (-k)
    return ParameterPoint(tuple(ws))


def sample_group_element(
    h: int, magnitude: float, rng: np.random.Generator, interface_index: int = 1
) -> GroupElement:
    """``g = exp(M)`` with ``M`` iid normal(0, magnitude^2); keeps ``M`` as the log."""
    m = rng.normal(0.0, magnitude, size=(h, h))
    return GroupElement.from_log(m, interface_index)


def approx_symmetry_map(g, u, v, x, act: Activation) -> tuple[np.ndarray, np.ndarray]:
    """``(U s(VX) s(gVX)^+, gV)``.

    Exact loss-preserving symmetry when ``act`` is the identity and ``s(gVX)``
    has full row rank; otherwise only approximate.
    """
    g, u, v, x = (as_matrix(a) for a in (g, u, v, x))
    h = v.shape[0]
    if g.shape != (h, h) or u.shape[1] != h or v.shape[1] != x.shape[0]:
        raise ShapeError(
            f"incompatible shapes g{g.shape} u{u.shape} v{v.shape} x{x.shape}"
        )
    if det_sign(g) == 0:
        raise SingularMatrixError("g is singular")
    gv = g @ v
    u_new = u @ act(v @ x) @ pseudoinverse(act(gv @ x))
    return as_matrix(u_new, copy=False), as_matrix(gv, copy=False)


@dataclass(frozen=True)
class BarrierBoundCheck:
    lhs: float
    rhs: float
    holds: bool


def verify_barrier_bound(u, v, g, x, act: Activation, slack: float = 1e-9) -> BarrierBoundCheck:
    """Compare ``||U s(VX) - U' s(V'X)||_F`` against ``||U s(VX)||_F``."""
    u2, v2 = approx_symmetry_map(g, u, v, x, act)
    before = np.asarray(u) @ act(np.asarray(v) @ np.asarray(x))
    after = u2 @ act(v2 @ np.asarray(x))
    lhs = float(np.linalg.norm(before - after))
    rhs = float(np.linalg.norm(before))
    return BarrierBoundCheck(lhs, rhs, lhs <= rhs + slack)


def odd_permutation(h: int) -> np.ndarray:
    """Identity with its first two rows swapped."""
    if h < 2:
        raise ValueError("an odd permutation needs h >= 2")
    p = np.eye(h)
    p[[0, 1]] = p[[1, 0]]
    return as_matrix(p, copy=False)


def is_permutation_matrix(p) -> bool:
    p = np.asarray(p)
    return (
        p.ndim == 2
        and p.shape[0] == p.shape[1]
        and bool(np.all((p == 0) | (p == 1)))
        and bool(np.all(p.sum(axis=0) == 1))
        and bool(np.all(p.sum(axis=1) == 1))
    )


def _homeomorphism_coords(net: NetworkSpec, w: ParameterPoint) -> list[np.ndarray]:
    # inverse of the chart (g_1..g_{l-1}) -> minimum: (W_1 X, W_2, ..., W_{l-1})
    return [w[0] @ net.data.x, *w.weights[1:-1]]


def _require_linear_minimum(net: NetworkSpec, w: ParameterPoint, name: str) -> None:
    if not net.is_linear or net.skip_epsilon != 0.0:
        raise ShapeError("permutation alignment needs a plain linear network")
    loss = forward_loss(net, w)
    if loss > MINIMUM_RTOL * net.y_sq_norm:
        raise ValueError(f"{name} is not at the minimum (loss {loss:.3e})")


def align_permutations(
    w: ParameterPoint, w_prime: ParameterPoint, net: NetworkSpec
) -> list[np.ndarray]:
    """Permutations ``P_1..P_{l-1}`` moving ``w`` into the component of ``w_prime``.

    Greedy over interfaces with ``P_0 = I``: keep ``P_i = I`` when
    ``det(g_i g'_i P_{i-1}^-1) > 0``, otherwise use an odd permutation. Apply
    the result with :func:`apply_permutations`.
    """
    _require_linear_minimum(net, w, "w")
    _require_linear_minimum(net, w_prime, "w_prime")
    h = w[0].shape[0]
    if h < 2:
        raise ValueError("alignment by permutation needs hidden width >= 2")
    g = _homeomorphism_coords(net, w)
    g2 = _homeomorphism_coords(net, w_prime)
    perms = []
    prev_sign = 1
    for gi, gi2 in zip(g, g2):
        s = det_sign(gi) * det_sign(gi2) * prev_sign
        if s == 0:
            raise SingularMatrixError("point lies off the full-rank minimum")
        p = np.eye(h) if s > 0 else odd_permutation(h)
        perms.append(as_matrix(p, copy=False))
        prev_sign = 1 if s > 0 else -1
    return perms


def apply_permutations(perms, w: ParameterPoint) -> ParameterPoint:
    """``(P_1 W_1, P_2 W_2 P_1^-1, ..., W_l P_{l-1}^-1)``, a loss-preserving action."""
    for p in perms:
        if not is_permutation_matrix(p):
            raise ValueError("not a permutation matrix")
    return gl_action_all(list(perms), w)


def random_invertible(h: int, rng: np.random.Generator, min_sigma: float = 1e-3) -> np.ndarray:
    """Gaussian ``h x h`` matrix, redrawn until its smallest singular value exceeds ``min_sigma``."""
    while True:
        g = rng.standard_normal((h, h))
        if np.linalg.svd(g, compute_uv=False)[-1] > min_sigma:
            return g

