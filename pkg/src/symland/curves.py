"""Paths through parameter space and what they reveal about the loss.

Symmetry-induced curves ``t -> exp(t log g) . w``, straight segments,
loss profiles and barriers along them, the rescaling constructions that
make linear-interpolation barriers unbounded, distance from an interpolated
point to a ``W_1 W_2 = A`` orbit, curvature profiles, and the chord
distance bound that follows from bounded curvature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.optimize

from .io import write_csv
from .linalg import SingularMatrixError, as_matrix, det_sign, make_rng, matrix_exp, matrix_log, orthogonal_log
from .models import (
    Activation,
    NetworkSpec,
    ParameterPoint,
    ShapeError,
    batch_forward_loss,
    forward_loss,
)
from .symmetry import GroupElement, approx_symmetry_map, gl_action, gl_action_all, rescale_action

__all__ = [
    "ChordTooLong",
    "DegenerateCurveError",
    "Curve",
    "LossProfile",
    "BarrierReport",
    "CurvatureReport",
    "UnboundedPair",
    "symmetry_curve",
    "component_path",
    "approx_symmetry_curve",
    "linear_path",
    "loss_profile",
    "paired_profiles",
    "barrier",
    "midpoint_loss_closed_form",
    "construct_unbounded_pair",
    "permuted_barrier_floor",
    "orbit_distance",
    "bounded_orbit_barrier",
    "curvature_profile",
    "dmax_bound",
    "lipschitz_estimate",
    "curve_to_chord_deviation",
    "chord_to_curve_distance",
    "write_profile_csv",
]

MINIMUM_RTOL = 1e-8


class ChordTooLong(ValueError):
    """``kappa_max * chord / 2 > 1``: the circle argument gives no bound."""


class DegenerateCurveError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Curve:
    """A path ``[0, 1] -> ParameterPoint``."""

    kind: str
    base: ParameterPoint
    sampler: Callable[[float], ParameterPoint] = field(repr=False)

    def __call__(self, t: float) -> ParameterPoint:
        return self.sampler(float(t))

    @property
    def start(self) -> ParameterPoint:
        return self(0.0)

    @property
    def end(self) -> ParameterPoint:
        return self(1.0)

    def flat_samples(self, ts) -> np.ndarray:
        return np.stack([self(t).flatten() for t in ts])


@dataclass(frozen=True, eq=False)
class LossProfile:
    ts: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        if len(self.ts) != len(self.losses):
            raise ValueError("ts and losses differ in length")


@dataclass(frozen=True)
class BarrierReport:
    max_loss: float
    argmax_t: float
    endpoint_losses: tuple[float, float]
    barrier: float


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    ts: np.ndarray
    kappa: np.ndarray
    kappa_max: float
    chord_length: float
    d_max: float | None
    discretization_error: float
    lipschitz_estimate: float | None = None


@dataclass(frozen=True, eq=False)
class UnboundedPair:
    w_prime: ParameterPoint
    alpha: float
    scale: float
    certified_loss: float
    closed_form_loss: float


def symmetry_curve(g: GroupElement, w: ParameterPoint) -> Curve:
    """``t -> exp(t M) . w`` at ``g.interface_index``, with ``M = g.log_matrix``."""
    if g.log_matrix is None:
        raise ValueError("symmetry curve needs a group element with a known logarithm")
    m, i = g.log_matrix, g.interface_index
    gl_action(g, w)  # validates shapes up front

    def sampler(t: float) -> ParameterPoint:
        if t == 0.0:
            return w
        gt = g.matrix if t == 1.0 else matrix_exp(t * m)
        return gl_action(GroupElement(gt, i), w)

    return Curve("symmetry", w, sampler)


def _gl_plus_log_factors(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # h = Q S with Q a rotation and S symmetric positive definite
    q, s = scipy.linalg.polar(np.asarray(h), side="right")
    lam, vec = np.linalg.eigh(0.5 * (s + s.T))
    log_s = (vec * np.log(lam)) @ vec.T
    return orthogonal_log(q), log_s


def component_path(w1: ParameterPoint, w2: ParameterPoint, net: NetworkSpec) -> Curve:
    """Loss-preserving curve between two minima of a full-rank linear net in one component.

    Finds ``h_i`` with ``w2 = (h_1 W_1, h_2 W_2 h_1^-1, ...) `` and follows
    ``t -> exp(t log Q_i) exp(t log S_i)`` where ``h_i = Q_i S_i`` is the
    polar decomposition, so no principal logarithm of ``h_i`` is needed.
    """
    if not net.is_linear or net.skip_epsilon != 0.0:
        raise ShapeError("component_path needs a plain linear network")
    hs, prev = [], np.eye(w1[0].shape[0])
    for a, b in zip(w1.weights[:-1], w2.weights[:-1]):
        h = b @ prev @ np.linalg.inv(a)
        if det_sign(h) <= 0:
            raise ValueError("points lie in different components")
        hs.append(h)
        prev = h
    logs = [_gl_plus_log_factors(h) for h in hs]

    def sampler(t: float) -> ParameterPoint:
        if t == 0.0:
            return w1
        if t == 1.0:
            return w2
        gs = [matrix_exp(t * lq) @ matrix_exp(t * ls) for lq, ls in logs]
        return gl_action_all(gs, w1)

    return Curve("symmetry", w1, sampler)


def approx_symmetry_curve(g, u, v, x, act: Activation) -> Curve:
    """``t -> exp(t log g) . (U, V)`` under the pseudoinverse map.

    ``g`` may be a :class:`GroupElement` carrying its logarithm; otherwise the
    principal real logarithm is computed. Points are ordered ``(V, U)`` to
    match the layer order ``(W_1, W_2)``.
    """
    if isinstance(g, GroupElement):
        m = g.log_matrix if g.log_matrix is not None else matrix_log(g.matrix)
    else:
        m = matrix_log(g)
    u, v, x = as_matrix(u), as_matrix(v), as_matrix(x)
    base = ParameterPoint((v, u))

    def sampler(t: float) -> ParameterPoint:
        u_t, v_t = approx_symmetry_map(matrix_exp(t * m), u, v, x, act)
        return ParameterPoint((v_t, u_t))

    return Curve("approx_symmetry", base, sampler)


def linear_path(w1: ParameterPoint, w2: ParameterPoint) -> Curve:
    """``alpha -> (1 - alpha) w1 + alpha w2``."""
    if w1.shapes != w2.shapes:
        raise ShapeError(f"shape mismatch: {w1.shapes} vs {w2.shapes}")

    def sampler(t: float) -> ParameterPoint:
        if t == 0.0:
            return w1
        if t == 1.0:
            return w2
        return w1.lerp(w2, t)

    return Curve("linear", w1, sampler)


def loss_profile(net: NetworkSpec, c: Curve, n: int = 101) -> LossProfile:
    if n < 2:
        raise ValueError("a profile needs at least two points")
    ts = np.linspace(0.0, 1.0, n)
    losses = np.array([forward_loss(net, c(t)) for t in ts])
    return LossProfile(ts, losses)


def paired_profiles(net: NetworkSpec, c: Curve, n: int = 101) -> tuple[LossProfile, LossProfile]:
    """Profile along ``c`` and along the straight segment between its endpoints."""
    return loss_profile(net, c, n), loss_profile(net, linear_path(c.start, c.end), n)


def barrier(net: NetworkSpec, c: Curve, n: int = 101) -> BarrierReport:
    """Max loss on the grid minus the larger endpoint loss."""
    if n < 3:
        raise ValueError("barrier needs at least three grid points")
    prof = loss_profile(net, c, n)
    j = int(np.argmax(prof.losses))
    ends = (float(prof.losses[0]), float(prof.losses[-1]))
    top = float(prof.losses[j])
    return BarrierReport(top, float(prof.ts[j]), ends, top - max(ends))


def midpoint_loss_closed_form(m: float, k: float, y_sq_norm: float, alpha: float = 0.5) -> float:
    """Loss at ``(1 - alpha) w + alpha (rescaled w)`` for a zero-loss ``w``.

    ``(1 - (1 - alpha + alpha m^-k) (1 - alpha + alpha m)^k)^2 ||Y||^2``.
    """
    c = (1.0 - alpha + alpha * m ** (-k)) * (1.0 - alpha + alpha * m) ** k
    return (1.0 - c) ** 2 * y_sq_norm


def _homogeneity(net: NetworkSpec, k: float | None) -> float:
    if k is not None:
        return float(k)
    if net.skip_epsilon != 0.0:
        raise ShapeError("the skip connection breaks the rescaling symmetry")
    if net.num_layers < 2:
        raise ShapeError("rescaling needs at least two layers")
    deg = net.activations[-1].homogeneity_degree
    if deg is None:
        raise ValueError("activation before the last layer is not homogeneous")
    return deg


def _require_minimum(net: NetworkSpec, w: ParameterPoint) -> None:
    ysq = net.y_sq_norm
    if ysq <= 0:
        raise ValueError("Y must be nonzero")
    loss = forward_loss(net, w)
    if loss >= MINIMUM_RTOL * ysq:
        raise ValueError(f"w is not at the minimum (loss {loss:.3e})")


def construct_unbounded_pair(
    net: NetworkSpec,
    w: ParameterPoint,
    b: float,
    k: float | None = None,
    alpha: float = 0.5,
    max_doublings: int = 200,
) -> UnboundedPair:
    """A rescaled copy of ``w`` whose interpolation midpoint has loss above ``b``.

    The scale doubles from 2 until the closed-form midpoint loss exceeds
    ``b``; the returned ``certified_loss`` is evaluated directly.
    """
    if b <= 0:
        raise ValueError("b must be positive")
    k = _homogeneity(net, k)
    _require_minimum(net, w)
    ysq = net.y_sq_norm
    m = 2.0
    for _ in range(max_doublings):
        if midpoint_loss_closed_form(m, k, ysq, alpha) > b:
            break
        m *= 2.0
    else:
        raise RuntimeError(f"no scale up to {m:g} exceeds b={b:g}")
    w_prime = rescale_action(m, k, w)
    certified = forward_loss(net, w.lerp(w_prime, alpha))
    closed = midpoint_loss_closed_form(m, k, ysq, alpha)
    if not certified > b:
        raise RuntimeError(f"direct loss {certified:.6g} does not exceed b={b:g}")
    return UnboundedPair(w_prime, alpha, m, certified, closed)


def permuted_barrier_floor(
    net: NetworkSpec, w: ParameterPoint, m: float, k: float | None = None, alpha: float = 0.5
) -> float:
    """Smallest midpoint loss over all neuron permutations of the rescaled copy.

    The copy is ``(W_1, ..., W_{l-2}, P^-1 m W_{l-1}, W_l m^-k P)``; all
    ``n!`` permutations of the last hidden layer are enumerated.
    """
    k = _homogeneity(net, k)
    n = w[-2].shape[0]
    if n > 6:
        raise ValueError(f"hidden width {n} too large for exhaustive enumeration")
    scaled = rescale_action(m, k, w)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        p = np.eye(n)[list(perm)]
        other = scaled.replace(len(w) - 2, p.T @ scaled[-2]).replace(len(w) - 1, scaled[-1] @ p)
        best = min(best, forward_loss(net, w.lerp(other, alpha)))
    return best


def orbit_distance(a, w_mid, iters: int = 500, seed: int = 0, restarts: int = 4) -> float:
    """Estimated distance from ``w_mid = (M_1, M_2)`` to ``{(W_1, W_2): W_1 W_2 = A}``.

    Minimises ``||A g^-1 - M_1||^2 + ||g - M_2||^2`` over invertible ``g``
    with L-BFGS from several starts; the result is an upper bound on the
    true distance.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeError("A must be square")
    if det_sign(a) == 0:
        raise SingularMatrixError("A is singular")
    m1, m2 = (np.asarray(p, dtype=np.float64) for p in w_mid)
    n = a.shape[0]

    def objective(flat):
        g = flat.reshape(n, n)
        try:
            gi = np.linalg.inv(g)
        except np.linalg.LinAlgError:
            return 1e300, np.zeros_like(flat)
        r1 = a @ gi - m1
        r2 = g - m2
        val = float(np.sum(r1 * r1) + np.sum(r2 * r2))
        if not np.isfinite(val):
            return 1e300, np.zeros_like(flat)
        grad = -2.0 * (a @ gi).T @ r1 @ gi.T + 2.0 * r2
        return val, grad.ravel()

    rng = make_rng(seed)
    starts = [np.eye(n)]
    if det_sign(m2) != 0:
        starts.append(m2)
    if det_sign(m1) != 0:
        starts.append(np.linalg.solve(m1, a))
    scale = max(1.0, float(np.linalg.norm(m2)) / math.sqrt(n))
    starts.extend(scale * (np.eye(n) + 0.5 * rng.standard_normal((n, n))) for _ in range(restarts))
    best = math.inf
    for g0 in starts:
        res = scipy.optimize.minimize(
            objective, np.asarray(g0, dtype=np.float64).ravel(), jac=True,
            method="L-BFGS-B", options={"maxiter": iters, "gtol": 1e-12, "ftol": 1e-15},
        )
        best = min(best, float(res.fun), objective(res.x)[0])
    return math.sqrt(max(best, 0.0))


def bounded_orbit_barrier(
    net: NetworkSpec,
    w: ParameterPoint,
    scale_cap: float,
    n_scales: int = 101,
    n_alphas: int = 101,
    k: float | None = None,
) -> float:
    """Largest interpolation loss between ``w`` and rescaled copies with every ``||W_i'||_2 <= c``.

    Admissible scales form ``[(||W_l|| / c)^(1/k), c / ||W_{l-1}||]``; the
    maximum is taken over a geometric grid of scales and a uniform alpha grid.
    Returns 0 when no rescaled copy other than ``w`` itself fits.
    """
    k = _homogeneity(net, k)
    norms = [float(np.linalg.norm(m, 2)) for m in w]
    if any(nrm > scale_cap for nrm in norms[:-2]):
        return 0.0
    hi = scale_cap / norms[-2] if norms[-2] > 0 else math.inf
    lo = (norms[-1] / scale_cap) ** (1.0 / k)
    if not lo <= hi or not math.isfinite(hi):
        return 0.0
    scales = np.geomspace(lo, hi, n_scales) if hi > lo else np.array([lo])
    alphas = np.linspace(0.0, 1.0, n_alphas)
    base = w.flatten()
    best = 0.0
    for m in scales:
        other = rescale_action(float(m), k, w).flatten()
        pts = (1.0 - alphas)[:, None] * base + alphas[:, None] * other
        best = max(best, float(batch_forward_loss(net, pts).max()))
    return best


def _curvature(pts: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    d1 = (pts[2:] - pts[:-2]) / (2.0 * h)
    d2 = (pts[2:] - 2.0 * pts[1:-1] + pts[:-2]) / (h * h)
    speed = np.linalg.norm(d1, axis=1)
    cross = np.sum(d2 * d2, axis=1) * speed**2 - np.sum(d1 * d2, axis=1) ** 2
    kappa = np.sqrt(np.maximum(cross, 0.0)) / np.where(speed > 0, speed, 1.0) ** 3
    return kappa, speed


def curvature_profile(c: Curve | np.ndarray, n: int = 1001) -> CurvatureReport:
    """Curvature ``|T'| / |gamma'|`` by central differences on a uniform grid.

    ``c`` may also be an ``(n, D)`` array of samples on a uniform ``[0, 1]``
    grid. ``discretization_error`` compares against the same estimate at
    twice the step.
    """
    if isinstance(c, Curve):
        if n < 5:
            raise ValueError("curvature profile needs at least five points")
        ts = np.linspace(0.0, 1.0, n)
        pts = c.flat_samples(ts)
    else:
        pts = np.asarray(c, dtype=np.float64)
        n = pts.shape[0]
        if n < 5:
            raise ValueError("curvature profile needs at least five points")
        ts = np.linspace(0.0, 1.0, n)
    h = 1.0 / (n - 1)
    kappa, speed = _curvature(pts, h)
    if np.any(speed < 1e-12):
        raise DegenerateCurveError("curve has (numerically) zero velocity")
    coarse, _ = _curvature(pts[::2], 2.0 * h)
    # coarse interior point j sits at fine index 2j + 2, i.e. kappa[2j + 1]
    fine_at_coarse = kappa[1::2][: len(coarse)]
    gap = float(np.max(np.abs(fine_at_coarse - coarse))) if len(coarse) else 0.0
    chord = float(np.linalg.norm(pts[-1] - pts[0]))
    kmax = float(kappa.max())
    try:
        d_max = dmax_bound(kmax, chord)
    except ChordTooLong:
        d_max = None
    return CurvatureReport(ts[1:-1], kappa, kmax, chord, d_max, gap)


def dmax_bound(kappa_max: float, chord: float) -> float:
    """``(1 / kappa) (1 - sqrt(1 - (kappa chord / 2)^2))``.

    Evaluated as ``x^2 / (kappa (1 + sqrt(1 - x^2)))`` with ``x = kappa chord / 2``
    to avoid cancellation; a zero curvature gives 0.
    """
    if kappa_max < 0 or chord < 0:
        raise ValueError("curvature and chord must be nonnegative")
    x = 0.5 * kappa_max * chord
    if x > 1.0:
        raise ChordTooLong(f"kappa_max * chord / 2 = {x:.6g} exceeds 1")
    if kappa_max == 0.0:
        return 0.0
    return x * x / (kappa_max * (1.0 + math.sqrt(1.0 - x * x)))


def lipschitz_estimate(net: NetworkSpec, region, pairs: int = 1000, seed: int = 0) -> float:
    """Empirical lower estimate of the Lipschitz constant of the loss on ``region``.

    Max of ``|L(a) - L(b)| / ||a - b||`` over randomly drawn pairs. This is
    not a certified constant.
    """
    pts = region if isinstance(region, np.ndarray) else np.array([p.flatten() for p in region])
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if pts.shape[0] < 2:
        raise ValueError("need at least two points")
    losses = batch_forward_loss(net, pts)
    rng = make_rng(seed)
    best, seen = 0.0, False
    for _ in range(int(pairs)):
        i, j = rng.integers(0, pts.shape[0], size=2)
        d = float(np.linalg.norm(pts[i] - pts[j]))
        if d == 0.0:
            continue
        seen = True
        best = max(best, abs(float(losses[i] - losses[j])) / d)
    if not seen:
        raise ValueError("all sampled pairs were coincident points")
    return best


def curve_to_chord_deviation(pts: np.ndarray) -> float:
    """Max distance from sampled curve points to the segment joining the endpoints."""
    pts = np.asarray(pts, dtype=np.float64)
    a, b = pts[0], pts[-1]
    return float(np.max(_point_segment_distance(pts, a[None], b[None])))


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # p: (P, D); a, b: (S, D) -> (P, S) distances
    ab = b - a
    denom = np.sum(ab * ab, axis=1)
    ap = p[:, None, :] - a[None, :, :]
    t = np.where(denom > 0, np.sum(ap * ab[None], axis=2) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(p[:, None, :] - closest, axis=2)


def chord_to_curve_distance(pts: np.ndarray, n_chord: int = 1001) -> float:
    """Max over chord points of the distance to the polyline through ``pts``."""
    pts = np.asarray(pts, dtype=np.float64)
    s = np.linspace(0.0, 1.0, n_chord)[:, None]
    chord = (1.0 - s) * pts[0] + s * pts[-1]
    best = np.full(n_chord, np.inf)
    step = max(1, 2_000_000 // max(1, n_chord * pts.shape[1]))
    for lo in range(0, pts.shape[0] - 1, step):
        seg_a = pts[lo:lo + step]
        seg_b = pts[lo + 1:lo + step + 1]
        seg_a = seg_a[: len(seg_b)]
        best = np.minimum(best, _point_segment_distance(chord, seg_a, seg_b).min(axis=1))
    return float(best.max())


def write_profile_csv(path, profile: LossProfile, linear: LossProfile | None = None) -> None:
    if linear is None:
        write_csv(path, ["t", "loss"], zip(profile.ts, profile.losses))
        return
    if not np.array_equal(profile.ts, linear.ts):
        raise ValueError("paired profiles must share a grid")
    write_csv(
        path, ["t", "loss_gamma", "loss_linear"], zip(profile.ts, profile.losses, linear.losses)
    )
