"""Connected components of zero-loss sets.

For a full-rank linear network the minimum is homeomorphic to
``GL_h^{l-1}`` through ``W -> (W_1 X, W_2, ..., W_{l-1})``, so the component
of a point is the tuple of determinant signs of those matrices. The scalar
three-layer net with a skip connection has a hand-derived labeling, and a
numeric probe counts components of a sampled point cloud.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .linalg import SingularMatrixError, det_sign
from .models import NetworkSpec, ParameterPoint, ShapeError, batch_forward_loss, forward_loss

__all__ = [
    "NotAtMinimumError",
    "ComponentIndex",
    "component_index_linear",
    "component_index_resnet1d",
    "count_components_numeric",
    "label_components_numeric",
    "sample_resnet1d_minimum",
]

MINIMUM_RTOL = 1e-8


class NotAtMinimumError(ValueError):
    pass


@dataclass(frozen=True)
class ComponentIndex:
    signs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("component signs must be +1 or -1")


def component_index_linear(w: ParameterPoint, net: NetworkSpec) -> ComponentIndex:
    """``(det_sign(W_1 X), det_sign(W_2), ..., det_sign(W_{l-1}))``."""
    if not net.is_linear or net.skip_epsilon != 0.0:
        raise ShapeError("component index is defined for plain linear networks")
    loss = forward_loss(net, w)
    if loss >= MINIMUM_RTOL * net.y_sq_norm:
        raise NotAtMinimumError(f"loss {loss:.3e} is above the minimum tolerance")
    mats = [w[0] @ net.data.x, *w.weights[1:-1]]
    signs = [det_sign(m) for m in mats]
    if 0 in signs:
        raise SingularMatrixError("degenerate point: a determinant vanishes")
    return ComponentIndex(tuple(signs))


def component_index_resnet1d(w, x: float, y: float, eps: float) -> int:
    """Label of a zero-loss point of ``(y - w3 (w2 w1 x + eps x))^2``.

    0 for the component joined through ``w1 = 0``, 1 for ``w1 > 0`` with
    ``w3`` of the opposite sign to ``y / (eps x)``, 2 for ``w1 < 0`` likewise.
    """
    w1, w2, w3 = (float(np.asarray(v).reshape(())) for v in w)
    if x == 0 or y == 0 or eps == 0:
        raise ValueError("x, y and eps must be nonzero")
    loss = (y - w3 * (w2 * w1 * x + eps * x)) ** 2
    if loss >= 1e-10:
        raise NotAtMinimumError(f"loss {loss:.3e} is not zero")
    ref = np.sign(y / (eps * x))
    if w1 == 0 or np.sign(w3) == ref:
        return 0
    return 1 if w1 > 0 else 2


def _as_cloud(point_cloud) -> np.ndarray:
    if isinstance(point_cloud, np.ndarray):
        return np.atleast_2d(point_cloud.astype(np.float64, copy=False))
    return np.array([p.flatten() for p in point_cloud], dtype=np.float64)


def label_components_numeric(
    point_cloud, link_radius: float, net: NetworkSpec, loss_ceiling: float
) -> np.ndarray:
    """Component label per point; see :func:`count_components_numeric`."""
    if link_radius <= 0:
        raise ValueError("link_radius must be positive")
    pts = _as_cloud(point_cloud)
    if pts.shape[0] == 0 or pts.size == 0:
        raise ValueError("empty point cloud")
    losses = batch_forward_loss(net, pts)
    if np.any(losses >= loss_ceiling):
        raise ValueError("every point must have loss below loss_ceiling")
    n = pts.shape[0]
    pairs = cKDTree(pts).query_pairs(link_radius, output_type="ndarray")
    if len(pairs):
        d = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
        pairs = pairs[d < link_radius]
    if len(pairs):
        keep = np.empty(len(pairs), dtype=bool)
        chunk = 200_000
        for s in range(0, len(pairs), chunk):
            p = pairs[s:s + chunk]
            mid = 0.5 * (pts[p[:, 0]] + pts[p[:, 1]])
            keep[s:s + chunk] = batch_forward_loss(net, mid) < loss_ceiling
        pairs = pairs[keep]
    rows = pairs[:, 0] if len(pairs) else np.empty(0, dtype=np.intp)
    cols = pairs[:, 1] if len(pairs) else np.empty(0, dtype=np.intp)
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def count_components_numeric(
    point_cloud, link_radius: float, net: NetworkSpec, loss_ceiling: float
) -> int:
    """Number of connected components of a sampled low-loss set.

    Two points are linked when their distance is below ``link_radius`` and
    the loss at their midpoint stays below ``loss_ceiling``. ``point_cloud``
    is a sequence of points or an ``(N, D)`` array of flattened points.
    """
    labels = label_components_numeric(point_cloud, link_radius, net, loss_ceiling)
    return int(labels.max()) + 1


def sample_resnet1d_minimum(
    x: float, y: float, eps: float, box: float = 10.0, step: float = 0.1,
    max_slope: float = 1.5,
) -> np.ndarray:
    """Dense sample of ``{w3 (w2 w1 x + eps x) = y}`` inside ``[-box, box]^3``.

    Each coordinate in turn is solved from a grid over the other two, keeping
    only points where that chart has slope at most ``max_slope`` so grid
    neighbours stay close on the surface. Returns an ``(N, 3)`` array.
    """
    grid = np.arange(-box, box + step / 2, step)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    a, b = a.ravel(), b.ravel()
    t = y / x
    out = []
    with np.errstate(divide="ignore", invalid="ignore"):
        # w3 from (w1, w2): w3 = t / (w1 w2 + eps)
        p = a * b + eps
        w3 = t / p
        slope = np.abs(t) / p**2 * np.hypot(a, b)
        out.append((np.stack([a, b, w3], axis=1), slope))
        # w2 from (w1, w3): w2 = (t / w3 - eps) / w1
        w2 = (t / b - eps) / a
        slope = np.hypot(w2 / a, t / (b**2 * a))
        out.append((np.stack([a, w2, b], axis=1), slope))
        # w1 from (w2, w3)
        w1 = (t / b - eps) / a
        slope = np.hypot(w1 / a, t / (b**2 * a))
        out.append((np.stack([w1, a, b], axis=1), slope))
    pts = []
    for chart, slope in out:
        ok = np.all(np.isfinite(chart), axis=1) & np.isfinite(slope) & (slope <= max_slope)
        ok &= np.all(np.abs(chart) <= box, axis=1)
        pts.append(chart[ok])
    return np.concatenate(pts, axis=0)
