"""Dense real linear algebra shared by every other module.

Matrices are plain ``float64`` numpy arrays. :func:`as_matrix` is the single
entry point that validates shape and finiteness and freezes the result, so
everything downstream can treat matrices as immutable values.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "LinAlgError",
    "NotSquareError",
    "SingularMatrixError",
    "NoRealPrincipalLog",
    "SvdFactors",
    "as_matrix",
    "rank_tolerance",
    "svd",
    "det_sign",
    "pseudoinverse",
    "matrix_exp",
    "matrix_log",
    "orthogonal_log",
    "make_rng",
]


class LinAlgError(ValueError):
    pass


class NotSquareError(LinAlgError):
    pass


class SingularMatrixError(LinAlgError):
    pass


class NoRealPrincipalLog(LinAlgError):
    """Raised when an eigenvalue sits on the closed negative real axis."""


def as_matrix(a, *, copy: bool = True) -> np.ndarray:
    """Return ``a`` as a finite, read-only 2-D float64 array.

    Scalars become 1x1 and 1-D input becomes a single column.
    """
    m = np.array(a, dtype=np.float64, copy=copy)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    elif m.ndim != 2:
        raise LinAlgError(f"expected a 2-D matrix, got shape {m.shape}")
    if m.size == 0:
        raise LinAlgError("matrix must have positive rows and cols")
    if not np.all(np.isfinite(m)):
        raise LinAlgError("matrix entries must be finite")
    m.flags.writeable = False
    return m


def _square(m: np.ndarray) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise NotSquareError(f"expected a square matrix, got {m.shape}")
    return m


def rank_tolerance(m: np.ndarray, s_max: float | None = None) -> float:
    """max(rows, cols) * eps * largest singular value."""
    if s_max is None:
        s_max = float(np.linalg.norm(m, 2)) if m.size else 0.0
    return max(m.shape) * np.finfo(np.float64).eps * s_max


class SvdFactors:
    """Thin SVD ``m = u @ diag(singular_values) @ v.T``."""

    __slots__ = ("u", "singular_values", "v")

    def __init__(self, u: np.ndarray, singular_values: np.ndarray, v: np.ndarray):
        self.u = u
        self.singular_values = singular_values
        self.v = v

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


def svd(m) -> SvdFactors:
    m = as_matrix(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SvdFactors(u, s, vt.T)


def det_sign(m) -> int:
    """Sign of ``det(m)``; 0 when the matrix is numerically rank deficient."""
    m = _square(m)
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= rank_tolerance(m, s[0]):
        return 0
    sign, _ = np.linalg.slogdet(m)
    return int(sign)


def pseudoinverse(m) -> np.ndarray:
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values at or below :func:`rank_tolerance` are treated as zero.
    """
    f = svd(m)
    s = f.singular_values
    tol = rank_tolerance(np.empty(as_matrix(m).shape), s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > tol
    inv[keep] = 1.0 / s[keep]
    return as_matrix((f.v * inv) @ f.u.T, copy=False)


# Pade coefficients b_j of the [q/q] approximant to exp, and the 1-norm bound
# below which degree q reaches double precision (Higham 2005).
_PADE = {
    3: (1.495585217958292e-2, (120.0, 60.0, 12.0, 1.0)),
    5: (2.539398330063230e-1, (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0)),
    7: (
        9.504178996162932e-1,
        (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    ),
    9: (
        2.097847961257068e0,
        (
            17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
            2162160.0, 110880.0, 3960.0, 90.0, 1.0,
        ),
    ),
    13: (
        5.371920351148152e0,
        (
            64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
            1187353796428800.0, 129060195264000.0, 10559470521600.0,
            670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
            960960.0, 16380.0, 182.0, 1.0,
        ),
    ),
}


def _pade(a: np.ndarray, coeffs) -> np.ndarray:
    n = a.shape[0]
    a2 = a @ a
    power = np.eye(n)
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    for j in range(0, len(coeffs), 2):
        v += coeffs[j] * power
        if j + 1 < len(coeffs):
            u += coeffs[j + 1] * power
        power = power @ a2
    u = a @ u
    return np.linalg.solve(v - u, v + u)


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant."""
    a = np.array(_square(m))
    norm1 = np.linalg.norm(a, 1)
    for q in (3, 5, 7, 9):
        theta, coeffs = _PADE[q]
        if norm1 <= theta:
            return as_matrix(_pade(a, coeffs), copy=False)
    theta, coeffs = _PADE[13]
    squarings = max(0, int(np.ceil(np.log2(norm1 / theta)))) if norm1 > 0 else 0
    r = _pade(a / 2.0**squarings, coeffs)
    for _ in range(squarings):
        r = r @ r
    return as_matrix(r, copy=False)


def _check_log_domain(m: np.ndarray) -> None:
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= rank_tolerance(m, s[0]):
        raise SingularMatrixError("matrix is singular; logarithm undefined")
    eig = np.linalg.eigvals(m)
    on_real_axis = np.abs(eig.imag) <= 1e-12 * np.maximum(1.0, np.abs(eig))
    if np.any(on_real_axis & (eig.real < 0)):
        raise NoRealPrincipalLog(
            "an eigenvalue lies on the negative real axis; no real principal log"
        )


def matrix_log(m) -> np.ndarray:
    """Principal real logarithm of an invertible matrix.

    Raises
    ------
    SingularMatrixError
        If ``m`` is numerically singular.
    NoRealPrincipalLog
        If any eigenvalue lies on the closed negative real axis.
    """
    m = _square(m)
    _check_log_domain(m)
    log = scipy.linalg.logm(np.array(m))
    if np.iscomplexobj(log):
        scale = max(1.0, float(np.abs(log).max()))
        if np.abs(log.imag).max() > 1e-8 * scale:
            raise NoRealPrincipalLog("principal logarithm is not real")
        log = log.real
    return as_matrix(log, copy=False)


def orthogonal_log(q) -> np.ndarray:
    """A real skew-symmetric logarithm of a rotation ``q`` (orthogonal, det +1).

    Unlike :func:`matrix_log` this also handles eigenvalue pairs at -1, which
    are paired into rotations by pi.
    """
    q = _square(q)
    n = q.shape[0]
    if np.linalg.norm(q.T @ q - np.eye(n)) > 1e-8 * n:
        raise LinAlgError("matrix is not orthogonal")
    if np.linalg.det(q) < 0:
        raise LinAlgError("orthogonal matrix has det -1; no real logarithm")
    t, z = scipy.linalg.schur(np.array(q), output="real")
    log_t = np.zeros_like(t)
    minus_one = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > 1e-12:
            theta = np.arctan2(t[i + 1, i], t[i, i])
            log_t[i, i + 1] = -theta
            log_t[i + 1, i] = theta
            i += 2
            continue
        if t[i, i] < 0:
            minus_one.append(i)
        i += 1
    # det = +1 forces an even number of -1 eigenvalues
    for a, b in zip(minus_one[::2], minus_one[1::2]):
        log_t[a, b] = -np.pi
        log_t[b, a] = np.pi
    log = z @ log_t @ z.T
    return as_matrix(0.5 * (log - log.T), copy=False)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the only RNG used across the package."""
    return np.random.Generator(np.random.PCG64(seed))
