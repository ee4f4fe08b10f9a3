import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symland.linalg import (
    NoRealPrincipalLog,
    NotSquareError,
    SingularMatrixError,
    as_matrix,
    det_sign,
    make_rng,
    matrix_exp,
    matrix_log,
    orthogonal_log,
    pseudoinverse,
    svd,
)


def taylor_exp(m, terms=80):
    # oracle: plain Taylor series after scaling, independent of the Pade code
    m = np.asarray(m, dtype=float)
    s = max(0, int(math.ceil(math.log2(max(np.linalg.norm(m, 1), 1e-300)))) + 1)
    a = m / 2.0**s
    out = np.eye(len(m))
    term = np.eye(len(m))
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def test_as_matrix_shapes():
    assert as_matrix(3.0).shape == (1, 1)
    assert as_matrix([1, 2, 3]).shape == (3, 1)
    m = as_matrix([[1, 2]])
    assert not m.flags.writeable
    with pytest.raises(ValueError):
        as_matrix([[np.nan]])


@pytest.mark.parametrize(
    "m, expected",
    [(np.diag([2.0, 3.0]), 1), ([[0, 1], [1, 0]], -1), ([[1, 2], [2, 4]], 0)],
)
def test_det_sign_examples(m, expected):
    assert det_sign(m) == expected


def test_det_sign_rejects_non_square():
    with pytest.raises(NotSquareError):
        det_sign(np.ones((2, 3)))


def test_det_sign_multiplicative(rng):
    for _ in range(50):
        n = int(rng.integers(1, 7))
        a, b = rng.standard_normal((2, n, n))
        assert det_sign(a @ b) == det_sign(a) * det_sign(b)


@pytest.mark.parametrize(
    "m, expected",
    [(np.eye(3), np.eye(3)), ([[2.0]], [[0.5]]), (np.diag([1.0, 0.0]), np.diag([1.0, 0.0]))],
)
def test_pseudoinverse_examples(m, expected):
    np.testing.assert_allclose(pseudoinverse(m), expected, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(r=st.integers(1, 8), c=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_pseudoinverse_penrose(r, c, seed):
    m = make_rng(seed).standard_normal((r, c))
    p = pseudoinverse(m)
    assert np.linalg.norm(m @ p @ m - m) < 1e-8
    assert np.linalg.norm(p @ m @ p - p) < 1e-8


def test_pseudoinverse_rank_deficient(rng):
    m = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
    p = pseudoinverse(m)
    np.testing.assert_allclose(p, np.linalg.pinv(m), atol=1e-10)


def test_svd_reconstruct(rng):
    m = rng.standard_normal((4, 3))
    np.testing.assert_allclose(svd(m).reconstruct(), m, atol=1e-13)


def test_matrix_exp_examples():
    np.testing.assert_array_equal(matrix_exp(np.zeros((2, 2))), np.eye(2))
    np.testing.assert_allclose(matrix_exp(np.diag([0.3, -2.0])), np.diag(np.exp([0.3, -2.0])), rtol=1e-14)
    np.testing.assert_allclose(matrix_exp([[0.0, 1.0], [0.0, 0.0]]), [[1, 1], [0, 1]], atol=1e-15)
    with pytest.raises(NotSquareError):
        matrix_exp(np.ones((2, 3)))


@pytest.mark.parametrize("scale", [1e-3, 0.5, 3.0, 20.0])
def test_matrix_exp_matches_taylor_oracle(rng, scale):
    for n in (1, 2, 5, 9):
        m = scale * rng.standard_normal((n, n)) / math.sqrt(n)
        ref = taylor_exp(m)
        assert np.linalg.norm(matrix_exp(m) - ref) <= 1e-11 * max(1.0, np.linalg.norm(ref))


def test_matrix_exp_rotation():
    theta = 2.5
    r = matrix_exp([[0.0, -theta], [theta, 0.0]])
    np.testing.assert_allclose(r, [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]], atol=1e-14)


def test_matrix_log_examples():
    np.testing.assert_allclose(matrix_log(np.eye(2)), np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(matrix_log(np.diag([math.e, math.e**2])), np.diag([1.0, 2.0]), atol=1e-14)
    with pytest.raises(NoRealPrincipalLog):
        matrix_log(-np.eye(2))
    with pytest.raises(SingularMatrixError):
        matrix_log(np.diag([1.0, 0.0]))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_log_inverts_exp(n, seed):
    m = make_rng(seed).standard_normal((n, n))
    m *= 1.9 / max(np.linalg.norm(m, 2), 1e-12)
    lam = np.linalg.eigvals(matrix_exp(m))
    # ||m|| < 2 < pi keeps eigenvalues off the negative axis and the log principal
    assert np.all((lam.real > 0) | (np.abs(lam.imag) > 1e-12))
    assert np.linalg.norm(matrix_log(matrix_exp(m)) - m) < 1e-6


def test_orthogonal_log_handles_minus_identity():
    q = -np.eye(2)
    s = orthogonal_log(q)
    np.testing.assert_allclose(s, -s.T, atol=1e-14)
    np.testing.assert_allclose(matrix_exp(s), q, atol=1e-12)


def test_orthogonal_log_random(rng):
    for n in (2, 3, 4, 5):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        if det_sign(q) < 0:
            q[:, 0] *= -1
        s = orthogonal_log(q)
        np.testing.assert_allclose(s, -s.T, atol=1e-12)
        np.testing.assert_allclose(matrix_exp(s), q, atol=1e-10)


def test_make_rng_is_pcg64_and_reproducible():
    a, b = make_rng(7), make_rng(7)
    assert isinstance(a.bit_generator, np.random.PCG64)
    np.testing.assert_array_equal(a.standard_normal(5), b.standard_normal(5))
