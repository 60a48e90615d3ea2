import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denaturefit.linalg import (
    NotPositiveDefinite,
    check_symmetric,
    cholesky_decompose,
    cholesky_inverse,
    cholesky_solve,
)


def test_identity():
    np.testing.assert_array_equal(cholesky_decompose(np.eye(3)), np.eye(3))


def test_two_by_two():
    low = cholesky_decompose([[4.0, 2.0], [2.0, 5.0]])
    np.testing.assert_array_equal(low, [[2.0, 0.0], [1.0, 2.0]])


def test_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_decompose([[1.0, 2.0], [2.0, 1.0]])
    assert issubclass(NotPositiveDefinite, np.linalg.LinAlgError)


def test_nonsymmetric_rejected():
    with pytest.raises(ValueError):
        check_symmetric([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        check_symmetric(np.ones((2, 3)))


def test_solve_examples():
    np.testing.assert_array_equal(cholesky_solve(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    low = cholesky_decompose([[4.0, 2.0], [2.0, 5.0]])
    x = cholesky_solve(low, [8.0, 9.0])
    # Cramer's rule: det 16, x = (8*5 - 2*9, 4*9 - 2*8) / 16
    np.testing.assert_allclose(x, [22 / 16, 20 / 16], rtol=1e-15)


def test_solve_dimension_mismatch():
    with pytest.raises(ValueError):
        cholesky_solve(np.eye(3), [1.0, 2.0])


def _spd(k, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(k + 3, k))
    return a.T @ a + 0.1 * np.eye(k)


@given(st.integers(1, 8), st.integers(0, 10_000))
@settings(max_examples=60)
def test_round_trip(k, seed):
    a = _spd(k, seed)
    low = cholesky_decompose(a)
    assert np.allclose(np.triu(low, 1), 0.0)
    np.testing.assert_allclose(low @ low.T, a, rtol=0, atol=1e-10 * np.abs(a).max())
    np.testing.assert_allclose(low, np.linalg.cholesky(a), rtol=1e-10, atol=1e-12)
    b = np.arange(1.0, k + 1)
    x = cholesky_solve(low, b)
    np.testing.assert_allclose(a @ x, b, rtol=0, atol=1e-9)


def test_inverse_matches_numpy():
    a = _spd(6, 3)
    inv = cholesky_inverse(a)
    np.testing.assert_allclose(inv, np.linalg.inv(a), rtol=1e-10)
    np.testing.assert_array_equal(inv, inv.T)


def test_multiple_rhs():
    a = _spd(4, 1)
    b = np.arange(8.0).reshape(4, 2)
    x = cholesky_solve(cholesky_decompose(a), b)
    np.testing.assert_allclose(a @ x, b, atol=1e-10)
