import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_banded

from sitwave.tridiag import FactoredTridiagonal, ZeroPivotError, neumann_diffusion_matrix, thomas


def _banded(lower, diag, upper):
    ab = np.zeros((3, diag.size))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 40), seed=st.integers(0, 2**31 - 1))
def test_thomas_and_lapack_agree_with_banded_solver(n, seed):
    rng = np.random.default_rng(seed)
    lower, upper = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.5, 2, n)  # diagonally dominant
    rhs = rng.normal(size=(n, 3))
    ref = solve_banded((1, 1), _banded(lower, diag, upper), rhs)
    np.testing.assert_allclose(thomas(lower, diag, upper, rhs), ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(FactoredTridiagonal(lower, diag, upper).solve(rhs), ref, rtol=1e-10, atol=1e-12)


def test_zero_pivot():
    with pytest.raises(ZeroPivotError):
        thomas(np.zeros(3), np.array([0.0, 1.0, 1.0]), np.zeros(3), np.ones(3))
    with pytest.raises(ZeroPivotError):
        FactoredTridiagonal(np.zeros(3), np.array([1.0, 0.0, 1.0]), np.zeros(3))


def test_factored_needs_three_unknowns():
    with pytest.raises(ValueError):
        FactoredTridiagonal(np.ones(2), 4 * np.ones(2), np.ones(2))


def test_neumann_matrix_conserves_mass():
    # with trapezoid weights the zero-flux operator conserves the discrete integral
    n, dx = 50, 0.3
    lo, d, up = neumann_diffusion_matrix(n, dx, 2.0)
    rng = np.random.default_rng(1)
    u = rng.uniform(size=n)
    v = FactoredTridiagonal(lo, d, up).solve(u)
    w = np.full(n, dx)
    w[[0, -1]] = dx / 2
    assert w @ v == pytest.approx(w @ u, rel=1e-13)


def test_neumann_matrix_is_m_matrix():
    lo, d, up = neumann_diffusion_matrix(20, 0.25, 0.7)
    assert np.all(d > 0) and np.all(lo <= 0) and np.all(up <= 0)
    assert np.all(d >= np.abs(lo) + np.abs(up))
    inv = np.linalg.inv(np.diag(d) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1))
    assert inv.min() >= 0
