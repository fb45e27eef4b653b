"""Tridiagonal solves for the implicit diffusion step."""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack


class ZeroPivotError(ArithmeticError):
    pass


def thomas(lower, diag, upper, rhs):
    """Thomas algorithm for ``A x = rhs`` with ``A`` tridiagonal.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` unused),
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` unused). ``rhs`` may be
    2-D, one system per column.
    """
    a = np.asarray(lower, dtype=float)
    b = np.asarray(diag, dtype=float)
    c = np.asarray(upper, dtype=float)
    d = np.array(rhs, dtype=float)
    n = b.size
    cp = np.empty(n)
    dp = np.empty_like(d)
    piv = b[0]
    if piv == 0:
        raise ZeroPivotError("zero pivot in row 0")
    cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i] * cp[i - 1]
        if piv == 0:
            raise ZeroPivotError(f"zero pivot in row {i}")
        cp[i] = c[i] / piv if i < n - 1 else 0.0
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv
    x = np.empty_like(dp)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


class FactoredTridiagonal:
    """LU-factored tridiagonal matrix, reused across time steps (LAPACK gttrf/gttrs)."""

    def __init__(self, lower, diag, upper):
        dl = np.asarray(lower, dtype=float)[1:].copy()
        du = np.asarray(upper, dtype=float)[:-1].copy()
        d = np.asarray(diag, dtype=float).copy()
        self.n = d.size
        if self.n < 3:
            raise ValueError("factored solves need at least 3 unknowns")
        self._lu = lapack.dgttrf(dl, d, du)
        info = self._lu[-1]
        if info > 0:
            raise ZeroPivotError(f"zero pivot in row {info - 1}")
        if info < 0:
            raise ValueError(f"illegal argument {-info} to dgttrf")

    def solve(self, rhs):
        dl, d, du, du2, ipiv, _ = self._lu
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, np.asarray(rhs, dtype=float))
        if info != 0:
            raise ValueError(f"dgttrs failed with info={info}")
        return x


def neumann_diffusion_matrix(n: int, dx: float, coef: float):
    """Bands of ``I - coef * L`` where ``L`` is the zero-flux second difference.

    The boundary rows use a mirrored ghost node, ``u[-1] = u[1]``.
    """
    s = coef / dx ** 2
    lower = np.full(n, -s)
    upper = np.full(n, -s)
    diag = np.full(n, 1 + 2 * s)
    upper[0] = -2 * s
    lower[-1] = -2 * s
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, diag, upper
