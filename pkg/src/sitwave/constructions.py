"""Explicit super- and sub-solutions of the travelling-wave problems and their numerical checks.

Wave profiles are functions of ``z = x - c t`` with ``c < 0``. The system
profiles solve, with the sterile density frozen to a control ``phi(z)``,

    -c E'        = beta F (1 - E/K) - (nu_E + mu_E) E
    -c F' - D F'' = r nu_E E M / (M + gamma phi) - mu_F F
    -c M' - D M'' = (1 - r) nu_E E - mu_M M

and the scalar profile solves ``-c w' - w'' = w/(w+phi) g(w) - mu w`` with
``g(w) = beta w / (beta w / K + delta)``. Residuals are reported divided by
the equilibrium value of the component, so tolerances are dimensionless.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .model import (
    ModelParams,
    ScalarParams,
    equilibrium,
    mating_fraction,
    offspring_number,
    scalar_equilibrium,
    scalar_growth,
    scalar_growth_integral,
)
from .release import ms_lower_bound_amplitude, ms_stationary_profile, ms_sufficient_amplitude
from .solver import Grid, SchemeConfig, Trajectory, _snapshot_plan, time_step
from .tridiag import FactoredTridiagonal, neumann_diffusion_matrix

N_SAMPLES = 10_000
THETA = 0.5  # share of the F-decay budget given to the mating term (alpha C_E / E*)
SAFETY = 0.9
CS_MARGIN = 1.1


def _poly_residual(coeffs, root) -> float:
    """Relative residual of a polynomial (highest degree first) at ``root``."""
    terms = [a * root ** k for k, a in zip(range(len(coeffs) - 1, -1, -1), coeffs)]
    return abs(sum(terms)) / max(sum(abs(t) for t in terms), 1e-300)


def _check_speed(c: float):
    if not c < 0:
        raise ValueError(f"wave speed must be negative, got {c!r}")


def _step_control(C, eta):
    def phi(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, C * np.exp(-eta * np.maximum(x, 0.0)), 0.0)

    return phi


# -- scalar constructions ------------------------------------------------------


@dataclass
class ScalarSuperSolution:
    c: float
    alpha: float
    r_alpha: float
    A_min: float
    A: float
    eta: float
    s: ScalarParams

    kind = "super"
    components = ("u",)

    @property
    def u_star(self) -> float:
        return scalar_equilibrium(self.s)

    @property
    def admissible(self) -> bool:
        return self.A >= self.A_min and 0 <= self.eta <= -self.r_alpha

    @property
    def kinks(self):
        return {"u": [0.0]}

    @property
    def scales(self):
        return {"u": self.u_star}

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return {"u": np.where(x < 0, self.u_star, self.u_star * np.exp(self.r_alpha * np.maximum(x, 0.0)))}

    def control(self, x):
        return _step_control(self.A, self.eta)(x)

    def root_residuals(self):
        k = self.alpha * self.s.beta / self.s.delta - self.s.mu
        return {"r_alpha": _poly_residual([1.0, self.c, k], self.r_alpha)}

    def default_samples(self, n=N_SAMPLES):
        return np.linspace(-20.0, 40.0 / abs(self.r_alpha), n)


def scalar_super(c: float, alpha: float, s: ScalarParams = ScalarParams(), A: Optional[float] = None, eta: Optional[float] = None):
    """Super-solution ``u* min(1, e^{r(alpha) x})`` with control ``A e^{-eta x} 1_{x>=0}``.

    Any ``eta`` in ``[0, -r(alpha)]`` and ``A >= u*/alpha - u*`` is admissible;
    the defaults are the extreme admissible pair.
    """
    _check_speed(c)
    hi = s.delta * s.mu / s.beta
    if not 0 < alpha < hi:
        raise ValueError(f"alpha must lie in (0, {hi:.6g}), got {alpha!r}")
    k = alpha * s.beta / s.delta - s.mu
    r = (-c - math.sqrt(c * c - 4 * k)) / 2
    u = scalar_equilibrium(s)
    A_min = u / alpha - u
    return ScalarSuperSolution(c, alpha, r, A_min, A_min if A is None else float(A), -r if eta is None else float(eta), s)


@dataclass
class ScalarSubSolution:
    """``w`` on ``x < 0`` from ``-w'' = f(w)``, ``w(0) = 0``; zero on ``x >= 0``."""

    s: ScalarParams
    X: float
    slope0: float
    energy0: float
    _sol: object = field(repr=False)
    tail_eps: float = 0.0
    tail_rate: float = 0.0
    c: Optional[float] = None

    kind = "sub"
    components = ("u",)

    @property
    def kinks(self):
        return {"u": [-self.X, 0.0]}

    @property
    def scales(self):
        return {"u": scalar_equilibrium(self.s)}

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        u = scalar_equilibrium(self.s)
        inner = np.clip(x, -self.X, 0.0)
        w = self._sol.sol(inner.ravel())[0].reshape(x.shape)
        tail = u - self.tail_eps * np.exp(self.tail_rate * np.minimum(x + self.X, 0.0))
        out = np.where(x < -self.X, tail, w)
        return {"u": np.where(x >= 0, 0.0, out)}

    def slope(self, x):
        """ODE state ``w'`` on ``[-X, 0]``."""
        return self._sol.sol(np.asarray(x, dtype=float))[1]

    def control(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def energy_defect(self, x) -> np.ndarray:
        """``w'^2/2 - int_w^{u*} f`` along the integrated trajectory, relative to the total energy."""
        x = np.asarray(x, dtype=float)
        w, wp = self._sol.sol(x)
        u = scalar_equilibrium(self.s)
        rhs = np.array([scalar_growth_integral(wi, u, self.s) for wi in w])
        return (wp ** 2 / 2 - rhs) / self.energy0

    def with_speed(self, c: float) -> "ScalarSubSolution":
        _check_speed(c)
        out = ScalarSubSolution(self.s, self.X, self.slope0, self.energy0, self._sol, self.tail_eps, self.tail_rate, c)
        return out

    def default_samples(self, n=N_SAMPLES):
        return np.linspace(-(self.X + 20.0), 10.0, n)


def scalar_sub(s: ScalarParams = ScalarParams(), efolds: float = 7.0, rtol: float = 1e-13) -> ScalarSubSolution:
    """Integrate ``-w'' = f(w)`` backwards from ``w(0) = 0``, ``w'(0) = -sqrt(2 int_0^{u*} f)``.

    Integration stops once ``u* - w`` has fallen by ``efolds`` e-folds below
    ``u*``; beyond that point an exponential tail with matched slope is used.
    """
    u = scalar_equilibrium(s)
    energy, _ = quad(lambda v: scalar_growth(v, s), 0.0, u, epsabs=1e-10, epsrel=1e-12)
    slope0 = -math.sqrt(2 * energy)
    target = u * math.exp(-efolds)

    def rhs(x, y):
        return [y[1], -scalar_growth(y[0], s)]

    def reached(x, y):
        return u - y[0] - target

    reached.terminal = True
    reached.direction = -1

    # the linear rate at u* bounds the length needed for the e-folds; add room for the transit
    rate = math.sqrt(-(s.beta * s.delta / (s.beta * u / s.K + s.delta) ** 2 - s.mu))
    span = 10 * (efolds / rate + u / abs(slope0) + 1.0)
    sol = solve_ivp(rhs, (0.0, -span), [0.0, slope0], method="DOP853", rtol=rtol, atol=1e-12 * u, dense_output=True, events=reached)
    if sol.status != 1:
        raise RuntimeError("sub-solution ODE did not approach u* within the integration span")
    X = -float(sol.t[-1])
    w_end, wp_end = sol.y[:, -1]
    if np.any(np.diff(sol.y[0]) <= 0) or np.any(sol.y[1][1:] >= 0):
        raise RuntimeError("sub-solution lost monotonicity; quadrature or step size fault")
    eps = u - w_end
    return ScalarSubSolution(s, X, slope0, energy, sol, eps, -wp_end / eps)


# -- system super-solution -----------------------------------------------------


class _ETail:
    """``E*e^{delta(x)} + (-beta F*/c) int_0^x e^{-lam s + delta(x) - delta(s)} ds`` for ``x >= 0``."""

    def __init__(self, p: ModelParams, c: float, lam: float):
        eq = equilibrium(p)
        self.E, self.F = eq.E_star, eq.F_star
        self.lam, self.c = lam, c
        self.k = p.beta * eq.F_star / (lam * c * p.K)
        self.a = (p.nu_E + p.mu_E) / c
        self.gain = -p.beta * eq.F_star / c

    def delta(self, x):
        return self.k * (-np.expm1(-self.lam * x)) + self.a * x

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pts = np.unique(np.maximum(x, 0.0))
        I = np.empty_like(pts)
        acc, prev = 0.0, 0.0
        lam, k, a = self.lam, self.k, self.a
        for i, xi in enumerate(pts):
            if xi > prev:
                # integrand exponent -lam s + delta(xi) - delta(s) stays <= 0
                f = lambda s_: math.exp(-lam * s_ + k * (math.exp(-lam * s_) - math.exp(-lam * xi)) + a * (xi - s_))
                seg, _ = quad(f, prev, xi, epsabs=1e-14, epsrel=1e-13, limit=200)
                acc = acc * math.exp(self.delta(xi) - self.delta(prev)) + seg
                prev = xi
            I[i] = acc
        vals = self.E * np.exp(self.delta(pts)) + self.gain * I
        return vals[np.searchsorted(pts, np.maximum(x, 0.0))]


@dataclass
class SystemSuperSolution:
    c: float
    p: ModelParams
    lam: float
    lambda_bounds: tuple
    alpha: float
    C_E: float
    C_M: float
    x_E: float
    x_M: float
    C_s_min: float
    C_s: float
    eta: float
    delta_minus: float
    _E: _ETail = field(repr=False)

    kind = "super"
    components = ("E", "F", "M")

    @property
    def kinks(self):
        return {"E": [self.x_E], "F": [0.0], "M": [self.x_M]}

    @property
    def scales(self):
        eq = equilibrium(self.p)
        return {"E": eq.E_star, "F": eq.F_star, "M": eq.M_star}

    def phi_M_tilde(self, x):
        x = np.asarray(x, dtype=float)
        M = equilibrium(self.p).M_star
        # written to avoid cancellation between the two huge exponentials near x = 0
        return np.exp(math.log(self.C_M) - self.lam * x) * -np.expm1((self.delta_minus + self.lam) * x) + M * np.exp(self.delta_minus * x)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        eq = equilibrium(self.p)
        E = np.where(x <= self.x_E, eq.E_star, self._E(np.maximum(x, self.x_E)))
        F = np.where(x <= 0, eq.F_star, eq.F_star * np.exp(-self.lam * np.maximum(x, 0.0)))
        M = np.where(x <= self.x_M, eq.M_star, self.phi_M_tilde(np.maximum(x, self.x_M)))
        return {"E": E, "F": F, "M": M}

    def control(self, x):
        return _step_control(self.C_s, self.eta)(x)

    @property
    def A_lower_bound(self) -> float:
        return ms_lower_bound_amplitude(self.C_s, self.eta, self.p, self.c)

    @property
    def A_sufficient(self) -> float:
        return ms_sufficient_amplitude(self.C_s, self.eta, self.p, self.c)

    def root_residuals(self):
        p = self.p
        return {"delta_minus": _poly_residual([-p.D, -self.c, p.mu_M], self.delta_minus)}

    def default_samples(self, n=N_SAMPLES):
        return np.linspace(-20.0, self.x_M + 30.0 / self.lam, n)


def _lambda_bounds(p: ModelParams, c: float, theta: float):
    return (
        -(p.nu_E + p.mu_E) / c,
        (c + math.sqrt(c * c + 4 * p.D * p.mu_M)) / (2 * p.D),
        (c + math.sqrt(c * c + 4 * p.D * p.mu_F * (1 - theta))) / (2 * p.D),
    )


def _C_E(p: ModelParams, c: float, lam: float) -> float:
    eq = equilibrium(p)
    a = (p.nu_E + p.mu_E) / c
    return eq.E_star + (p.beta * eq.F_star / c) * math.exp(-p.beta * eq.F_star / (c * lam * p.K)) / (lam + a)


def system_super(c: float, p: ModelParams = ModelParams(), theta: float = THETA) -> SystemSuperSolution:
    """Super-solution of the controlled wave system at speed ``c < 0``.

    ``theta`` fixes the product ``alpha C_E / E*``; ``lambda`` is 0.9 times the
    three-way bound, then ``alpha = theta E*/C_E(lambda)``, so the bound on
    ``lambda`` and ``alpha < E*/C_E`` hold together.
    """
    _check_speed(c)
    if not offspring_number(p) > 1:
        raise ValueError("super-solution requires offspring number > 1")
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    eq = equilibrium(p)
    bounds = _lambda_bounds(p, c, theta)
    lam = SAFETY * min(bounds)
    C_E = _C_E(p, c, lam)
    alpha = theta * eq.E_star / C_E
    C_M = (1 - p.r) * p.nu_E * C_E / (-p.D * lam ** 2 + c * lam + p.mu_M)
    C_s_min = C_M * (1 / alpha - 1) / p.gamma
    d_minus = (-c - math.sqrt(c * c + 4 * p.D * p.mu_M)) / (2 * p.D)
    tail = _ETail(p, c, lam)

    # x_E: last point where the E tail touches E*; the tail starts flat and bends down
    probe = np.linspace(0.0, 50.0 / lam, 2001)[1:]
    above = np.flatnonzero(tail(probe) >= eq.E_star)
    x_E = 0.0
    if above.size:
        j = above[-1]
        x_E = brentq(lambda z: tail(np.array([z]))[0] - eq.E_star, probe[j], probe[j + 1], xtol=1e-14)

    ss = SystemSuperSolution(c, p, lam, bounds, alpha, C_E, C_M, x_E, 0.0, C_s_min, CS_MARGIN * C_s_min, SAFETY * lam, d_minus, tail)
    x0 = math.log(C_M / eq.M_star) / lam
    ss.x_M = brentq(lambda z: float(ss.phi_M_tilde(z)) / eq.M_star - 1.0, x0 / 2, x0 + 50.0 / lam, xtol=1e-12, rtol=1e-15)
    return ss


# -- system sub-solution -------------------------------------------------------


@dataclass
class SystemSubSolution:
    c: float
    p: ModelParams
    lambda_F_plus: float
    lambda_F_minus: float
    lambda_M_plus: float
    lambda_M_minus: float
    degenerate: bool
    a: float
    b: tuple
    y_F: float
    C_s: float = 0.0
    eta: float = 1.0

    kind = "sub"
    components = ("E", "F", "M")

    @property
    def kinks(self):
        return {"E": [0.0], "F": [self.y_F], "M": [0.0]}

    @property
    def scales(self):
        eq = equilibrium(self.p)
        return {"E": eq.E_star, "F": eq.F_star, "M": eq.M_star}

    def hat(self, x):
        """The linear-system solution ``(E^, F^, M^)`` on the whole line."""
        x = np.asarray(x, dtype=float)
        eq = equilibrium(self.p)
        b1, b2, b3 = self.b[:3]
        eF = np.exp(self.lambda_F_plus * x)
        E = eq.E_star + b1 * eF
        F = eq.F_star + b2 * eF
        if self.degenerate:
            M = eq.M_star + (self.a * x + b3) * eF
        else:
            M = eq.M_star + self.a * np.exp(self.lambda_M_plus * x) + b3 * eF
        return E, F, M

    def F_hat(self, x):
        return self.hat(x)[1]

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.minimum(x, 0.0)
        E, F, M = self.hat(xc)
        return {
            "E": np.where(x <= 0, E, 0.0),
            "F": np.where(x <= self.y_F, F, 0.0),
            "M": np.where(x <= 0, M, 0.0),
        }

    def control(self, x):
        return _step_control(self.C_s, self.eta)(x)

    def with_control(self, C_s: float, eta: float) -> "SystemSubSolution":
        out = SystemSubSolution(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        out.C_s, out.eta = float(C_s), float(eta)
        return out

    def root_residuals(self):
        p, c = self.p, self.c
        PF = [-1.0, (p.nu_E + p.mu_E) / c - c / p.D, (p.nu_E + p.mu_E + p.mu_F) / p.D]
        PM = [1.0, c / p.D, -p.mu_M / p.D]
        return {
            "lambda_F_plus": _poly_residual(PF, self.lambda_F_plus),
            "lambda_F_minus": _poly_residual(PF, self.lambda_F_minus),
            "lambda_M_plus": _poly_residual(PM, self.lambda_M_plus),
            "lambda_M_minus": _poly_residual(PM, self.lambda_M_minus),
        }

    def default_samples(self, n=N_SAMPLES):
        return np.linspace(-40.0 / self.lambda_F_plus, 10.0, n)


def _quadratic_roots(a, b, c):
    # roots of a x^2 + b x + c, computed without cancellation
    disc = math.sqrt(b * b - 4 * a * c)
    q = -0.5 * (b + math.copysign(disc, b))
    r1, r2 = q / a, c / q
    return max(r1, r2), min(r1, r2)


def system_sub(c: float, p: ModelParams = ModelParams(), degenerate_tol: float = 1e-9) -> SystemSubSolution:
    """Sub-solution built from the linearisation at the equilibrium, cut to zero near the front."""
    _check_speed(c)
    if not offspring_number(p) > 1:
        raise ValueError("sub-solution requires offspring number > 1")
    eq = equilibrium(p)
    k = p.nu_E + p.mu_E
    lF_p, lF_m = _quadratic_roots(-1.0, k / c - c / p.D, (k + p.mu_F) / p.D)
    lM_p, lM_m = _quadratic_roots(1.0, c / p.D, -p.mu_M / p.D)
    degenerate = abs(lF_p - lM_p) < degenerate_tol
    b1 = -eq.E_star
    b2 = b1 * eq.F_star / eq.E_star * (1 - c * lF_p / k)
    if degenerate:
        lam = lF_p
        b3 = -eq.M_star
        # generalized eigenvector: (A - lam I) V = U gives a (c + 2 D lam) = -(1 - r) nu_E b1
        a = -(1 - p.r) * p.nu_E * b1 / (c + 2 * p.D * lam)
        b = (b1, b2, b3, lam * b2, lam * b3 + a)
    else:
        PM = lF_p ** 2 + c / p.D * lF_p - p.mu_M / p.D
        b3 = b1 * eq.M_star / eq.E_star * p.mu_M / (-p.D * PM)
        a = -eq.M_star - b3
        b = (b1, b2, b3, lF_p * b2, lF_p * b3)

    # F^ rises from F^(0) < 0 to F*: bracket the sign change, then bisect
    sub = SystemSubSolution(c, p, lF_p, lF_m, lM_p, lM_m, degenerate, a, b, 0.0)
    F0 = float(sub.F_hat(0.0))
    if not F0 < 0:
        raise RuntimeError("F^(0) must be negative")
    lo = -1.0 / lF_p
    while sub.F_hat(lo) <= 0:
        lo *= 2
    sub.y_F = brentq(lambda z: float(sub.F_hat(z)), lo, 0.0, xtol=1e-15, rtol=1e-15)
    return sub


# -- finite-difference residuals -----------------------------------------------


def _stencil_derivatives(f: Callable, x: np.ndarray, h: float, kinks, adjacent: float):
    """Values, first and second derivatives; one-sided stencils near kinks.

    Returns ``(f0, d1, d2, near)`` where ``near`` marks samples within
    ``adjacent`` of a kink.
    """
    x = np.asarray(x, dtype=float)
    ks = np.asarray(sorted(kinks), dtype=float) if len(kinks) else np.empty(0)
    if ks.size:
        dist = x[:, None] - ks[None, :]
        j = np.argmin(np.abs(dist), axis=1)
        dk = dist[np.arange(x.size), j]
    else:
        dk = np.full(x.size, np.inf)
    offsets = np.arange(-3, 4)
    vals = f(x[:, None] + offsets[None, :] * h)
    c = {o: vals[:, o + 3] for o in offsets}
    d1 = (-c[2] + 8 * c[1] - 8 * c[-1] + c[-2]) / (12 * h)
    d2 = (-c[2] + 16 * c[1] - 30 * c[0] + 16 * c[-1] - c[-2]) / (12 * h * h)
    fwd = (np.abs(dk) < 2 * h) & (dk >= 0)
    bwd = (np.abs(dk) < 2 * h) & (dk < 0)
    # second-order one-sided, pointing away from the kink
    d1 = np.where(fwd, (-3 * c[0] + 4 * c[1] - c[2]) / (2 * h), d1)
    d2 = np.where(fwd, (2 * c[0] - 5 * c[1] + 4 * c[2] - c[3]) / (h * h), d2)
    d1 = np.where(bwd, (3 * c[0] - 4 * c[-1] + c[-2]) / (2 * h), d1)
    d2 = np.where(bwd, (2 * c[0] - 5 * c[-1] + 4 * c[-2] - c[-3]) / (h * h), d2)
    return c[0], d1, d2, np.abs(dk) <= adjacent


def _one_sided_slope(f, x0, h, side):
    s = 1.0 if side > 0 else -1.0
    v = f(np.array([x0, x0 + s * h, x0 + 2 * s * h]))
    return s * (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)


FD_STEP = 1e-2  # in units of the profile's decay length; balances truncation and roundoff in f''


def _fd_step(cons) -> float:
    if isinstance(cons, SystemSuperSolution):
        # the E tail starts with decay rate |beta F*/(c K) + (nu_E + mu_E)/c|, much faster than lambda
        p, eq = cons.p, equilibrium(cons.p)
        rate_E = abs(p.beta * eq.F_star / (cons.c * p.K) + (p.nu_E + p.mu_E) / cons.c)
        return FD_STEP / max(cons.lam, rate_E)
    if isinstance(cons, SystemSubSolution):
        return FD_STEP / cons.lambda_F_plus
    if isinstance(cons, ScalarSuperSolution):
        return FD_STEP / abs(cons.r_alpha)
    return FD_STEP / cons.tail_rate


def _residuals(cons, x, h):
    """Scaled residuals (LHS - RHS) of each wave equation at samples ``x``."""
    c = cons.c
    spacing = float(np.min(np.diff(np.sort(x)))) if x.size > 1 else h
    adjacent = max(2 * spacing, 2 * h)
    kinks = cons.kinks
    phi = cons.control(x)
    out = {}
    if isinstance(cons, (ScalarSuperSolution, ScalarSubSolution)):
        s = cons.s
        f = lambda z: cons.evaluate(z)["u"]
        u, d1, d2, near = _stencil_derivatives(f, x, h, kinks["u"], adjacent)
        g = s.beta * u / (s.beta * u / s.K + s.delta)
        frac = mating_fraction(u, phi, 1.0)
        res = -c * d1 - d2 - frac * g + s.mu * u
        out["u"] = (res / cons.scales["u"], near)
        return out
    p = cons.p
    prof = cons.evaluate(x)
    E, F, M = prof["E"], prof["F"], prof["M"]
    derivs = {}
    for comp in cons.components:
        f = lambda z, comp=comp: cons.evaluate(z)[comp]
        derivs[comp] = _stencil_derivatives(f, x, h, kinks[comp], adjacent)
    _, dE, _, nearE = derivs["E"]
    _, dF, ddF, nearF = derivs["F"]
    _, dM, ddM, nearM = derivs["M"]
    frac = mating_fraction(M, phi, p.gamma)
    out["E"] = ((-c * dE - p.beta * F * (1 - E / p.K) + (p.nu_E + p.mu_E) * E) / cons.scales["E"], nearE)
    out["F"] = ((-c * dF - p.D * ddF - p.r * p.nu_E * E * frac + p.mu_F * F) / cons.scales["F"], nearF)
    out["M"] = ((-c * dM - p.D * ddM - (1 - p.r) * p.nu_E * E + p.mu_M * M) / cons.scales["M"], nearM)
    return out


@dataclass
class EquationCheck:
    name: str
    worst: float
    location: float
    violations: list
    artifacts: list
    passed: bool


@dataclass
class JumpCheck:
    component: str
    x: float
    left_slope: float
    right_slope: float
    passed: bool


@dataclass
class VerificationReport:
    kind: str
    tol: float
    equations: list
    jumps: list
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.equations) and all(j.passed for j in self.jumps) and all(
            v for k, v in self.extra.items() if isinstance(v, bool)
        )

    def to_text(self) -> str:
        lines = [f"{self.kind}-solution check (tol={self.tol:g}): {'PASS' if self.passed else 'FAIL'}"]
        for e in self.equations:
            lines.append(
                f"  eq {e.name}: worst={e.worst:+.3e} at x={e.location:.6g} "
                f"violations={len(e.violations)} kink_artifacts={len(e.artifacts)} "
                f"{'PASS' if e.passed else 'FAIL'}"
            )
            if e.violations:
                lines.append(f"    first violation at x={e.violations[0]:.6g}")
        for j in self.jumps:
            lines.append(
                f"  kink {j.component} at x={j.x:.6g}: slope {j.left_slope:+.6g} (left) vs "
                f"{j.right_slope:+.6g} (right) {'PASS' if j.passed else 'FAIL'}"
            )
        for k, v in self.extra.items():
            lines.append(f"  {k}: {v}")
        return "\n".join(lines)


def _verify(cons, samples, tol, jump_tol, sign):
    # sign = +1: residual >= -tol (super); sign = -1: residual <= tol (sub)
    x = cons.default_samples() if samples is None else np.asarray(samples, dtype=float)
    h = _fd_step(cons)
    all_kinks = [k for ks in cons.kinks.values() for k in ks]
    keep = np.ones(x.size, dtype=bool)
    for k in all_kinks:
        keep &= np.abs(x - k) > 1e-12 * max(1.0, abs(k))
    x = x[keep]
    equations = []
    for name, (res, near) in _residuals(cons, x, h).items():
        signed = sign * res
        bad = signed < -tol
        k = int(np.argmin(signed)) if signed.size else 0
        equations.append(
            EquationCheck(
                name,
                float(res[k]) if res.size else 0.0,
                float(x[k]) if x.size else float("nan"),
                x[bad & ~near].tolist(),
                x[bad & near].tolist(),
                not (bad & ~near).any(),
            )
        )
    jumps = []
    for comp, ks in cons.kinks.items():
        f = lambda z, comp=comp: cons.evaluate(z)[comp]
        scale = cons.scales[comp]
        for k in ks:
            left = _one_sided_slope(f, k, h, -1)
            right = _one_sided_slope(f, k, h, +1)
            ok = sign * (left - right) / scale >= -jump_tol
            jumps.append(JumpCheck(comp, float(k), float(left), float(right), bool(ok)))
    return VerificationReport(cons.kind, tol, equations, jumps)


def verify_supersolution(ss, samples=None, tol: float = 1e-8, jump_tol: float = 1e-6) -> VerificationReport:
    """Check ``LHS - RHS >= -tol`` for every wave equation and ``left slope >= right slope`` at kinks."""
    if ss.kind != "super":
        raise TypeError("expected a super-solution")
    rep = _verify(ss, samples, tol, jump_tol, +1)
    if isinstance(ss, SystemSuperSolution):
        x = ss.default_samples() if samples is None else np.asarray(samples, dtype=float)
        eq = equilibrium(ss.p)
        prof = ss.evaluate(x[x >= 0])
        xp = x[x >= 0]
        rel = 1e-12
        rep.extra["E below min(E*, C_E e^-lam x)"] = bool(
            np.all(prof["E"] <= np.minimum(eq.E_star, ss.C_E * np.exp(-ss.lam * xp)) * (1 + rel))
        )
        rep.extra["M below min(M*, C_M e^-lam x)"] = bool(
            np.all(prof["M"] <= np.minimum(eq.M_star, ss.C_M * np.exp(-ss.lam * xp)) * (1 + rel))
        )
    return rep


def verify_subsolution(ss, samples=None, tol: float = 1e-8, jump_tol: float = 1e-6, c: Optional[float] = None) -> VerificationReport:
    """Mirror of :func:`verify_supersolution`: ``LHS - RHS <= tol``, ``left slope <= right slope``.

    The scalar sub-solution does not depend on the speed; pass ``c`` for it.
    """
    if ss.kind != "sub":
        raise TypeError("expected a sub-solution")
    if isinstance(ss, ScalarSubSolution):
        if c is None and ss.c is None:
            raise ValueError("scalar sub-solution needs a speed c to be verified")
        if c is not None:
            ss = ss.with_speed(c)
    rep = _verify(ss, samples, tol, jump_tol, -1)
    x = ss.default_samples() if samples is None else np.asarray(samples, dtype=float)
    prof = ss.evaluate(x)
    rep.extra["nonnegative"] = bool(all(np.all(v >= -1e-12 * ss.scales[k]) for k, v in prof.items()))
    return rep


# -- orderings -----------------------------------------------------------------


@dataclass
class OrderingReport:
    worst: float
    t: float
    x: float
    component: str
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol

    def to_text(self) -> str:
        return (
            f"ordering check (tol={self.tol:g}): worst relative excess {self.worst:.3e} "
            f"in {self.component} at t={self.t:.6g}, x={self.x:.6g}: {'PASS' if self.passed else 'FAIL'}"
        )


def verify_profile_ordering(sub, sup, samples=None, tol: float = 0.0) -> OrderingReport:
    """``sub <= sup`` component-wise on the sample points."""
    if samples is None:
        lo = min(sub.default_samples()[0], sup.default_samples()[0])
        hi = max(sub.default_samples()[-1], sup.default_samples()[-1])
        samples = np.linspace(lo, hi, N_SAMPLES)
    x = np.asarray(samples, dtype=float)
    a, b = sub.evaluate(x), sup.evaluate(x)
    worst, where, comp = -np.inf, float("nan"), ""
    for k in a:
        ex = (a[k] - b[k]) / sub.scales[k]
        i = int(np.argmax(ex))
        if ex[i] > worst:
            worst, where, comp = float(ex[i]), float(x[i]), k
    return OrderingReport(worst, 0.0, where, comp, tol)


def verify_ordering(lower: Trajectory, upper: Trajectory, tol: float = 1e-6, components=("E", "F", "M")) -> OrderingReport:
    """Check ``lower <= upper`` at every snapshot, relative to the largest density of each component."""
    if lower.grid != upper.grid or not np.array_equal(lower.times, upper.times):
        raise ValueError("trajectories must share grid and snapshot times")
    x = lower.grid.x
    worst, t_w, x_w, comp = -np.inf, float("nan"), float("nan"), ""
    for name in components:
        a, b = getattr(lower, name), getattr(upper, name)
        scale = max(float(np.abs(a).max()), float(np.abs(b).max()), 1e-300)
        ex = (a - b) / scale
        k, i = np.unravel_index(int(np.argmax(ex)), ex.shape)
        if ex[k, i] > worst:
            worst, t_w, x_w, comp = float(ex[k, i]), float(lower.times[k]), float(x[i]), name
    return OrderingReport(max(worst, 0.0), t_w, x_w, comp, tol)


# -- sterile-male lower bound --------------------------------------------------


@dataclass
class MsBoundReport:
    tol: float
    edge_layer: float
    worst: float
    first_violation: Optional[tuple]
    worst_interior: float
    first_interior_violation: Optional[tuple]

    @property
    def passed(self) -> bool:
        return self.first_violation is None

    @property
    def interior_passed(self) -> bool:
        return self.first_interior_violation is None

    def to_text(self) -> str:
        def fmt(v):
            return "none" if v is None else f"t={v[0]:.6g}, x={v[1]:.6g}"

        return (
            f"sterile lower bound (tol={self.tol:g}): worst relative margin {self.worst:+.3e}, "
            f"first violation {fmt(self.first_violation)}: {'PASS' if self.passed else 'FAIL'}\n"
            f"  beyond {self.edge_layer:g} km of the release edge: worst {self.worst_interior:+.3e}, "
            f"first violation {fmt(self.first_interior_violation)}: {'PASS' if self.interior_passed else 'FAIL'}"
        )


def verify_ms_bound(
    p: ModelParams,
    C_s: float,
    eta: float,
    c: float,
    A: float,
    grid: Grid = Grid(-100.0, 300.0, 1601),
    cfg: SchemeConfig = SchemeConfig(t_end=100.0, snapshot_every=5.0),
    init_Ms=None,
    tol: float = 1e-8,
    edge_layer: float = 5.0,
) -> MsBoundReport:
    """Integrate the sterile equation alone and compare with ``phi(x - ct) = C_s e^{-eta(x-ct)} 1_{x-ct>=0}``.

    The source is ``A e^{-eta (x-ct)}`` on ``x - ct > 0``; ``eta = 0`` is
    allowed here. ``init_Ms`` defaults to ``max(phi, S)`` with ``S`` the
    travelling profile of the sterile equation, so that a sufficient amplitude
    holds the bound from t = 0 on. Margins are relative
    to ``C_s``. The second verdict ignores points within ``edge_layer`` km of
    the release edge and of the right end of the grid.
    """
    if not eta >= 0 or not A >= 0 or not C_s > 0 or not c <= 0:
        raise ValueError("need C_s > 0, eta >= 0, A >= 0, c <= 0")
    x = grid.x
    phi = _step_control(C_s, eta)
    if init_Ms is None:
        Ms = phi(x)
        if eta > 0:
            Ms = np.maximum(Ms, ms_stationary_profile(A, eta, p, c)(x))
    else:
        Ms = np.array(init_Ms, dtype=float)
    if not np.all(Ms >= phi(x) - tol * C_s):
        raise ValueError("initial sterile density must dominate phi")
    n_snap, sub, dt = _snapshot_plan(cfg, time_step(grid, p.D, p.mu_s, cfg))
    solver = FactoredTridiagonal(*neumann_diffusion_matrix(grid.n_cells, grid.dx, p.D * dt))

    def source(t):
        z = x - c * t
        return np.where(z > 0, A * np.exp(-eta * np.maximum(z, 0.0)), 0.0)

    worst, worst_in = np.inf, np.inf
    first = first_in = None

    def check(t, Ms):
        nonlocal worst, worst_in, first, first_in
        z = x - c * t
        margin = (Ms - phi(z)) / C_s
        interior = (np.abs(z) > edge_layer) & (x < grid.x_max - edge_layer)
        worst = min(worst, float(margin.min()))
        worst_in = min(worst_in, float(margin[interior].min()))
        bad = np.flatnonzero(margin < -tol)
        if bad.size and first is None:
            first = (t, float(x[bad[0]]))
        bad = np.flatnonzero((margin < -tol) & interior)
        if bad.size and first_in is None:
            first_in = (t, float(x[bad[0]]))

    t = 0.0
    check(t, Ms)
    for k in range(1, n_snap + 1):
        for _ in range(sub):
            Ms = solver.solve(Ms + dt * (source(t) - p.mu_s * Ms))
            t += dt
        t = k * cfg.snapshot_every
        check(t, Ms)
    return MsBoundReport(tol, edge_layer, worst, first, worst_in, first_in)


# -- export --------------------------------------------------------------------


def write_profiles_csv(path, cons, samples=None) -> Path:
    """Write ``x,phiE,phiF,phiM,phi_control`` for a system construction."""
    x = cons.default_samples() if samples is None else np.asarray(samples, dtype=float)
    prof = cons.evaluate(x)
    ctrl = cons.control(x)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "phiE", "phiF", "phiM", "phi_control"])
        for row in zip(x, prof["E"], prof["F"], prof["M"], ctrl):
            w.writerow([f"{float(v):.17g}" for v in row])
    return path
