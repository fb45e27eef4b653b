"""Parameters, reaction terms and equilibria of the mosquito SIT model.

Units are days and kilometres throughout.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

MODEL_FIELDS = ("beta", "K", "nu_E", "mu_E", "mu_F", "mu_M", "mu_s", "gamma", "r", "D")


@dataclass(frozen=True)
class ModelParams:
    """Constants of the four-compartment model (aquatic, females, males, sterile males).

    Defaults are the *Aedes albopictus* values used for the numerical illustrations.
    """

    beta: float = 10.0
    K: float = 200.0
    nu_E: float = 0.08
    mu_E: float = 0.05
    mu_F: float = 0.1
    mu_M: float = 0.14
    mu_s: float = 0.14
    gamma: float = 1.0
    r: float = 0.5
    D: float = 0.5

    def __post_init__(self):
        for name in ("nu_E", "mu_E", "mu_F", "mu_M", "mu_s", "gamma", "K", "D"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        # beta = 0 is allowed: it is the trivial zero-offspring case
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta!r}")
        if not 0 < self.r < 1:
            raise ValueError(f"r must lie in (0, 1), got {self.r!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        unknown = set(d) - set(MODEL_FIELDS)
        if unknown:
            raise ValueError(f"unknown model parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ScalarParams:
    """Constants of the reduced one-equation model.

    The defaults (10, 2, 1, 200) are a local choice; no reference values exist.
    """

    beta: float = 10.0
    delta: float = 2.0
    mu: float = 1.0
    K: float = 200.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be strictly positive")

    @property
    def growth_margin(self) -> float:
        return self.beta - self.mu * self.delta


@dataclass(frozen=True)
class Equilibrium:
    E_star: float
    F_star: float
    M_star: float

    def as_array(self) -> np.ndarray:
        return np.array([self.E_star, self.F_star, self.M_star])


def offspring_number(p: ModelParams) -> float:
    """Basic offspring number ``beta r nu_E / (mu_F (nu_E + mu_E))``."""
    return p.beta * p.r * p.nu_E / (p.mu_F * (p.nu_E + p.mu_E))


def equilibrium(p: ModelParams) -> Equilibrium:
    """Positive steady state of the uncontrolled system; requires R > 1."""
    R = offspring_number(p)
    if not R > 1:
        raise ValueError(f"offspring number {R:.6g} <= 1: extinction is the only equilibrium")
    gain = p.beta * p.r * p.nu_E - p.mu_F * (p.nu_E + p.mu_E)
    E = p.K * gain / (p.beta * p.r * p.nu_E)
    F = p.K * gain / (p.beta * p.mu_F)
    M = p.K * (1 - p.r) / p.r * gain / (p.beta * p.mu_M)
    return Equilibrium(E, F, M)


def mating_fraction(M, Ms, gamma):
    """``M / (M + gamma Ms)``, taken as 0 wherever M = 0."""
    M = np.asarray(M, dtype=float)
    Ms = np.asarray(Ms, dtype=float)
    denom = M + gamma * Ms
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(M > 0, M / np.where(denom > 0, denom, 1.0), 0.0)
    return out if out.ndim else float(out)


def reaction(E, F, M, Ms, p: ModelParams):
    """Reaction part of the E, F, M equations. Works on scalars or arrays."""
    dE = p.beta * F * (1 - E / p.K) - (p.nu_E + p.mu_E) * E
    dF = p.r * p.nu_E * E * mating_fraction(M, Ms, p.gamma) - p.mu_F * F
    dM = (1 - p.r) * p.nu_E * E - p.mu_M * M
    return dE, dF, dM


def reaction_jacobian_bound(p: ModelParams, F_max: float, M_max: float = 0.0) -> float:
    """Row-sum bound on the reaction Jacobian over {0<=E<=K, 0<=F<=F_max, ...}.

    The mating fraction enters through its range [0, 1] rather than its
    derivative in M, which is unbounded at M = 0.
    """
    row_E = p.beta * F_max / p.K + (p.nu_E + p.mu_E) + p.beta
    row_F = p.r * p.nu_E + p.mu_F
    row_M = (1 - p.r) * p.nu_E + p.mu_M
    return max(row_E, row_F, row_M, p.mu_s)


def scalar_equilibrium(s: ScalarParams) -> float:
    if not s.growth_margin > 0:
        raise ValueError("scalar model needs beta - mu*delta > 0")
    return s.K * (s.beta - s.mu * s.delta) / (s.beta * s.mu)


def scalar_growth(u, s: ScalarParams):
    """Uncontrolled scalar reaction ``beta u / (beta u / K + delta) - mu u``."""
    u = np.asarray(u, dtype=float)
    out = s.beta * u / (s.beta * u / s.K + s.delta) - s.mu * u
    return out if out.ndim else float(out)


def scalar_growth_integral(a, b, s: ScalarParams) -> float:
    """Closed-form integral of :func:`scalar_growth` over [a, b]."""

    def G(u):
        return s.K * u - s.K ** 2 * s.delta / s.beta * np.log(s.beta * u / s.K + s.delta) - s.mu * u ** 2 / 2

    return float(G(b) - G(a))


def scalar_reaction(u, lam, s: ScalarParams):
    """Controlled scalar reaction; the fraction ``u/(u+lam)`` is 0 at u = 0."""
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(u > 0, u / np.where(u + lam > 0, u + lam, 1.0), 0.0)
    out = frac * s.beta * u / (s.beta * u / s.K + s.delta) - s.mu * u
    return out if out.ndim else float(out)
