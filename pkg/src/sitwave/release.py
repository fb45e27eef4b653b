"""Moving exponential release profiles for sterile males."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams

MODES = ("moving_exponential", "off")


@dataclass(frozen=True)
class ReleaseProfile:
    """Release rate ``A exp(-eta (x - c t))`` on ``x - c t > 0`` and zero elsewhere.

    ``c <= 0`` moves the release zone to the left (towards the wild population).
    """

    A: float = 600.0
    eta: float = 0.2
    c: float = 0.0
    mode: str = "moving_exponential"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"release mode must be one of {MODES}, got {self.mode!r}")
        if not self.A >= 0:
            raise ValueError("release amplitude A must be >= 0")
        if not self.eta > 0:
            raise ValueError("release decay rate eta must be > 0")
        if not self.c <= 0:
            raise ValueError("release speed c must be <= 0")

    @property
    def active(self) -> bool:
        return self.mode != "off" and self.A > 0

    @classmethod
    def off(cls) -> "ReleaseProfile":
        return cls(A=0.0, mode="off")

    @classmethod
    def from_dict(cls, d: dict) -> "ReleaseProfile":
        kw = {k: d[k] for k in ("A", "eta", "c") if k in d}
        kw = {k: float(v) for k, v in kw.items()}
        if "mode" in d:
            kw["mode"] = str(d["mode"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {"A": self.A, "eta": self.eta, "c": self.c, "mode": self.mode}


def lambda_at(pr: ReleaseProfile, t, x):
    """Release rate at time ``t`` and position(s) ``x``."""
    x = np.asarray(x, dtype=float)
    if pr.mode == "off":
        out = np.zeros_like(x)
    else:
        z = x - pr.c * t
        # the boundary z = 0 belongs to the zero branch
        out = np.where(z > 0, pr.A * np.exp(-pr.eta * np.maximum(z, 0.0)), 0.0)
    return out if out.ndim else float(out)


def release_mass(pr: ReleaseProfile) -> float:
    """Sterile males released per unit time, ``A / eta``."""
    if pr.mode == "off":
        return 0.0
    return pr.A / pr.eta


def ms_lower_bound_amplitude(C_s: float, eta: float, p: ModelParams, c: float) -> float:
    """Amplitude ``C_s (D eta^2 + |c| eta + mu_s)``.

    This keeps ``C_s exp(-eta(x - ct))`` below the sterile density away from the
    release edge only; near the edge see :func:`ms_edge_amplitude`.
    """
    return C_s * (p.D * eta ** 2 + abs(c) * eta + p.mu_s)


def _frame_roots(p: ModelParams, c: float) -> tuple[float, float]:
    # roots of D k^2 + c k - mu_s = 0
    disc = np.sqrt(c * c + 4 * p.D * p.mu_s)
    return (-c + disc) / (2 * p.D), (-c - disc) / (2 * p.D)


def ms_stationary_profile(A: float, eta: float, p: ModelParams, c: float):
    """Travelling sterile-male profile ``S(z)`` forced by ``A exp(-eta z) 1_{z>0}``.

    Solves ``-c S' - D S'' + mu_s S = A exp(-eta z) 1_{z>0}`` on the line,
    bounded at both ends. Returns a vectorised callable of ``z = x - c t``.
    """
    k_plus, k_minus = _frame_roots(p, c)
    if np.isclose(eta, -k_minus, rtol=1e-12, atol=0.0):
        raise ValueError("eta coincides with the decay rate of the homogeneous tail")
    B = A / (p.mu_s + c * eta - p.D * eta ** 2)
    Q = -B * (eta + k_plus) / (k_plus - k_minus)
    P = B + Q

    def S(z):
        z = np.asarray(z, dtype=float)
        left = P * np.exp(k_plus * np.minimum(z, 0.0))
        right = B * np.exp(-eta * np.maximum(z, 0.0)) + Q * np.exp(k_minus * np.maximum(z, 0.0))
        out = np.where(z > 0, right, left)
        return out if out.ndim else float(out)

    return S


def ms_edge_amplitude(C_s: float, eta: float, p: ModelParams, c: float) -> float:
    """Smallest A whose stationary sterile profile dominates ``C_s exp(-eta z)`` for all z > 0.

    The stationary profile divided by ``exp(-eta z)`` is monotone on z > 0, so
    the binding point is the release edge, where ``S(0) = A / (D (eta + k+) (k+ - k-))``.
    """
    k_plus, k_minus = _frame_roots(p, c)
    return C_s * p.D * (eta + k_plus) * (k_plus - k_minus)


def ms_sufficient_amplitude(C_s: float, eta: float, p: ModelParams, c: float, margin: float = 1.1) -> float:
    """Amplitude used by the constructions: the edge bound with a safety margin."""
    return margin * max(ms_edge_amplitude(C_s, eta, p, c), ms_lower_bound_amplitude(C_s, eta, p, c))
