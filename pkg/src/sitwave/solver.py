"""Semi-implicit finite differences for the SIT system on a truncated line.

Diffusion is backward Euler with the second-order central stencil and
zero-flux ends; reaction and release terms are explicit at the old time level.
The aquatic compartment E does not diffuse and gets the explicit update only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .model import ModelParams, ScalarParams, equilibrium, offspring_number, reaction, reaction_jacobian_bound, scalar_reaction
from .release import ReleaseProfile, lambda_at
from .tridiag import FactoredTridiagonal, ZeroPivotError, neumann_diffusion_matrix

log = logging.getLogger(__name__)

COMPONENTS = ("E", "F", "M", "Ms")


class SolverError(RuntimeError):
    """Numerical failure during time stepping; ``t`` is the failing time."""

    def __init__(self, msg, t=None):
        super().__init__(msg if t is None else f"{msg} (t={t:.6g})")
        self.t = t


@dataclass(frozen=True)
class Grid:
    x_min: float = -100.0
    x_max: float = 300.0
    n_cells: int = 1601

    def __post_init__(self):
        if self.n_cells < 16:
            raise ValueError("grid needs at least 16 nodes")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @classmethod
    def from_spacing(cls, x_min: float, x_max: float, dx: float) -> "Grid":
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(x_min, x_max, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_cells - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_cells)


@dataclass
class StateField:
    t: float
    E: np.ndarray
    F: np.ndarray
    M: np.ndarray
    Ms: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "StateField":
        z = np.zeros(grid.n_cells)
        return cls(t, z.copy(), z.copy(), z.copy(), z.copy())

    @classmethod
    def step_profile(cls, grid: Grid, p: ModelParams, x0: float = 0.0, Ms=None) -> "StateField":
        """Equilibrium on ``x < x0`` and zero elsewhere."""
        eq = equilibrium(p)
        ind = (grid.x < x0).astype(float)
        Ms = np.zeros(grid.n_cells) if Ms is None else np.asarray(Ms, dtype=float).copy()
        return cls(0.0, eq.E_star * ind, eq.F_star * ind, eq.M_star * ind, Ms)

    def copy(self) -> "StateField":
        return StateField(self.t, self.E.copy(), self.F.copy(), self.M.copy(), self.Ms.copy())

    def stack(self) -> np.ndarray:
        return np.vstack([self.E, self.F, self.M, self.Ms])


@dataclass(frozen=True)
class SchemeConfig:
    dt_safety: float = 0.9
    cfl_reaction_cap: float = 1.0
    boundary: str = "neumann_zero_flux"
    t_end: float = 400.0
    snapshot_every: float = 5.0
    clip_tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")
        if not self.cfl_reaction_cap > 0:
            raise ValueError("cfl_reaction_cap must be positive")
        if self.boundary != "neumann_zero_flux":
            raise ValueError("only 'neumann_zero_flux' boundaries are supported")
        if not self.t_end > 0 or not self.snapshot_every > 0:
            raise ValueError("t_end and snapshot_every must be positive")

    def replace(self, **kw) -> "SchemeConfig":
        return replace(self, **kw)


def time_step(grid: Grid, diffusivity: float, L_reac: float, cfg: SchemeConfig) -> float:
    """``dt_safety * min(dx^2 / (2 D), cap / L_reac)``."""
    cands = [grid.dx ** 2 / (2 * diffusivity)]
    if L_reac > 0:
        cands.append(cfg.cfl_reaction_cap / L_reac)
    return cfg.dt_safety * min(cands)


def stable_dt(state: StateField, grid: Grid, p: ModelParams, cfg: SchemeConfig, with_reaction: bool = True) -> float:
    L = _system_jacobian_bound(p, state) if with_reaction else 0.0
    return time_step(grid, p.D, L, cfg)


def simulate_pair(lower: StateField, upper: StateField, grid, p, pr_lower, pr_upper, cfg):
    """Two runs on a shared time step, so that their snapshots are directly comparable."""
    dt = min(stable_dt(lower, grid, p, cfg), stable_dt(upper, grid, p, cfg))
    return simulate(lower, grid, p, pr_lower, cfg, dt_max=dt), simulate(upper, grid, p, pr_upper, cfg, dt_max=dt)


def _system_jacobian_bound(p: ModelParams, state: StateField) -> float:
    F_max = float(state.F.max(initial=0.0))
    if offspring_number(p) > 1:
        F_max = max(F_max, equilibrium(p).F_star)
    return reaction_jacobian_bound(p, F_max)


@dataclass
class Diagnostics:
    t: list = field(default_factory=list)
    clipped_mass: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    max_E_over_K: float = 0.0
    max_dt: float = 0.0

    def as_arrays(self):
        return np.asarray(self.t), np.asarray(self.clipped_mass), np.asarray(self.dt)


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    E: np.ndarray
    F: np.ndarray
    M: np.ndarray
    Ms: np.ndarray
    diagnostics: Diagnostics

    def state(self, k: int) -> StateField:
        return StateField(float(self.times[k]), self.E[k], self.F[k], self.M[k], self.Ms[k])

    @property
    def final(self) -> StateField:
        return self.state(-1)

    def __len__(self):
        return len(self.times)


class _Stepper:
    """Holds the factored diffusion matrix so repeated steps cost one banded solve."""

    def __init__(self, grid, p, pr, dt, with_reaction=True, sterile_field=None, clip_tol=1e-8):
        self.grid, self.p, self.pr, self.dt = grid, p, pr, dt
        self.x = grid.x
        self.with_reaction = with_reaction
        self.sterile_field = sterile_field
        self.clip_tol = clip_tol
        self.solver = FactoredTridiagonal(*neumann_diffusion_matrix(grid.n_cells, grid.dx, p.D * dt))

    def __call__(self, s: StateField):
        p, dt = self.p, self.dt
        Ms_old = s.Ms if self.sterile_field is None else self.sterile_field(s.t, self.x)
        if self.with_reaction:
            dE, dF, dM = reaction(s.E, s.F, s.M, Ms_old, p)
            src = lambda_at(self.pr, s.t, self.x) if self.pr.active else 0.0
            dMs = src - p.mu_s * s.Ms
        else:
            dE = dF = dM = dMs = 0.0
        rhs = np.column_stack([s.F + dt * dF, s.M + dt * dM, s.Ms + dt * dMs])
        try:
            new = self.solver.solve(rhs)
        except ZeroPivotError as exc:  # pragma: no cover - M-matrix, cannot happen
            raise SolverError(f"internal error in diffusion solve: {exc}", s.t) from exc
        E = s.E + dt * dE
        out = [E, new[:, 0], new[:, 1], new[:, 2]]
        clipped = 0.0
        for k, arr in enumerate(out):
            neg = arr < 0
            if neg.any():
                worst = -arr[neg].min()
                scale = np.abs(arr).max()
                if worst > self.clip_tol * scale:
                    raise SolverError(
                        f"negative {COMPONENTS[k]} of size {worst:.3g} exceeds clip tolerance; dt too large",
                        s.t,
                    )
                clipped += -arr[neg].sum() * self.grid.dx
                arr[neg] = 0.0
        t_new = s.t + dt
        if self.sterile_field is not None:
            out[3] = np.asarray(self.sterile_field(t_new, self.x), dtype=float)
        return StateField(t_new, *out), clipped


def step(state: StateField, grid: Grid, p: ModelParams, pr: ReleaseProfile, cfg: SchemeConfig, dt: Optional[float] = None):
    """Advance one time step. Returns ``(new_state, clipped_mass)``."""
    if dt is None:
        dt = time_step(grid, p.D, _system_jacobian_bound(p, state), cfg)
    return _Stepper(grid, p, pr, dt, clip_tol=cfg.clip_tol)(state)


def _snapshot_plan(cfg: SchemeConfig, dt_max: float):
    n_snap = int(math.floor(cfg.t_end / cfg.snapshot_every + 1e-9))
    sub = max(1, math.ceil(cfg.snapshot_every / dt_max - 1e-12))
    return n_snap, sub, cfg.snapshot_every / sub


def simulate(
    init: StateField,
    grid: Grid,
    p: ModelParams,
    pr: ReleaseProfile,
    cfg: SchemeConfig,
    *,
    with_reaction: bool = True,
    sterile_field: Optional[Callable] = None,
    dt_max: Optional[float] = None,
) -> Trajectory:
    """Integrate from ``init`` to ``cfg.t_end`` and record snapshots.

    ``sterile_field(t, x)`` replaces the sterile-male equation by a prescribed
    density (the travelling-wave setting). With ``with_reaction=False`` only
    diffusion acts. ``dt_max`` overrides the stability bound (it is never raised).
    """
    bound = stable_dt(init, grid, p, cfg, with_reaction)
    dt_max = bound if dt_max is None else min(bound, float(dt_max))
    n_snap, sub, dt = _snapshot_plan(cfg, dt_max)
    stepper = _Stepper(grid, p, pr, dt, with_reaction, sterile_field, cfg.clip_tol)
    diag = Diagnostics(max_dt=dt)
    check_K = bool(np.all(init.E <= p.K))

    s = init.copy()
    if sterile_field is not None:
        s.Ms = np.asarray(sterile_field(s.t, grid.x), dtype=float)
    snaps = [s]
    diag.t.append(s.t)
    diag.clipped_mass.append(0.0)
    diag.dt.append(dt)
    t0 = s.t
    for k in range(1, n_snap + 1):
        clipped = 0.0
        for _ in range(sub):
            s, c = stepper(s)
            clipped += c
        s.t = t0 + k * cfg.snapshot_every  # avoid drift from repeated addition
        if check_K:
            ratio = float(s.E.max()) / p.K
            diag.max_E_over_K = max(diag.max_E_over_K, ratio)
            if ratio > 1 + 1e-8:
                raise SolverError(f"E exceeded K by a relative {ratio - 1:.3g}", s.t)
        snaps.append(s)
        diag.t.append(s.t)
        diag.clipped_mass.append(clipped)
        diag.dt.append(dt)
    return Trajectory(
        grid,
        np.array([q.t for q in snaps]),
        np.array([q.E for q in snaps]),
        np.array([q.F for q in snaps]),
        np.array([q.M for q in snaps]),
        np.array([q.Ms for q in snaps]),
        diag,
    )


@dataclass
class ScalarTrajectory:
    grid: Grid
    times: np.ndarray
    u: np.ndarray
    diagnostics: Diagnostics


def simulate_scalar(
    init,
    grid: Grid,
    s: ScalarParams,
    pr: ReleaseProfile,
    cfg: SchemeConfig,
) -> ScalarTrajectory:
    """Reduced model ``u_t - u_xx = u/(u+Lambda) * beta u/(beta u/K + delta) - mu u``.

    The control ``Lambda(t, x)`` enters the reaction directly.
    """
    u = np.array(init, dtype=float)
    if u.shape != (grid.n_cells,):
        raise ValueError("init must have one value per grid node")
    L = s.beta / s.delta + s.mu
    n_snap, sub, dt = _snapshot_plan(cfg, time_step(grid, 1.0, L, cfg))
    solver = FactoredTridiagonal(*neumann_diffusion_matrix(grid.n_cells, grid.dx, dt))
    x = grid.x
    diag = Diagnostics(max_dt=dt)
    t = 0.0
    out = [u.copy()]
    diag.t.append(0.0)
    diag.clipped_mass.append(0.0)
    diag.dt.append(dt)
    for k in range(1, n_snap + 1):
        clipped = 0.0
        for _ in range(sub):
            lam = lambda_at(pr, t, x) if pr.active else np.zeros_like(x)
            u = solver.solve(u + dt * scalar_reaction(u, lam, s))
            neg = u < 0
            if neg.any():
                worst = -u[neg].min()
                if worst > cfg.clip_tol * np.abs(u).max():
                    raise SolverError("negative density beyond clip tolerance; dt too large", t)
                clipped += -u[neg].sum() * grid.dx
                u[neg] = 0.0
            t += dt
        t = k * cfg.snapshot_every
        out.append(u.copy())
        diag.t.append(t)
        diag.clipped_mass.append(clipped)
        diag.dt.append(dt)
    return ScalarTrajectory(grid, np.array(diag.t), np.array(out), diag)
