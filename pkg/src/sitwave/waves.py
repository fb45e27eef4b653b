"""Invasion speeds, front tracking, outcome classification and critical-parameter searches."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import ModelParams, ScalarParams, equilibrium, offspring_number
from .release import ReleaseProfile
from .solver import Grid, SchemeConfig, SolverError, StateField, Trajectory, simulate

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5) - 1) / 2

SUCCESS_KINDS = frozenset({"blocked", "pushed_back", "extinct"})


@dataclass(frozen=True)
class SpeedResult:
    c_bar: float
    mu_bar: float
    gamma1_at_mu_bar: float
    condition_ok: bool


@dataclass
class FrontTrajectory:
    times: np.ndarray
    positions: np.ndarray
    threshold: float


@dataclass(frozen=True)
class Outcome:
    kind: str
    measured_speed: Optional[float]

    @property
    def success(self) -> bool:
        return self.kind in SUCCESS_KINDS


# -- analytic speeds ----------------------------------------------------------


def gamma1(mu, p: ModelParams):
    """Principal eigenvalue of the (E, F) block of the exponential-ansatz matrix."""
    mu = np.asarray(mu, dtype=float)
    a = p.D * mu ** 2
    out = (a - p.nu_E - p.mu_E - p.mu_F + np.sqrt((a + p.nu_E + p.mu_E - p.mu_F) ** 2 + 4 * p.beta * p.r * p.nu_E)) / 2
    return out if out.ndim else float(out)


def speed_condition(mu: float, p: ModelParams) -> float:
    """Left side of the positivity condition on the male component of the eigenvector."""
    a = p.D * mu ** 2
    return 2 * p.mu_M - a - p.nu_E - p.mu_E - p.mu_F + math.sqrt((a + p.nu_E + p.mu_E - p.mu_F) ** 2 + 4 * p.beta * p.r * p.nu_E)


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10, max_iter: int = 500):
    """Minimise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def _bracket_minimum(f, x0=1.0, factor=2.0, max_iter=200):
    # f -> infinity at 0+ and at infinity, so expand geometrically around x0
    lo, mid = x0 / factor, x0
    f_lo, f_mid = f(lo), f(mid)
    for _ in range(max_iter):
        if f_lo > f_mid:
            break
        mid, f_mid = lo, f_lo
        lo = lo / factor
        f_lo = f(lo)
    hi = mid * factor
    f_hi = f(hi)
    for _ in range(max_iter):
        if f_hi > f_mid:
            break
        lo, mid, f_mid = mid, hi, f_hi
        hi = hi * factor
        f_hi = f(hi)
    return lo, hi


def minimal_speed(p: ModelParams, tol: float = 1e-10) -> SpeedResult:
    """Minimal speed ``inf_{mu>0} gamma1(mu) / mu`` of the uncontrolled system."""
    if not offspring_number(p) > 1:
        raise ValueError("minimal speed requires offspring number > 1")

    def ratio(mu):
        return gamma1(mu, p) / mu

    lo, hi = _bracket_minimum(ratio)
    mu_bar, c_bar = golden_section(ratio, lo, hi, tol=tol)
    g = gamma1(mu_bar, p)
    return SpeedResult(g / mu_bar, mu_bar, g, speed_condition(mu_bar, p) > 0)


def kpp_speed(s: ScalarParams) -> float:
    """Linear spreading speed ``2 sqrt(beta/delta - mu)`` of the reduced model (unit diffusion)."""
    if not s.growth_margin > 0:
        raise ValueError("scalar model needs beta - mu*delta > 0")
    return 2 * math.sqrt(s.beta / s.delta - s.mu)


# -- fronts and outcomes --------------------------------------------------------


def front_position(F: np.ndarray, x: np.ndarray, threshold: float) -> float:
    """Largest x with ``F >= threshold``, interpolated linearly; ``-inf`` if none."""
    idx = np.flatnonzero(F >= threshold)
    if idx.size == 0:
        return -math.inf
    i = idx[-1]
    if i == F.size - 1:
        return float(x[i])
    f0, f1 = F[i], F[i + 1]
    return float(x[i] + (f0 - threshold) / (f0 - f1) * (x[i + 1] - x[i]))


def track_front(traj, threshold: float) -> FrontTrajectory:
    """Front of the female density in every snapshot of ``traj``."""
    if not threshold > 0:
        raise ValueError("front threshold must be positive")
    x = traj.grid.x
    pos = np.array([front_position(F, x, threshold) for F in traj.F])
    return FrontTrajectory(np.asarray(traj.times, dtype=float), pos, float(threshold))


class FrontClearanceError(SolverError):
    """The front came closer to a domain end than the clearance margin."""


def check_clearance(ft: FrontTrajectory, grid: Grid, margin: float = 20.0) -> None:
    """Raise if any finite front position lies within ``margin`` km of either end of the grid."""
    pos = ft.positions
    fin = np.isfinite(pos)
    bad = fin & ((pos < grid.x_min + margin) | (pos > grid.x_max - margin))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise FrontClearanceError(
            f"front at x={pos[k]:.4g} is within {margin:g} km of the domain [{grid.x_min:g}, {grid.x_max:g}]; "
            "enlarge the grid",
            float(ft.times[k]),
        )


def _last_half(ft: FrontTrajectory, horizon: float):
    sel = (ft.times >= horizon / 2 - 1e-9) & (ft.times <= horizon + 1e-9) & np.isfinite(ft.positions)
    return ft.times[sel], ft.positions[sel]


def _position_at(ft: FrontTrajectory, t: float) -> float:
    k = int(np.argmin(np.abs(ft.times - t)))
    return float(ft.positions[k])


def count_reversals(x: np.ndarray, hysteresis: float = 1.0) -> int:
    """Direction changes of a sequence, ignoring retreats smaller than ``hysteresis``."""
    n, direction = 0, 0
    hi = lo = float(x[0])
    for v in x[1:]:
        hi, lo = max(hi, v), min(lo, v)
        if direction >= 0 and hi - v >= hysteresis:
            n += direction > 0
            direction, lo = -1, v
        elif direction <= 0 and v - lo >= hysteresis:
            n += direction < 0
            direction, hi = 1, v
    return n


def classify_outcome(
    ft: FrontTrajectory,
    pr: ReleaseProfile,
    horizon: float,
    dead_band: float = 0.02,
    block_window: float = 5.0,
    oscillation_limit: float = 10.0,
) -> Outcome:
    """Classify a front trajectory as invasion, blocked, pushed back, reinvasion or extinct.

    The speed is the least-squares slope of the front over the last half of the
    horizon. A last half that turns back and forth at least twice with a
    detrended amplitude above ``oscillation_limit`` km is ``indeterminate``;
    a single turn (pushed back, then reinvading) is not an oscillation.
    """
    if ft.times[0] > 1e-9 or ft.times[-1] < horizon - 1e-9:
        raise ValueError("front trajectory does not cover [0, horizon]")
    if not np.isfinite(_position_at(ft, horizon)):
        return Outcome("extinct", None)
    t, x = _last_half(ft, horizon)
    if t.size < 2:
        return Outcome("indeterminate", None)
    slope, icpt = np.polyfit(t, x, 1)
    slope = float(slope)
    resid = x - (slope * t + icpt)
    if count_reversals(x) >= 2 and np.ptp(resid) > oscillation_limit:
        return Outcome("indeterminate", slope)

    released = pr.active
    if not released and slope > 0:
        return Outcome("invasion", slope)
    if released and slope > dead_band:
        return Outcome("reinvasion", slope)
    if slope < -dead_band:
        return Outcome("pushed_back", slope)
    if abs(_position_at(ft, horizon) - _position_at(ft, horizon / 2)) <= block_window:
        return Outcome("blocked", slope)
    return Outcome("indeterminate", slope)


# -- critical parameter searches -----------------------------------------------


@dataclass
class Probe:
    value: float
    kind: str
    speed: Optional[float]


@dataclass
class SearchResult:
    parameter: str
    value: float
    bracket: tuple
    history: list = field(default_factory=list)
    ordering_violation: float = 0.0


@dataclass(frozen=True)
class RunSetup:
    """Everything except the release needed to run and classify one experiment."""

    p: ModelParams
    grid: Grid
    cfg: SchemeConfig
    init_x0: float = 0.0
    threshold_fraction: float = 0.1
    clearance: float = 20.0

    def initial_state(self) -> StateField:
        return StateField.step_profile(self.grid, self.p, self.init_x0)

    def run(self, pr: ReleaseProfile):
        """Simulate, track the front and classify; enforces the front clearance."""
        traj = simulate(self.initial_state(), self.grid, self.p, pr, self.cfg)
        ft = track_front(traj, self.threshold_fraction * equilibrium(self.p).F_star)
        check_clearance(ft, self.grid, self.clearance)
        return traj, ft, classify_outcome(ft, pr, self.cfg.t_end)


def _endpoint_runs(setup: RunSetup, releases, workers: int):
    # endpoints need full trajectories for the ordering check
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(releases))) as ex:
            return list(ex.map(setup.run, releases))
    return [setup.run(pr) for pr in releases]


def _ordering_gap(lower: Trajectory, upper: Trajectory) -> float:
    """Largest relative excess of ``lower`` over ``upper`` in E, F, M."""
    worst = 0.0
    for name in ("E", "F", "M"):
        a, b = getattr(lower, name), getattr(upper, name)
        scale = max(np.abs(a).max(), np.abs(b).max(), 1e-300)
        worst = max(worst, float((a - b).max()) / scale)
    return worst


def _bisect(setup, make_release, lo, hi, width, parameter, workers, order_tol):
    (tr_lo, _, out_lo), (tr_hi, _, out_hi) = _endpoint_runs(setup, [make_release(lo), make_release(hi)], workers)
    history = [Probe(lo, out_lo.kind, out_lo.measured_speed), Probe(hi, out_hi.kind, out_hi.measured_speed)]
    if out_lo.success == out_hi.success:
        raise ValueError(
            f"invalid bracket for {parameter}: both endpoints classified "
            f"{'successful' if out_lo.success else 'failed'} ({out_lo.kind}, {out_hi.kind})"
        )
    if out_lo.success:
        raise ValueError(f"invalid bracket for {parameter}: the lower endpoint must fail and the upper succeed")
    # stronger control must give a smaller wild population (comparison principle)
    gap = _ordering_gap(tr_hi, tr_lo)
    if gap > order_tol:
        raise AssertionError(f"endpoint runs violate the comparison ordering by {gap:.3g}")
    a, b = lo, hi
    while abs(b - a) > width:
        mid = (a + b) / 2
        out = setup.run(make_release(mid))[2]
        history.append(Probe(mid, out.kind, out.measured_speed))
        log.info("%s=%.6g -> %s", parameter, mid, out.kind)
        if out.success:
            b = mid
        else:
            a = mid
    return SearchResult(parameter, (a + b) / 2, (a, b), history, gap)


def critical_amplitude(
    setup: RunSetup,
    eta: float,
    c: float,
    bracket: Sequence[float] = (0.0, 600.0),
    workers: int = 1,
    rel_width: float = 0.01,
    order_tol: float = 1e-6,
) -> SearchResult:
    """Smallest release amplitude that blocks or pushes back the front, by bisection.

    The lower bracket end must fail (invasion/reinvasion) and the upper end succeed.
    """
    A_lo, A_hi = map(float, bracket)
    if not A_hi > A_lo:
        raise ValueError("amplitude bracket must satisfy A_lo < A_hi")
    return _bisect(
        setup, lambda A: ReleaseProfile(A, eta, c), A_lo, A_hi, rel_width * A_hi, "A", workers, order_tol
    )


def critical_speed(
    setup: RunSetup,
    A: float,
    eta: float,
    bracket: Sequence[float] = (-0.5, -0.3),
    workers: int = 1,
    rel_width: float = 0.01,
) -> SearchResult:
    """Fastest leftward sweep that still succeeds. ``bracket = (c_lo, c_hi)``, c_lo failing."""
    c_lo, c_hi = map(float, bracket)
    if not c_lo < c_hi <= 0:
        raise ValueError("speed bracket must satisfy c_lo < c_hi <= 0")
    width = rel_width * max(abs(c_lo), abs(c_hi))
    # faster sweeps are not ordered by the comparison principle; skip the ordering check
    return _bisect(setup, lambda c: ReleaseProfile(A, eta, c), c_lo, c_hi, width, "c", workers, math.inf)
