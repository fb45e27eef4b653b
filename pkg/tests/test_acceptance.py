"""Acceptance suite: one test per criterion, one summary line per criterion.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
the summary appears under "acceptance criteria" at the end of the report.
Set ``SITWAVE_WORKERS`` to spread the searches over several processes.
"""
import math
import os
import time

import numpy as np
import pytest

from sitwave import experiments, io
from sitwave.constructions import (
    scalar_sub,
    scalar_super,
    system_sub,
    system_super,
    verify_ordering,
    verify_profile_ordering,
    verify_subsolution,
    verify_supersolution,
)
from sitwave.model import ModelParams, ScalarParams, equilibrium, offspring_number, reaction
from sitwave.release import ReleaseProfile, ms_stationary_profile
from sitwave.solver import Grid, SchemeConfig, StateField, simulate, simulate_pair
from sitwave.waves import RunSetup, critical_amplitude, gamma1, minimal_speed

from test_solver import observed_orders

P = ModelParams()
EQ = equilibrium(P)
WORKERS = int(os.environ.get("SITWAVE_WORKERS", "1"))
WIDE = Grid.from_spacing(-300.0, 400.0, 0.25)


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


# -- shared runs (criterion 6 inspects all of them) -------------------------------


@pytest.fixture(scope="module")
def speed_run(tmp_path_factory):
    cfg = io.config_from_dict({"kind": "speed", "out": str(tmp_path_factory.mktemp("speed"))})
    return timed(experiments.run_speed, cfg)


@pytest.fixture(scope="module")
def figure1_run(tmp_path_factory):
    cfg = io.config_from_dict({"kind": "figure1", "workers": WORKERS, "out": str(tmp_path_factory.mktemp("fig1"))})
    return timed(experiments.run_figure1, cfg)


def _smooth(rng, x, n=4):
    f = sum(rng.uniform() * np.exp(-((x - rng.uniform(x[0], x[-1])) ** 2) / (2 * rng.uniform(3, 30) ** 2)) for _ in range(n))
    return f / max(f.max(), 1e-12)


def _random_pairs(n_pairs=20, seed=20240611):
    rng = np.random.default_rng(seed)
    g = Grid.from_spacing(-50.0, 100.0, 0.5)
    x = g.x
    cfg = SchemeConfig(t_end=60.0, snapshot_every=5.0)
    pairs = []
    for _ in range(n_pairs):
        up = [1.2 * v * _smooth(rng, x) for v in EQ.as_array()]
        up[0] = np.minimum(up[0], P.K)
        lo = [u * _smooth(rng, x) for u in up]
        # the lower run gets more sterile males, both initially and released
        Ms_up = rng.uniform(0, 200) * _smooth(rng, x)
        Ms_lo = Ms_up + rng.uniform(0, 200) * _smooth(rng, x)
        c, eta = -rng.uniform(0, 0.5), rng.uniform(0.05, 0.5)
        A_up = rng.uniform(0, 600)
        A_lo = A_up + rng.uniform(0, 600)
        pairs.append(
            simulate_pair(
                StateField(0.0, *lo, Ms_lo), StateField(0.0, *up, Ms_up), g, P,
                ReleaseProfile(A_lo, eta, c), ReleaseProfile(A_up, eta, c), cfg,
            )
        )
    return pairs


@pytest.fixture(scope="module")
def pair_runs():
    return timed(_random_pairs)


def _swept_run(c=-0.3):
    ss = system_super(c, P)
    A = ss.A_sufficient
    Ms0 = np.maximum(ss.control(WIDE.x), ms_stationary_profile(A, ss.eta, P, c)(WIDE.x))
    init = StateField.step_profile(WIDE, P, 0.0, Ms=Ms0)
    return simulate(init, WIDE, P, ReleaseProfile(A, ss.eta, c), SchemeConfig(t_end=400.0))


@pytest.fixture(scope="module")
def swept_run():
    return timed(_swept_run)


# -- criteria -------------------------------------------------------------------------


@pytest.mark.criterion(1, "formula oracles for the offspring number and equilibrium")
def test_criterion_1_formula_oracles(detail):
    R = offspring_number(P)
    detail.append(f"R={R:.12g}, E*,F*,M*={EQ.E_star:.12g},{EQ.F_star:.12g},{EQ.M_star:.12g}")
    assert abs(R - 30.769230769230769) < 1e-9
    assert abs(EQ.E_star - 193.5) < 1e-9
    assert abs(EQ.F_star - 77.4) < 1e-9
    assert abs(EQ.M_star - 55.285714285714285) < 1e-9
    res = reaction(EQ.E_star, EQ.F_star, EQ.M_star, 0.0, P)
    rel = max(abs(r) / v for r, v in zip(res, EQ.as_array()))
    detail.append(f"equilibrium residual {rel:.1e}")
    assert rel < 1e-10


@pytest.mark.criterion(2, "minimal speed: golden section vs grid scan vs simulated front")
def test_criterion_2_minimal_speed(speed_run, detail):
    sp = minimal_speed(P)
    mu = np.arange(1e-4, 5.0, 1e-4)
    scan = float((gamma1(mu, P) / mu).min())
    (res, runtime) = speed_run
    detail.append(f"c_bar={sp.c_bar:.10f}, scan gap={abs(scan - sp.c_bar):.1e}, measured={res.data['slope']:.4f}, gap={res.data['gap']:.2%}, {runtime:.0f}s")
    assert abs(sp.c_bar - 0.814) < 5e-4
    assert sp.condition_ok
    assert abs(scan - sp.c_bar) < 1e-6
    assert res.data["gap"] < 0.10
    assert runtime <= 120


@pytest.mark.criterion(3, "release scenario classifications a: invasion, b: blocked, c: pushed_back, d: reinvasion")
def test_criterion_3_figure1(figure1_run, detail):
    res, runtime = figure1_run
    got = {k: o.kind for k, o in res.data["outcomes"].items()}
    detail.append(", ".join(f"{k}={v}" for k, v in sorted(got.items())) + f", {runtime:.0f}s")
    assert got == {"a": "invasion", "b": "blocked", "c": "pushed_back", "d": "reinvasion"}
    assert runtime <= 480


@pytest.mark.criterion(4, "construction verification at c = -0.3 and c = -1")
def test_criterion_4_constructions(detail):
    t0 = time.perf_counter()
    S = ScalarParams()
    w = scalar_sub(S)
    failures = []
    for c in (-0.3, -1.0):
        ssup = scalar_super(c, 0.5 * S.delta * S.mu / S.beta, S)
        sup = system_super(c, P)
        sub = system_sub(c, P).with_control(sup.C_s, sup.eta)
        reports = {
            "scalar super": verify_supersolution(ssup, tol=1e-8),
            "scalar sub": verify_subsolution(w, tol=1e-8, c=c),
            "system super": verify_supersolution(sup, tol=1e-8),
            "system sub": verify_subsolution(sub, tol=1e-8),
        }
        failures += [f"{name} at c={c}" for name, r in reports.items() if not r.passed]
        roots = {**ssup.root_residuals(), **sup.root_residuals(), **sub.root_residuals()}
        if max(roots.values()) >= 1e-12:
            failures.append(f"roots at c={c}")
        if not verify_profile_ordering(sub, sup).passed or not verify_profile_ordering(w.with_speed(c), ssup).passed:
            failures.append(f"ordering at c={c}")
    energy = float(np.abs(w.energy_defect(np.linspace(-w.X, 0.0, 10_000))).max())
    if energy >= 1e-8:
        failures.append("energy identity")
    runtime = time.perf_counter() - t0
    detail.append(f"energy defect {energy:.1e}, {runtime:.0f}s" + (f", failed: {failures}" if failures else ""))
    assert not failures
    assert runtime <= 60


@pytest.mark.criterion(5, "comparison principle on 20 random ordered pairs")
def test_criterion_5_comparison(pair_runs, detail):
    pairs, runtime = pair_runs
    worst = max(max(verify_ordering(lo, hi).worst, verify_ordering(hi, lo, components=("Ms",)).worst) for lo, hi in pairs)
    detail.append(f"{len(pairs)} pairs, worst relative excess {worst:.1e}, {runtime:.0f}s")
    assert len(pairs) == 20
    assert worst <= 1e-6
    assert runtime <= 300


@pytest.mark.criterion(6, "positivity, E <= K and second-order diffusion")
def test_criterion_6_invariants(speed_run, figure1_run, pair_runs, swept_run, detail):
    trajs = [speed_run[0].data["trajectory"], *figure1_run[0].data["trajectories"].values(), swept_run[0]]
    trajs += [t for pair in pair_runs[0] for t in pair]
    worst_clip, worst_EK, negative = 0.0, 0.0, False
    for tr in trajs:
        dx = tr.grid.dx
        total = dx * (tr.E + tr.F + tr.M + tr.Ms).sum(axis=1)
        clipped = np.asarray(tr.diagnostics.clipped_mass)
        worst_clip = max(worst_clip, float((clipped / np.maximum(total, 1e-300)).max()))
        worst_EK = max(worst_EK, float(tr.E.max()) / P.K)
        negative |= any(getattr(tr, k).min() < 0 for k in ("E", "F", "M", "Ms"))
    orders = observed_orders()
    detail.append(f"{len(trajs)} runs, clip {worst_clip:.1e}, max E/K {worst_EK:.6f}, orders {', '.join(f'{o:.3f}' for o in orders)}")
    assert not negative
    assert worst_clip < 1e-8
    assert worst_EK <= 1 + 1e-8
    assert all(1.8 <= o <= 2.2 for o in orders)


@pytest.mark.criterion(7, "constructed release at c = -0.3 clears x > ct by t = 400")
def test_criterion_7_sweep(swept_run, detail):
    tr, runtime = swept_run
    c = -0.3
    mask = WIDE.x > c * tr.times[-1]
    sup = max(float(getattr(tr, k)[-1][mask].max()) for k in ("E", "F", "M"))
    limit = 0.01 * max(EQ.as_array())
    detail.append(f"sup over x>ct = {sup:.2e} (limit {limit:.3f}), {runtime:.0f}s")
    assert sup < limit
    assert runtime <= 180


@pytest.mark.criterion(8, "critical amplitude grows with release speed (c = -0.5 vs -0.3)")
def test_criterion_8_cost_vs_speed(detail):
    setup = RunSetup(P, WIDE, SchemeConfig(t_end=400.0))
    t0 = time.perf_counter()
    slow = critical_amplitude(setup, 0.2, -0.3, (0.0, 1e5), workers=WORKERS)
    fast = critical_amplitude(setup, 0.2, -0.5, (0.0, 1e7), workers=WORKERS)
    runtime = time.perf_counter() - t0
    detail.append(f"A_crit(-0.3) in ({slow.bracket[0]:.4g}, {slow.bracket[1]:.4g}), A_crit(-0.5) in ({fast.bracket[0]:.4g}, {fast.bracket[1]:.4g}), {runtime:.0f}s")
    assert fast.bracket[0] > slow.bracket[1]
    assert runtime <= 900


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
