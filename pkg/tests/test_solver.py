import math

import numpy as np
import pytest

from sitwave.model import ModelParams, ScalarParams, equilibrium, scalar_equilibrium
from sitwave.release import ReleaseProfile, ms_stationary_profile
from sitwave.solver import (
    Grid,
    SchemeConfig,
    SolverError,
    StateField,
    simulate,
    simulate_pair,
    simulate_scalar,
    stable_dt,
    step,
    time_step,
)
from sitwave.waves import front_position

P = ModelParams()
EQ = equilibrium(P)


def heat_error(dx, t=5.0, s0=2.0):
    g = Grid.from_spacing(-50.0, 50.0, dx)
    x = g.x

    def exact(t):
        var = s0**2 + 2 * P.D * t
        return s0 / np.sqrt(var) * np.exp(-(x**2) / (2 * var))

    z = np.zeros_like(x)
    tr = simulate(StateField(0.0, z, exact(0), exact(0), z.copy()), g, P, ReleaseProfile.off(), SchemeConfig(t_end=t, snapshot_every=t), with_reaction=False)
    return float(np.abs(tr.F[-1] - exact(t)).max())


def observed_orders(dxs=(0.5, 0.25, 0.125)):
    e = [heat_error(d) for d in dxs]
    return [math.log(e[i] / e[i + 1]) / math.log(dxs[i] / dxs[i + 1]) for i in range(len(e) - 1)]


def test_grid():
    g = Grid()
    assert g.dx == pytest.approx(0.25)
    assert g.x[0] == -100 and g.x[-1] == 300
    assert Grid.from_spacing(-300, 400, 0.25).n_cells == 2801
    with pytest.raises(ValueError):
        Grid(0, 1, 8)
    with pytest.raises(ValueError):
        Grid(1, 0, 100)


def test_time_step_rule():
    g = Grid()
    cfg = SchemeConfig()
    assert time_step(g, 0.5, 0.0, cfg) == pytest.approx(0.9 * 0.0625)
    assert time_step(g, 0.5, 100.0, cfg) == pytest.approx(0.9 / 100)


def test_scheme_validation():
    with pytest.raises(ValueError):
        SchemeConfig(dt_safety=1.5)
    with pytest.raises(ValueError):
        SchemeConfig(boundary="periodic")


def test_heat_kernel_second_order():
    orders = observed_orders()
    assert all(1.8 <= o <= 2.2 for o in orders), orders


def test_equilibrium_is_fixed():
    g = Grid(-10, 10, 81)
    one = np.ones(g.n_cells)
    s = StateField(0.0, EQ.E_star * one, EQ.F_star * one, EQ.M_star * one, 0 * one)
    tr = simulate(s, g, P, ReleaseProfile.off(), SchemeConfig(t_end=50, snapshot_every=10))
    for name, v in zip("EFM", EQ.as_array()):
        assert np.abs(getattr(tr, name) / v - 1).max() < 1e-10


def test_extinction_persists_and_sterile_males_approach_profile():
    g = Grid.from_spacing(-100, 200, 0.25)
    pr = ReleaseProfile(600, 0.2, -0.3)
    tr = simulate(StateField.zeros(g), g, P, pr, SchemeConfig(t_end=200, snapshot_every=50))
    for name in "EFM":
        assert np.all(getattr(tr, name) == 0)
    S = ms_stationary_profile(600, 0.2, P, -0.3)(g.x + 0.3 * 200)
    inner = (g.x > -50) & (g.x < 150)
    assert np.abs(tr.Ms[-1] - S)[inner].max() < 1e-3 * S.max()


def test_step_matches_simulate():
    g = Grid(-20, 20, 161)
    s = StateField.step_profile(g, P, 0.0)
    cfg = SchemeConfig(t_end=1.0, snapshot_every=1.0)
    dt = stable_dt(s, g, P, cfg)
    tr = simulate(s, g, P, ReleaseProfile(), cfg, dt_max=1.0 / math.ceil(1.0 / dt))
    q = s
    for _ in range(math.ceil(1.0 / dt)):
        q, _ = step(q, g, P, ReleaseProfile(), cfg, dt=1.0 / math.ceil(1.0 / dt))
    np.testing.assert_allclose(q.F, tr.F[-1], rtol=1e-12, atol=1e-12)


def test_snapshots_hit_exact_times():
    g = Grid(-20, 20, 81)
    tr = simulate(StateField.step_profile(g, P), g, P, ReleaseProfile(), SchemeConfig(t_end=7.0, snapshot_every=0.7))
    np.testing.assert_allclose(tr.times, 0.7 * np.arange(11), atol=1e-12)
    t, clipped, dt = tr.diagnostics.as_arrays()
    assert len(t) == len(tr)


def test_positivity_and_capacity_bound():
    g = Grid.from_spacing(-100, 300, 0.5)
    tr = simulate(StateField.step_profile(g, P), g, P, ReleaseProfile(600, 0.2, -0.5), SchemeConfig(t_end=100))
    for name in ("E", "F", "M", "Ms"):
        assert getattr(tr, name).min() >= 0
    assert tr.diagnostics.max_E_over_K <= 1 + 1e-8


def test_clip_beyond_tolerance_is_an_error():
    g = Grid.from_spacing(-20, 20, 0.25)
    z = np.zeros(g.n_cells)
    s = StateField(0.0, z, np.full(g.n_cells, 50.0), z.copy(), z.copy())
    # females without eggs decay at rate mu_F; dt = 20 overshoots zero
    with pytest.raises(SolverError):
        step(s, g, P, ReleaseProfile(), SchemeConfig(), dt=20.0)


def test_uncontrolled_front_moves_right():
    g = Grid()
    tr = simulate(StateField.step_profile(g, P), g, P, ReleaseProfile.off(), SchemeConfig(t_end=100, snapshot_every=20))
    pos = [front_position(F, g.x, 0.1 * EQ.F_star) for F in tr.F]
    assert np.all(np.diff(pos) > 0)


def test_front_position_converges_under_refinement():
    # uncontrolled front position at t = 60 changes by less than two coarse cells
    out = []
    for dx in (0.5, 0.25):
        g = Grid.from_spacing(-100, 300, dx)
        tr = simulate(StateField.step_profile(g, P), g, P, ReleaseProfile.off(), SchemeConfig(t_end=60, snapshot_every=60))
        out.append(front_position(tr.F[-1], g.x, 0.1 * EQ.F_star))
    assert abs(out[0] - out[1]) < 2 * 0.5


def test_pair_shares_time_step():
    g = Grid(-20, 20, 161)
    lo = StateField.step_profile(g, P)
    hi = StateField.step_profile(g, P.replace(K=400))
    a, b = simulate_pair(lo, hi, g, P, ReleaseProfile(), ReleaseProfile(), SchemeConfig(t_end=5))
    assert a.diagnostics.max_dt == b.diagnostics.max_dt


def test_scalar_zero_stays_zero():
    g = Grid(-20, 20, 161)
    tr = simulate_scalar(np.zeros(g.n_cells), g, ScalarParams(), ReleaseProfile.off(), SchemeConfig(t_end=10))
    assert np.all(tr.u == 0)


def test_scalar_front_reaches_kpp_speed():
    s = ScalarParams()
    us = scalar_equilibrium(s)
    g = Grid.from_spacing(-20, 260, 0.1)
    tr = simulate_scalar(us * (g.x < 0), g, s, ReleaseProfile.off(), SchemeConfig(t_end=50, snapshot_every=2))
    pos = np.array([front_position(u, g.x, 0.1 * us) for u in tr.u])
    late = tr.times >= 25
    speed = np.polyfit(tr.times[late], pos[late], 1)[0]
    assert abs(speed - 4.0) / 4.0 < 0.1


def test_scalar_init_shape_checked():
    with pytest.raises(ValueError):
        simulate_scalar(np.zeros(3), Grid(-20, 20, 161), ScalarParams(), ReleaseProfile.off(), SchemeConfig(t_end=1))
