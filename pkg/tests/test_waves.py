import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitwave.model import ModelParams, ScalarParams
from sitwave.release import ReleaseProfile
from sitwave.solver import Grid
from sitwave.waves import (
    FrontClearanceError,
    FrontTrajectory,
    Outcome,
    check_clearance,
    classify_outcome,
    count_reversals,
    critical_amplitude,
    critical_speed,
    front_position,
    gamma1,
    golden_section,
    kpp_speed,
    minimal_speed,
    speed_condition,
)

P = ModelParams()
C_BAR = 0.8136752424690893
MU_BAR = 1.1158069573758356


def test_gamma1_hand_value():
    assert gamma1(1.0, P) == pytest.approx((0.5 - 0.23 + math.sqrt(0.53**2 + 1.6)) / 2, rel=1e-14)
    assert gamma1(1.0, P) == pytest.approx(0.82073, rel=1e-5)


def test_gamma1_limit_at_zero():
    assert gamma1(1e-12, P) == pytest.approx((-0.23 + math.sqrt(0.03**2 + 1.6)) / 2, rel=1e-12)
    assert gamma1(0.0, P) > 0


def test_minimal_speed_frozen():
    sp = minimal_speed(P)
    assert sp.c_bar == pytest.approx(C_BAR, rel=1e-9)
    assert sp.mu_bar == pytest.approx(MU_BAR, rel=1e-4)
    assert sp.condition_ok
    assert sp.gamma1_at_mu_bar / sp.mu_bar == sp.c_bar


def test_minimal_speed_against_dense_scan():
    mu = np.arange(1e-4, 5.0, 1e-4)
    scan = (gamma1(mu, P) / mu).min()
    assert abs(scan - minimal_speed(P).c_bar) < 1e-6


def test_minimal_speed_diffusion_scaling():
    base = minimal_speed(P).c_bar
    assert minimal_speed(P.replace(D=4 * P.D)).c_bar / base == pytest.approx(2.0, abs=1e-9)
    assert minimal_speed(P.replace(D=2 * P.D)).c_bar / base == pytest.approx(math.sqrt(2.0), abs=1e-9)


def test_minimal_speed_rejects_subcritical():
    with pytest.raises(ValueError):
        minimal_speed(P.replace(beta=0.3))


def test_speed_condition_sign():
    assert speed_condition(MU_BAR, P) > 0


def test_golden_section_quadratic():
    x, fx = golden_section(lambda v: (v - 1.3) ** 2 + 2, 0.0, 5.0)
    assert x == pytest.approx(1.3, abs=1e-6) and fx == pytest.approx(2.0)


def test_kpp_speed():
    assert kpp_speed(ScalarParams()) == pytest.approx(4.0)
    assert kpp_speed(ScalarParams(beta=6.0, delta=2.0, mu=2.0)) == pytest.approx(2.0)
    assert kpp_speed(ScalarParams(beta=2.0 + 1e-10, delta=2.0, mu=1.0)) < 1e-4


def test_front_position_step():
    x = np.linspace(-20, 40, 241)
    F = np.where(x < 10, 77.4, 0.0)
    assert abs(front_position(F, x, 7.74) - 10) <= x[1] - x[0]
    assert front_position(np.zeros_like(x), x, 7.74) == -math.inf


def _ft(times, pos):
    return FrontTrajectory(np.asarray(times, float), np.asarray(pos, float), 7.74)


T = np.arange(0, 401, 5.0)
ON = ReleaseProfile(600, 0.2, -0.3)


@pytest.mark.parametrize(
    "pos, pr, kind",
    [
        (0.8 * T, ReleaseProfile.off(), "invasion"),
        (0 * T + 2, ON, "blocked"),
        (-0.25 * T, ON, "pushed_back"),
        (np.where(T < 200, -0.3 * T, -60 + 0.8 * (T - 200)), ON, "reinvasion"),
        (np.where(T < 300, -0.3 * T, -np.inf), ON, "extinct"),
        (0.01 * T, ON, "blocked"),
        (30 * np.sin(T / 20), ON, "indeterminate"),
    ],
)
def test_classification(pos, pr, kind):
    assert classify_outcome(_ft(T, pos), pr, 400.0).kind == kind


def test_single_turn_is_not_oscillation():
    # pushed back then reinvading: exactly one reversal
    pos = np.where(T < 265, -0.3 * T, -79.5 + 0.8 * (T - 265))
    assert count_reversals(pos) == 1
    assert classify_outcome(_ft(T, pos), ON, 400.0).kind == "reinvasion"


def test_classification_needs_full_horizon():
    with pytest.raises(ValueError):
        classify_outcome(_ft(T[:10], 0 * T[:10]), ON, 400.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=60))
def test_monotone_sequences_have_no_reversals(xs):
    assert count_reversals(np.sort(xs)) == 0
    assert count_reversals(np.sort(xs)[::-1]) == 0


def test_clearance():
    g = Grid(-100, 300, 1601)
    check_clearance(_ft([0, 1, 2], [0, 100, -math.inf]), g)
    with pytest.raises(FrontClearanceError):
        check_clearance(_ft([0, 1], [0, 285]), g)


class ThresholdSetup:
    """Stand-in for a run setup: success iff the release is strong or slow enough."""

    def __init__(self, A_crit=250.0, c_crit=-0.4):
        self.A_crit, self.c_crit = A_crit, c_crit
        self.calls = 0

    def run(self, pr):
        self.calls += 1
        ok = pr.A >= self.A_crit and pr.c >= self.c_crit
        # stronger control, smaller wild population
        level = np.full((2, 4), 100.0 / (1.0 + pr.A))
        traj = SimpleNamespace(E=level, F=level, M=level)
        return traj, None, Outcome("pushed_back" if ok else "reinvasion", -0.1 if ok else 0.5)


def test_amplitude_bisection():
    res = critical_amplitude(ThresholdSetup(), 0.2, -0.3, (0.0, 600.0), rel_width=1e-3)
    lo, hi = res.bracket
    assert lo < 250.0 <= hi and hi - lo <= 0.6
    assert res.value == pytest.approx(250.0, abs=0.6)
    assert [h.kind for h in res.history[:2]] == ["reinvasion", "pushed_back"]


def test_amplitude_invalid_brackets():
    with pytest.raises(ValueError):
        critical_amplitude(ThresholdSetup(), 0.2, -0.3, (600.0, 600.0))
    with pytest.raises(ValueError):
        critical_amplitude(ThresholdSetup(A_crit=700.0), 0.2, -0.3, (0.0, 600.0))
    with pytest.raises(ValueError):
        critical_amplitude(ThresholdSetup(A_crit=-1.0), 0.2, -0.3, (0.0, 600.0))


def test_amplitude_ordering_violation_detected():
    class Inverted(ThresholdSetup):
        def run(self, pr):
            traj, ft, out = super().run(pr)
            return SimpleNamespace(E=1 / traj.E, F=1 / traj.F, M=1 / traj.M), ft, out

    with pytest.raises(AssertionError):
        critical_amplitude(Inverted(), 0.2, -0.3, (0.0, 600.0))


def test_speed_bisection_and_monotonicity():
    slow = critical_speed(ThresholdSetup(A_crit=0.0, c_crit=-0.35), 600.0, 0.2, (-0.5, -0.3), rel_width=1e-3)
    fast = critical_speed(ThresholdSetup(A_crit=0.0, c_crit=-0.45), 600.0, 0.2, (-0.5, -0.3), rel_width=1e-3)
    assert -0.5 < fast.value < slow.value < -0.3
    assert slow.value == pytest.approx(-0.35, abs=1e-3)


def test_speed_bracket_with_two_successes_rejected():
    with pytest.raises(ValueError):
        critical_speed(ThresholdSetup(A_crit=0.0, c_crit=-1.0), 600.0, 0.2, (-0.5, -0.3))
    with pytest.raises(ValueError):
        critical_speed(ThresholdSetup(), 600.0, 0.2, (-0.3, -0.5))
