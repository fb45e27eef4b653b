"""Named experiments behind the command line: simulation, the four release scenarios, speeds, checks, searches."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .constructions import (
    scalar_sub,
    scalar_super,
    system_sub,
    system_super,
    verify_ms_bound,
    verify_ordering,
    verify_profile_ordering,
    verify_subsolution,
    verify_supersolution,
    write_profiles_csv,
)
from .model import ScalarParams
from .release import ReleaseProfile, ms_stationary_profile
from .solver import SolverError, StateField, simulate_pair
from .waves import RunSetup, critical_amplitude, critical_speed, minimal_speed

log = logging.getLogger(__name__)

FIGURE1 = (
    ("a", None, "invasion"),
    ("b", 0.0, "blocked"),
    ("c", -0.3, "pushed_back"),
    ("d", -0.5, "reinvasion"),
)


@dataclass
class ExperimentResult:
    name: str
    passed: bool
    report: str
    files: list = field(default_factory=list)
    data: dict = field(default_factory=dict)


def _setup(cfg: io.ExperimentConfig) -> RunSetup:
    return RunSetup(cfg.model, cfg.grid, cfg.scheme, cfg.x0)


def _outdir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_simulate(cfg: io.ExperimentConfig) -> ExperimentResult:
    out = _outdir(cfg)
    traj, ft, outcome = _setup(cfg).run(cfg.release)
    files = [
        io.write_snapshots(out / "snapshots.csv", traj),
        io.write_diagnostics(out / "diagnostics.csv", traj),
        io.write_front(out / "front.csv", ft),
    ]
    speed = "n/a" if outcome.measured_speed is None else f"{outcome.measured_speed:.6g}"
    report = f"outcome: {outcome.kind}\nmeasured speed: {speed} km/day\nmax E/K: {traj.diagnostics.max_E_over_K:.10g}"
    return ExperimentResult("simulate", True, report, files, {"outcome": outcome, "front": ft})


def _scenario(args):
    setup, label, pr = args
    try:
        return label, setup.run(pr), None
    except SolverError as exc:
        return label, None, str(exc)


def figure1_releases(A: float = 600.0, eta: float = 0.2):
    return {label: (ReleaseProfile.off() if c is None else ReleaseProfile(A, eta, c), expected) for label, c, expected in FIGURE1}


def run_figure1(cfg: io.ExperimentConfig) -> ExperimentResult:
    """The four release scenarios; a failing scenario does not stop the others."""
    out = _outdir(cfg)
    setup = _setup(cfg)
    releases = figure1_releases(cfg.release.A, cfg.release.eta)
    jobs = [(setup, label, pr) for label, (pr, _) in releases.items()]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as ex:
            results = list(ex.map(_scenario, jobs))
    else:
        results = [_scenario(j) for j in jobs]

    rows, lines, files, outcomes, trajs = [], [], [], {}, {}
    ok = True
    for label, res, err in results:
        pr, expected = releases[label]
        if err is not None:
            ok = False
            rows.append([label, pr.c, pr.A, pr.eta, expected, "error", None, False])
            lines.append(f"scenario {label}: numerical failure: {err}")
            continue
        traj, ft, outcome = res
        outcomes[label] = outcome
        trajs[label] = traj
        files.append(io.write_snapshots(out / f"fig1_{label}_snapshots.csv", traj))
        files.append(io.write_front(out / f"fig1_{label}_front.csv", ft))
        match = outcome.kind == expected
        ok &= match
        rows.append([label, pr.c, pr.A, pr.eta, expected, outcome.kind, outcome.measured_speed, match])
        speed = "n/a" if outcome.measured_speed is None else f"{outcome.measured_speed:+.4f}"
        lines.append(
            f"scenario {label} (c={pr.c:g}, A={pr.A:g}): {outcome.kind} (speed {speed} km/day), "
            f"expected {expected}: {'PASS' if match else 'FAIL'}"
        )
    files.append(
        io.write_rows(out / "figure1_summary.csv", ["scenario", "c", "A", "eta", "expected", "kind", "measured_speed", "match"], rows)
    )
    return ExperimentResult("figure1", ok, "\n".join(lines), files, {"outcomes": outcomes, "trajectories": trajs})


def run_speed(cfg: io.ExperimentConfig) -> ExperimentResult:
    """Analytic minimal speed against the slope of an uncontrolled front."""
    sp = minimal_speed(cfg.model)
    fit_from = float(cfg.speed.get("fit_from", 100.0))
    traj, ft, _ = _setup(cfg).run(ReleaseProfile.off())
    sel = (ft.times >= fit_from) & np.isfinite(ft.positions)
    if sel.sum() < 2:
        raise SolverError("not enough snapshots in the speed fit window")
    slope = float(np.polyfit(ft.times[sel], ft.positions[sel], 1)[0])
    gap = abs(slope - sp.c_bar) / sp.c_bar
    out = _outdir(cfg)
    files = [io.write_front(out / "speed_front.csv", ft)]
    report = (
        f"c_bar = {sp.c_bar:.10g} km/day\nmu_bar = {sp.mu_bar:.10g} 1/km\n"
        f"condition_ok = {sp.condition_ok}\nmeasured slope (t >= {fit_from:g}) = {slope:.6g} km/day\n"
        f"relative gap = {gap:.4f} ({'PASS' if gap < 0.1 else 'FAIL'} at 10%)"
    )
    (out / "speed_report.txt").write_text(report + "\n")
    files.append(out / "speed_report.txt")
    return ExperimentResult("speed", gap < 0.1, report, files, {"speed": sp, "slope": slope, "gap": gap, "trajectory": traj})


def _samples(cons, rng, n_random=1000):
    base = cons.default_samples()
    extra = rng.uniform(base[0], base[-1], n_random)
    return np.sort(np.concatenate([base, extra]))


def ordered_pair_runs(c: float, cfg: io.ExperimentConfig, t_end: float = 100.0):
    """Runs started from the sub- and the super-solution under the constructed release."""
    p = cfg.model
    sup = system_super(c, p)
    sub = system_sub(c, p)
    grid = cfg.grid
    A = sup.A_sufficient
    pr = ReleaseProfile(A, sup.eta, c)
    Ms0 = np.maximum(sup.control(grid.x), ms_stationary_profile(A, sup.eta, p, c)(grid.x))
    scheme = cfg.scheme.replace(t_end=t_end)
    inits = []
    for cons in (sub, sup):
        prof = cons.evaluate(grid.x)
        inits.append(StateField(0.0, prof["E"], prof["F"], prof["M"], Ms0.copy()))
    return simulate_pair(*inits, grid, p, pr, pr, scheme)


def run_verify(cfg: io.ExperimentConfig) -> ExperimentResult:
    """Every construction check at speed ``verify.c``; the report lists each verdict."""
    c = float(cfg.verify.get("c", -0.3))
    tol = float(cfg.verify.get("tol", 1e-8))
    rng = np.random.default_rng(cfg.seed)
    p = cfg.model
    checks = []

    def add(name, passed, text):
        checks.append((name, bool(passed), text))

    sp = ScalarParams()
    s = scalar_super(c, 0.5 * sp.delta * sp.mu / sp.beta, sp)
    add("scalar super-solution", (r := verify_supersolution(s, _samples(s, rng), tol)).passed, r.to_text())
    w = scalar_sub().with_speed(c)
    add("scalar sub-solution", (r := verify_subsolution(w, _samples(w, rng), tol)).passed, r.to_text())
    xs = np.linspace(-w.X, 0.0, 2001)
    defect = float(np.abs(w.energy_defect(xs)).max())
    add("scalar energy identity", defect < 1e-8, f"max relative energy defect {defect:.3e}")
    add("scalar ordering", (r := verify_profile_ordering(w, s)).passed, r.to_text())
    roots = s.root_residuals()

    sup = system_super(c, p)
    sub = system_sub(c, p).with_control(sup.C_s, sup.eta)
    add("system super-solution", (r := verify_supersolution(sup, _samples(sup, rng), tol)).passed, r.to_text())
    add("system sub-solution", (r := verify_subsolution(sub, _samples(sub, rng), tol)).passed, r.to_text())
    roots.update(sup.root_residuals())
    roots.update(sub.root_residuals())
    worst_root = max(roots.values())
    add("root identities", worst_root < 1e-12, "; ".join(f"{k}={v:.2e}" for k, v in roots.items()))
    add("system ordering", (r := verify_profile_ordering(sub, sup)).passed, r.to_text())

    A = float(cfg.verify.get("ms_amplitude", sup.A_sufficient))
    ms = verify_ms_bound(p, sup.C_s, sup.eta, c, A, grid=cfg.grid, cfg=cfg.scheme.replace(t_end=min(cfg.scheme.t_end, 100.0)))
    add("sterile lower bound", ms.passed, f"A={A:.6g}\n" + ms.to_text())

    lo, hi = ordered_pair_runs(c, cfg)
    add("comparison of sub/super runs", (r := verify_ordering(lo, hi)).passed, r.to_text())

    out = _outdir(cfg)
    files = [write_profiles_csv(out / "super_profiles.csv", sup), write_profiles_csv(out / "sub_profiles.csv", sub)]
    lines = [f"construction checks at c={c:g}, tol={tol:g}"]
    for name, passed, text in checks:
        lines.append(f"[{'PASS' if passed else 'FAIL'}] {name}")
        lines.extend("    " + ln for ln in text.splitlines())
    report = "\n".join(lines)
    (out / "verify_report.txt").write_text(report + "\n")
    files.append(out / "verify_report.txt")
    return ExperimentResult("verify", all(p_ for _, p_, _ in checks), report, files, {"checks": checks, "super": sup, "sub": sub})


def run_search(cfg: io.ExperimentConfig) -> ExperimentResult:
    setup = _setup(cfg)
    srch = cfg.search
    lo, hi = (float(v) for v in srch["bracket"])
    rel = float(srch.get("rel_width", 0.01))
    eta = float(srch.get("eta", cfg.release.eta))
    if cfg.kind == "search_amplitude":
        c = float(srch.get("c", cfg.release.c))
        res = critical_amplitude(setup, eta, c, (lo, hi), workers=cfg.workers, rel_width=rel)
        head = f"critical amplitude at c={c:g}, eta={eta:g}"
    else:
        A = float(srch.get("A", cfg.release.A))
        res = critical_speed(setup, A, eta, (lo, hi), workers=cfg.workers, rel_width=rel)
        head = f"critical speed at A={A:g}, eta={eta:g}"
    out = _outdir(cfg)
    hist = io.write_rows(out / "search_history.csv", ["value", "kind", "measured_speed"], [[h.value, h.kind, h.speed] for h in res.history])
    lines = [head, f"value = {res.value:.8g}", f"final bracket = ({res.bracket[0]:.8g}, {res.bracket[1]:.8g})"]
    lines += [f"  {res.parameter}={h.value:.8g}: {h.kind}" for h in res.history]
    report = "\n".join(lines)
    (out / "search_report.txt").write_text(report + "\n")
    return ExperimentResult(cfg.kind, True, report, [hist, out / "search_report.txt"], {"result": res})


RUNNERS = {
    "simulate": run_simulate,
    "figure1": run_figure1,
    "speed": run_speed,
    "verify_constructions": run_verify,
    "search_amplitude": run_search,
    "search_speed": run_search,
}


def run(cfg: io.ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg)
