"""Experiment configuration (YAML) and CSV input/output."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .model import ModelParams
from .release import ReleaseProfile
from .solver import Grid, SchemeConfig, Trajectory

KINDS = ("simulate", "figure1", "speed", "verify_constructions", "search_amplitude", "search_speed")
FMT = "%.17g"


class ConfigError(ValueError):
    pass


# experiments whose fronts travel far get a wider default domain
WIDE_GRID = {"x_min": -300.0, "x_max": 400.0, "dx": 0.25}
DEFAULT_GRIDS = {
    "simulate": {"x_min": -100.0, "x_max": 300.0, "dx": 0.25},
    "figure1": WIDE_GRID,
    "speed": {"x_min": -100.0, "x_max": 300.0, "dx": 0.25},
    "verify_constructions": WIDE_GRID,
    "search_amplitude": WIDE_GRID,
    "search_speed": WIDE_GRID,
}
DEFAULT_X0 = {"speed": -70.0}
DEFAULT_BRACKETS = {"search_amplitude": (0.0, 600.0), "search_speed": (-0.5, -0.3)}


@dataclass
class ExperimentConfig:
    kind: str
    model: ModelParams = field(default_factory=ModelParams)
    grid: Grid = field(default_factory=Grid)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    release: ReleaseProfile = field(default_factory=ReleaseProfile)
    out: Path = Path("results")
    seed: int = 0
    x0: float = 0.0
    workers: int = 1
    search: dict = field(default_factory=dict)
    speed: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)


_BLOCKS = {"kind", "model", "grid", "scheme", "release", "out", "seed", "initial", "workers", "search", "speed", "verify"}


def _block(raw: dict, name: str, allowed) -> dict:
    d = raw.get(name) or {}
    if not isinstance(d, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in '{name}': {sorted(extra)}")
    return d


def _grid(d: dict, kind: str) -> Grid:
    g = {**DEFAULT_GRIDS[kind], **d}
    try:
        return Grid.from_spacing(float(g["x_min"]), float(g["x_max"]), float(g["dx"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed configuration; every failure raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    extra = set(raw) - _BLOCKS
    if extra:
        raise ConfigError(f"unknown top-level key(s): {sorted(extra)}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    try:
        model = ModelParams.from_dict(_block(raw, "model", ModelParams.__dataclass_fields__))
        scheme = SchemeConfig(**{k: float(v) if k != "boundary" else v for k, v in _block(raw, "scheme", SchemeConfig.__dataclass_fields__).items()})
        release = ReleaseProfile.from_dict(_block(raw, "release", ("A", "eta", "c", "mode")))
        grid = _grid(_block(raw, "grid", ("x_min", "x_max", "dx")), kind)
        init = _block(raw, "initial", ("x0",))
        x0 = float(init.get("x0", DEFAULT_X0.get(kind, 0.0)))
        seed = int(raw.get("seed", 0))
        workers = int(raw.get("workers", 1))
        search = _block(raw, "search", ("bracket", "A", "eta", "c", "rel_width"))
        speed = _block(raw, "speed", ("fit_from",))
        verify = _block(raw, "verify", ("c", "tol", "ms_amplitude"))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if not grid.x_min < x0 < grid.x_max:
        raise ConfigError("initial.x0 must lie inside the grid")
    if kind == "verify_constructions" and not float(verify.get("c", -0.3)) < 0:
        raise ConfigError("verify.c must be negative")
    if kind in ("search_amplitude", "search_speed"):
        br = search.setdefault("bracket", list(DEFAULT_BRACKETS[kind]))
        if not (isinstance(br, (list, tuple)) and len(br) == 2):
            raise ConfigError("search.bracket must be a pair [lo, hi]")
        try:
            search["bracket"] = [float(v) for v in br]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"search.bracket: {exc}") from exc
    return ExperimentConfig(
        kind, model, grid, scheme, release, Path(raw.get("out", "results")), seed, x0, workers, search, speed, verify
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return config_from_dict(raw or {})


# -- CSV -------------------------------------------------------------------


def _write(path, header, cols) -> Path:
    path = Path(path)
    data = np.column_stack([np.asarray(c, dtype=float) for c in cols]) if cols else np.empty((0, len(header)))
    np.savetxt(path, data, fmt=FMT, delimiter=",", header=",".join(header), comments="")
    return path


def _read(path, header):
    path = Path(path)
    with path.open() as fh:
        got = fh.readline().strip().split(",")
    if got != list(header):
        raise ValueError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data.reshape(-1, len(header))


def write_snapshots(path, traj: Trajectory) -> Path:
    x = traj.grid.x
    nt, nx = len(traj.times), x.size
    cols = [np.repeat(traj.times, nx), np.tile(x, nt)] + [getattr(traj, k).ravel() for k in ("E", "F", "M", "Ms")]
    return _write(path, ["t", "x", "E", "F", "M", "Ms"], cols)


@dataclass
class SnapshotTable:
    times: np.ndarray
    x: np.ndarray
    E: np.ndarray
    F: np.ndarray
    M: np.ndarray
    Ms: np.ndarray


def read_snapshots(path) -> SnapshotTable:
    d = _read(path, ["t", "x", "E", "F", "M", "Ms"])
    times = np.unique(d[:, 0])
    nt = times.size
    nx = d.shape[0] // nt
    shape = (nt, nx)
    return SnapshotTable(times, d[:nx, 1].copy(), *(d[:, k].reshape(shape) for k in range(2, 6)))


def write_diagnostics(path, traj: Trajectory) -> Path:
    t, clipped, dt = traj.diagnostics.as_arrays()
    return _write(path, ["t", "clipped_mass", "dt"], [t, clipped, dt])


def read_diagnostics(path):
    d = _read(path, ["t", "clipped_mass", "dt"])
    return d[:, 0], d[:, 1], d[:, 2]


def write_front(path, ft) -> Path:
    return _write(path, ["t", "front_x"], [ft.times, ft.positions])


def read_front(path):
    d = _read(path, ["t", "front_x"])
    return d[:, 0], d[:, 1]


def write_rows(path, header, rows) -> Path:
    """Small mixed-type tables (summaries, search histories)."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else FMT % v
    return str(v)
