"""Experiment configuration: strict JSON parsing and a stable content hash.

Two failure classes are kept apart. ``SchemaError`` means the file cannot be
read as a config at all (bad JSON, unknown field, wrong type). ``ConfigInvalid``
carries every semantic violation (cutoff exceeded, non-positive floor, ...).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from . import potential as pot
from .quasilattice import DEFAULT_MAX_DIM, GrowthSchedule, SchemaError
from .resonance import Thresholds
from .spectral import ContinuationParams
from .synthesis import Grid


class ConfigInvalid(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


_TOP = {"potential", "schedule", "thresholds", "grids", "lambdas", "levels", "k", "fraction",
        "seed", "output_dir"}
_SCHEDULE = {"R1", "r1", "factor", "R_max", "r_max", "max_dim"}
_THRESH = {"delta_scale", "delta_exponent", "rho", "eps0", "full_s_scan", "overlap_floor",
           "gap_rel", "eta", "lambda_floor"}
_GRIDS = {"phi_resolution", "k_grid", "spatial"}
_KGRID = {"x0", "x1", "y0", "y1", "n"}
_SPATIAL = {"x0", "x1", "y0", "y1", "nx", "ny", "convention"}
_FRACTION = {"radii", "samples", "level", "annulus"}


def _block(parent: dict, name: str, allowed: set, required: bool = True) -> dict:
    if name not in parent:
        if required:
            raise SchemaError(f"missing block {name!r}")
        return {}
    b = parent[name]
    if not isinstance(b, dict):
        raise SchemaError(f"{name} must be an object")
    extra = set(b) - allowed
    if extra:
        raise SchemaError(f"unknown field(s) in {name}: {sorted(extra)}")
    return b


def _num(b: dict, key: str, default=None, where: str = "") -> Optional[float]:
    v = b.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}{key} must be a number")
    return float(v)


def _int(b: dict, key: str, default=None, where: str = "") -> Optional[int]:
    v = b.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}{key} must be an integer")
    return v


def _bool(b: dict, key: str, default: bool, where: str = "") -> bool:
    v = b.get(key, default)
    if not isinstance(v, bool):
        raise SchemaError(f"{where}{key} must be a boolean")
    return v


@dataclass(frozen=True)
class KGrid:
    x0: float
    x1: float
    y0: float
    y1: float
    n: int

    def points(self):
        import numpy as np
        xs = np.linspace(self.x0, self.x1, self.n)
        ys = np.linspace(self.y0, self.y1, self.n)
        return [(float(x), float(y)) for y in ys for x in xs]


@dataclass(frozen=True)
class FractionPlan:
    radii: tuple
    samples: int
    level: int
    annulus: bool


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    potential: pot.PotentialSpec
    schedule: GrowthSchedule
    thresholds: Thresholds
    continuation: ContinuationParams
    eta: float
    lambda_floor: float
    phi_resolution: int
    k_grid: KGrid
    spatial: Grid
    convention: str
    lambdas: tuple
    levels: int
    k_points: tuple
    fraction: FractionPlan
    seed: Optional[int]
    output_dir: str
    normalized: dict

    def config_hash(self) -> str:
        text = json.dumps(self.normalized, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def parse(data: Any) -> ExperimentConfig:
    """Build a config from decoded JSON; raises SchemaError or ConfigInvalid."""
    if not isinstance(data, dict):
        raise SchemaError("config must be a JSON object")
    extra = set(data) - _TOP
    if extra:
        raise SchemaError(f"unknown top-level field(s): {sorted(extra)}")
    spec = pot.from_config(data.get("potential") if "potential" in data else _missing("potential"))

    sb = _block(data, "schedule", _SCHEDULE)
    factor = sb.get("factor", 2)
    if isinstance(factor, list):
        if not all(isinstance(f, (int, float)) and not isinstance(f, bool) for f in factor):
            raise SchemaError("schedule.factor entries must be numbers")
        factor = tuple(factor)
    elif isinstance(factor, bool) or not isinstance(factor, (int, float)):
        raise SchemaError("schedule.factor must be a number or a list of numbers")
    sched_args = dict(R1=_int(sb, "R1", 1, "schedule."), r1=_int(sb, "r1", 1, "schedule."),
                      factor=factor, R_max=_int(sb, "R_max", None, "schedule."),
                      r_max=_int(sb, "r_max", None, "schedule."),
                      max_dim=_int(sb, "max_dim", DEFAULT_MAX_DIM, "schedule."))

    tb = _block(data, "thresholds", _THRESH)
    w = "thresholds."
    th_args = dict(delta_scale=_num(tb, "delta_scale", 0.1, w), rho=_num(tb, "rho", 0.1, w),
                   eps0=_num(tb, "eps0", 0.0, w), full_s_scan=_bool(tb, "full_s_scan", False, w),
                   delta_exponent=_num(tb, "delta_exponent", None, w))
    overlap_floor = _num(tb, "overlap_floor", 0.5, w)
    gap_rel = _num(tb, "gap_rel", 1e-8, w)
    eta = _num(tb, "eta", 0.2, w)
    lambda_floor = _num(tb, "lambda_floor", 1.0, w)

    gb = _block(data, "grids", _GRIDS)
    phi_res = _int(gb, "phi_resolution", 1024, "grids.")
    kb = _block(gb, "k_grid", _KGRID, required=False)
    kgrid = KGrid(_num(kb, "x0", 2.0), _num(kb, "x1", 4.0), _num(kb, "y0", 2.0), _num(kb, "y1", 4.0),
                  _int(kb, "n", 64, "k_grid."))
    spb = _block(gb, "spatial", _SPATIAL, required=False)
    grid = Grid(_num(spb, "x0", 0.0), _num(spb, "x1", 10.0), _num(spb, "y0", 0.0), _num(spb, "y1", 10.0),
                _int(spb, "nx", 64, "spatial."), _int(spb, "ny", 64, "spatial."))
    convention = spb.get("convention", "absorbed")
    if not isinstance(convention, str):
        raise SchemaError("spatial.convention must be a string")

    lambdas = data.get("lambdas", [])
    if not isinstance(lambdas, list) or any(isinstance(x, bool) or not isinstance(x, (int, float))
                                            for x in lambdas):
        raise SchemaError("lambdas must be a list of numbers")
    levels = _int(data, "levels", 3)
    kpts = data.get("k", [])
    if not isinstance(kpts, list) or any(not isinstance(p, list) or len(p) != 2 or
                                         any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in p)
                                         for p in kpts):
        raise SchemaError("k must be a list of [kx, ky] pairs")
    fb = _block(data, "fraction", _FRACTION, required=False)
    radii = fb.get("radii", [4, 8, 16])
    if not isinstance(radii, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in radii):
        raise SchemaError("fraction.radii must be a list of numbers")
    plan = FractionPlan(tuple(float(r) for r in radii), _int(fb, "samples", 1000, "fraction."),
                        _int(fb, "level", 1, "fraction."), _bool(fb, "annulus", False, "fraction."))
    seed = _int(data, "seed", None)
    out = data.get("output_dir", "out")
    if not isinstance(out, str):
        raise SchemaError("output_dir must be a string")

    problems = [f"potential: {p}" for p in pot.validate(spec)]
    schedule = thresholds = None
    try:
        schedule = GrowthSchedule(**sched_args)
    except ValueError as exc:
        problems.append(f"schedule: {exc}")
    try:
        thresholds = Thresholds(**th_args)
    except ValueError as exc:
        problems.append(f"thresholds: {exc}")
    if not 0 < overlap_floor <= 1:
        problems.append("thresholds: overlap_floor must lie in (0, 1]")
    if not gap_rel > 0:
        problems.append("thresholds: gap_rel must be positive")
    if not 0 < eta < 1:
        problems.append("thresholds: eta must lie in (0, 1)")
    if not lambda_floor > 0:
        problems.append("thresholds: lambda_floor must be positive")
    if phi_res < 1024:
        problems.append("grids: phi_resolution must be >= 1024")
    if kgrid.n < 1 or grid.nx < 1 or grid.ny < 1:
        problems.append("grids: resolutions must be positive")
    if convention not in pot.CONVENTIONS:
        problems.append(f"grids: unknown convention {convention!r}")
    if any(not (math.isfinite(x) and x >= lambda_floor) for x in lambdas):
        problems.append(f"lambdas: every value must be finite and >= lambda_floor={lambda_floor}")
    if levels < 1:
        problems.append("levels must be >= 1")
    if plan.samples < 1000 or plan.level < 1 or any(r <= 0 for r in plan.radii):
        problems.append("fraction: need samples >= 1000, level >= 1 and positive radii")
    if problems:
        raise ConfigInvalid(problems)

    normalized = {
        "potential": spec.to_config(),
        "schedule": {**sched_args, "factor": list(factor) if isinstance(factor, tuple) else factor},
        "thresholds": {**th_args, "overlap_floor": overlap_floor, "gap_rel": gap_rel, "eta": eta,
                       "lambda_floor": lambda_floor},
        "grids": {"phi_resolution": phi_res, "k_grid": vars(kgrid).copy(),
                  "spatial": {**vars(grid), "convention": convention}},
        "lambdas": [float(x) for x in lambdas], "levels": levels,
        "k": [[float(a), float(b)] for a, b in kpts],
        "fraction": {"radii": list(plan.radii), "samples": plan.samples, "level": plan.level,
                     "annulus": plan.annulus},
        "seed": seed, "output_dir": out,
    }
    return ExperimentConfig(spec, schedule, thresholds, ContinuationParams(overlap_floor, gap_rel), eta,
                            lambda_floor, phi_res, kgrid, grid, convention,
                            tuple(float(x) for x in lambdas), levels,
                            tuple((float(a), float(b)) for a, b in kpts), plan, seed, out, normalized)


def _missing(name: str):
    raise SchemaError(f"missing block {name!r}")


def load(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return parse(data)


def sample_config_text() -> str:
    return resources.files("qpmomentum").joinpath("data/sample_config.json").read_text()


def sample_config() -> ExperimentConfig:
    return parse(json.loads(sample_config_text()))
