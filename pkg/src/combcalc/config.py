"""Run configuration for batch runs: loading, validation, defaults, echo.

A run is described by a single JSON file (nested key/value); command-line
flags may override scalar fields only.  Validation failures carry the path
of the offending field so a bad config is diagnosable without reading code.
"""
from __future__ import annotations

import cmath
import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Sector
from .operators import Operator, catalog_kinds, make_operator

DEFAULT_TOL = 1e-8
DEFAULT_N_MAX = 4
DEFAULT_SEED = 42


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SectorConfig:
    axis_angle: float   # direction of the sector axis, radians
    half_angle: float   # beta_k, radians

    def sector(self) -> Sector:
        return Sector(cmath.exp(1j * self.axis_angle), self.half_angle)


@dataclass(frozen=True)
class RunConfig:
    operator: dict
    sectors: tuple[SectorConfig, SectorConfig]
    beta: float
    C0: float
    c0: float
    c1_multiplier: float = 2.0
    alpha: float | None = None
    r_min: float = 1e-3
    clip_radius: float = 1.0
    probe_density: int = 25
    max_bisections: int = 40
    norm_method: str = "auto"
    growth_form: str = "expPower"
    probe_radii: tuple[float, ...] = ()
    tol: float = DEFAULT_TOL
    truncation_tol: float = 5e-2
    rank_threshold: float = 1e-6
    n_max: int = DEFAULT_N_MAX
    out_dir: str = "runs"
    seed: int = DEFAULT_SEED

    def make_operator(self) -> Operator:
        params = {k: v for k, v in self.operator.items() if k != "kind"}
        return make_operator(self.operator["kind"], **params)

    @property
    def p(self) -> float:
        return math.pi / (2.0 * self.beta)


# field path -> (json key, attribute, type check, range check, message)
_SCALARS = {
    "beta": (float, lambda v: 0.0 < v <= math.pi / 2, "must lie in (0, pi/2]"),
    "C0": (float, lambda v: v > 0.0, "must be positive"),
    "c0": (float, lambda v: v > 0.0, "must be positive"),
    "c1Multiplier": (float, lambda v: v >= 1.0, "must be >= 1"),
    "alpha": (float, lambda v: 0.0 < v < math.pi / 2, "must lie in (0, pi/2)"),
    "rMin": (float, lambda v: 0.0 < v < 1.0, "must lie in (0, 1)"),
    "clipRadius": (float, lambda v: v > 0.0, "must be positive"),
    "probeDensity": (int, lambda v: v >= 2, "must be >= 2"),
    "maxBisections": (int, lambda v: v >= 1, "must be >= 1"),
    "tol": (float, lambda v: 0.0 < v <= 1e-2, "must lie in (0, 1e-2]"),
    "truncationTol": (float, lambda v: 0.0 < v < 1.0, "must lie in (0, 1)"),
    "rankThreshold": (float, lambda v: 0.0 < v < 1.0, "must lie in (0, 1)"),
    "nMax": (int, lambda v: 1 <= v <= 8, "must lie in 1..8"),
    "seed": (int, lambda v: v >= 0, "must be nonnegative"),
}

_KEY_TO_ATTR = {
    "c1Multiplier": "c1_multiplier",
    "rMin": "r_min",
    "clipRadius": "clip_radius",
    "probeDensity": "probe_density",
    "maxBisections": "max_bisections",
    "normMethod": "norm_method",
    "growthForm": "growth_form",
    "probeRadii": "probe_radii",
    "truncationTol": "truncation_tol",
    "rankThreshold": "rank_threshold",
    "nMax": "n_max",
    "outDir": "out_dir",
}

_KNOWN_KEYS = set(_SCALARS) | set(_KEY_TO_ATTR) | {
    "operator", "sectors", "normMethod", "growthForm", "probeRadii", "outDir",
}


def _want(raw: dict, key: str, path: str):
    typ, ok, msg = _SCALARS[key]
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {type(val).__name__}")
    if typ is int and int(val) != val:
        raise ConfigError(f"{path}: expected an integer, got {val!r}")
    val = typ(val)
    if not ok(val):
        raise ConfigError(f"{path}: {msg} (got {val!r})")
    return val


def _parse_operator(raw, path: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object, got {type(raw).__name__}")
    if "kind" not in raw:
        raise ConfigError(f"{path}.kind: missing required field")
    kind = raw["kind"]
    if kind not in catalog_kinds():
        raise ConfigError(
            f"{path}.kind: unknown operator kind {kind!r}; "
            f"available: {', '.join(catalog_kinds())}"
        )
    out = {"kind": kind}
    for key, val in raw.items():
        if key == "kind":
            continue
        if isinstance(val, list):
            out[key] = np.asarray(val)
        else:
            out[key] = val
    return out


def _parse_sector(raw, path: str) -> SectorConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object, got {type(raw).__name__}")
    for key in ("axisAngle", "halfAngle"):
        if key not in raw:
            raise ConfigError(f"{path}.{key}: missing required field")
        if isinstance(raw[key], bool) or not isinstance(raw[key], (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number")
    extra = set(raw) - {"axisAngle", "halfAngle"}
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(sorted(extra))}")
    half = float(raw["halfAngle"])
    if not 0.0 < half < math.pi / 2:
        raise ConfigError(f"{path}.halfAngle: must lie in (0, pi/2) (got {half!r})")
    return SectorConfig(float(raw["axisAngle"]), half)


def parse_config(raw: dict) -> RunConfig:
    """Validate a parsed JSON document and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"top level: unknown field(s) {', '.join(sorted(unknown))}")
    for key in ("operator", "sectors", "beta", "C0", "c0"):
        if key not in raw:
            raise ConfigError(f"{key}: missing required field")

    operator = _parse_operator(raw["operator"], "operator")
    secs = raw["sectors"]
    if not isinstance(secs, list) or len(secs) != 2:
        raise ConfigError("sectors: exactly two sectors required")
    sectors = tuple(_parse_sector(s, f"sectors[{i}]") for i, s in enumerate(secs))

    kwargs = {"operator": operator, "sectors": sectors}
    attr_of = {**{k: k for k in _SCALARS}, **_KEY_TO_ATTR}
    for key in _SCALARS:
        if key in raw:
            if key == "alpha" and raw[key] is None:
                continue  # null = pick the tilt automatically; echoes re-load
            kwargs[attr_of[key]] = _want(raw, key, key)
    for key in ("normMethod", "growthForm"):
        if key in raw:
            val = raw[key]
            if not isinstance(val, str):
                raise ConfigError(f"{key}: expected a string")
            kwargs[attr_of[key]] = val
    if "outDir" in raw:
        if not isinstance(raw["outDir"], str):
            raise ConfigError("outDir: expected a string")
        kwargs["out_dir"] = raw["outDir"]
    if "probeRadii" in raw:
        val = raw["probeRadii"]
        if not isinstance(val, list) or not all(
                isinstance(r, (int, float)) and not isinstance(r, bool) for r in val):
            raise ConfigError("probeRadii: expected a list of numbers")
        kwargs["probe_radii"] = tuple(float(r) for r in val)

    cfg = RunConfig(**kwargs)

    if cfg.norm_method not in ("auto", "denseSVD", "powerIteration"):
        raise ConfigError(
            f"normMethod: must be auto, denseSVD or powerIteration (got {cfg.norm_method!r})")
    if cfg.growth_form not in ("expPower", "power"):
        raise ConfigError(f"growthForm: must be expPower or power (got {cfg.growth_form!r})")
    b1, b2 = (s.half_angle for s in cfg.sectors)
    if cfg.beta <= max(b1, b2):
        raise ConfigError(
            "beta: Theorem precondition violated: beta must exceed "
            f"max(beta_1, beta_2) (got beta={cfg.beta!r}, "
            f"beta_1={b1!r}, beta_2={b2!r})")
    if cfg.alpha is not None and cfg.alpha >= min(b1, b2):
        raise ConfigError(
            f"alpha: must be smaller than both sector half-angles (got {cfg.alpha!r})")
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    return parse_config(raw)


def effective_config_dict(cfg: RunConfig) -> dict:
    """The fully defaulted config, ready to echo next to run artifacts."""
    op = {}
    for key, val in cfg.operator.items():
        op[key] = val.tolist() if isinstance(val, np.ndarray) else val
    return {
        "operator": op,
        "sectors": [
            {"axisAngle": s.axis_angle, "halfAngle": s.half_angle} for s in cfg.sectors
        ],
        "beta": cfg.beta,
        "C0": cfg.C0,
        "c0": cfg.c0,
        "c1Multiplier": cfg.c1_multiplier,
        "alpha": cfg.alpha,
        "rMin": cfg.r_min,
        "clipRadius": cfg.clip_radius,
        "probeDensity": cfg.probe_density,
        "maxBisections": cfg.max_bisections,
        "normMethod": cfg.norm_method,
        "growthForm": cfg.growth_form,
        "probeRadii": list(cfg.probe_radii),
        "tol": cfg.tol,
        "truncationTol": cfg.truncation_tol,
        "rankThreshold": cfg.rank_threshold,
        "nMax": cfg.n_max,
        "outDir": cfg.out_dir,
        "seed": cfg.seed,
    }


def config_to_json(cfg: RunConfig) -> str:
    return json.dumps(effective_config_dict(cfg), sort_keys=True, indent=2)


def override_scalars(cfg: RunConfig, *, out_dir=None, seed=None, tol=None) -> RunConfig:
    """Apply command-line overrides; only scalar fields may be overridden."""
    updates = {}
    if out_dir is not None:
        updates["out_dir"] = str(out_dir)
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed: must be nonnegative")
        updates["seed"] = int(seed)
    if tol is not None:
        if not 0.0 < tol <= 1e-2:
            raise ConfigError(f"tol: must lie in (0, 1e-2] (got {tol!r})")
        updates["tol"] = float(tol)
    return dataclasses.replace(cfg, **updates) if updates else cfg
