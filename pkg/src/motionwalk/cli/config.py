"""Experiment configuration: JSON schema, overrides, and construction of laws."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from ..dynamics import ConfigurationError, DynamicalSystem, Profile
from ..group_core import Character, DimensionError, TorusRotation, n_blocks
from ..step_laws import RotationLaw, TranslationLaw, identity_law, monothetic_law, so2_law, torus_basis_law
from ..walk_engine import WalkConfig, geometric_checkpoints

EXPERIMENTS = ("simulate", "haar", "clt", "llt", "slln", "diagnose")
OUTPUT_DIR_ENV = "MOTIONWALK_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "motionwalk-out"

_number = {"type": "number"}
_int = {"type": "integer"}

_DYNAMICS = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "irrational_rotation"}, "gamma": _number, "x0": _number},
            "required": ["kind", "gamma"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "doubling"}, "x0": _number, "seed": _int},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "identity"}, "x0": _number},
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

_PROFILE = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "constant"}, "c": _number},
            "required": ["kind", "c"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "affine_cosine"}, "a": _number, "b": _number},
            "required": ["kind", "a", "b"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "indicator"}, "s": _number},
            "required": ["kind", "s"],
            "additionalProperties": False,
        },
    ]
}

_ANGLES = {"type": "array", "items": _number, "minItems": 1}

_ROTATION = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "identity"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "so2"},
                "theta": _number,
                "profile": _PROFILE,
                "dynamics": _DYNAMICS,
            },
            "required": ["kind", "theta", "profile"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "monothetic"},
                "angles": _ANGLES,
                "profile": _PROFILE,
                "dynamics": _DYNAMICS,
            },
            "required": ["kind", "angles", "profile"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "torus_basis"},
                "angles": _ANGLES,
                "profiles": {"type": "array", "items": _PROFILE, "minItems": 1},
                "dynamics": _DYNAMICS,
            },
            "required": ["kind", "angles", "profiles"],
            "additionalProperties": False,
        },
    ]
}

_THRESHOLDS = {
    "type": "object",
    "properties": {
        "covariance_tolerance": _number,
        "isotropy_tolerance": _number,
        "ratio_band": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "ratio_from": _int,
        "slope_tolerance": _number,
        "slope_half_steps": {"type": "array", "items": _int, "minItems": 2},
        "exact_steps": {"type": "array", "items": _int},
        "max_final_median": _number,
        "component_tolerance": _number,
        "h2_tolerance": _number,
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "walk": {
            "type": "object",
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "n_steps": {"type": "integer", "minimum": 1},
                "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "walkers": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "dynamics": _DYNAMICS,
                "translation": {
                    "type": "object",
                    "properties": {
                        "profiles": {"type": "array", "items": _PROFILE, "minItems": 1},
                        "dynamics": _DYNAMICS,
                    },
                    "required": ["profiles"],
                    "additionalProperties": False,
                },
                "rotation": _ROTATION,
                "track_increments": {"type": "boolean"},
            },
            "required": ["d", "n_steps", "walkers", "seed", "translation"],
            "additionalProperties": False,
        },
        "characters": {"type": "array", "items": {"type": "array", "items": _int, "minItems": 1}},
        "alpha": _number,
        "target": {"oneOf": [{"const": "auto"}, {"type": "array", "items": _number}]},
        "reference_covariance": {"type": "array", "items": {"type": "array", "items": _number}},
        "thresholds": _THRESHOLDS,
        "output_dir": {"type": "string"},
        "format": {"enum": ["csv", "json"]},
        "workers": {"type": "integer", "minimum": 1},
    },
    "required": ["walk"],
    "additionalProperties": False,
}

DEFAULT_THRESHOLDS = {
    "covariance_tolerance": 0.03,
    "isotropy_tolerance": 0.05,
    "ratio_band": [0.9, 1.1],
    "ratio_from": 100,
    "slope_tolerance": 0.1,
    "h2_tolerance": 0.05,
}


class ConfigError(ValueError):
    """Config rejected before any computation; carries a field path."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class ExperimentConfig:
    experiment: str
    walk: WalkConfig
    characters: tuple[Character, ...]
    alpha: float
    target: Any
    reference_covariance: list | None
    thresholds: dict
    output_dir: str
    format: str
    workers: int
    raw: dict = field(repr=False)


def _path(err: jsonschema.ValidationError) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (f".{p}" if parts else str(p)))
    return "".join(parts) or "<root>"


def preset_names() -> list[str]:
    root = resources.files("motionwalk") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_raw(path: str | None = None, preset: str | None = None) -> dict:
    if preset is not None:
        res = resources.files("motionwalk") / "presets" / f"{preset}.json"
        if not res.is_file():
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(preset_names())}")
        text, where = res.read_text(), f"preset {preset}"
    else:
        try:
            text, where = Path(path).read_text(), str(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", where) from None


def apply_overrides(raw: dict, experiment=None, seed=None, walkers=None, steps=None, out=None, workers=None) -> dict:
    cfg = copy.deepcopy(raw)
    walk = cfg.setdefault("walk", {})
    if not isinstance(walk, dict):
        return cfg  # schema validation reports it
    if experiment is not None:
        cfg["experiment"] = experiment
    for key, val in (("seed", seed), ("walkers", walkers), ("n_steps", steps)):
        if val is not None:
            walk[key] = val
    if out is not None:
        cfg["output_dir"] = out
    if workers is not None:
        cfg["workers"] = workers
    return cfg


def _dynamics(spec: dict | None, fallback: DynamicalSystem) -> DynamicalSystem:
    if spec is None:
        return fallback
    kind = spec["kind"]
    if kind == "irrational_rotation":
        return DynamicalSystem.rotation(spec["gamma"], spec.get("x0", 0.0))
    if kind == "doubling":
        return DynamicalSystem.doubling(spec.get("x0", 0.0), spec.get("seed", 0))
    return DynamicalSystem.identity(spec.get("x0", 0.0))


def _profile(spec: dict, bound: float) -> Profile:
    kind = spec["kind"]
    if kind == "constant":
        return Profile.constant(spec["c"], bound)
    if kind == "affine_cosine":
        return Profile.affine_cosine(spec["a"], spec["b"], bound)
    return Profile.indicator(spec["s"], bound)


def _rotation(spec: dict | None, d: int, shared: DynamicalSystem) -> RotationLaw:
    if spec is None or spec["kind"] == "identity":
        return identity_law(d)
    ds = _dynamics(spec.get("dynamics"), shared)
    kind = spec["kind"]
    if kind == "so2":
        return so2_law(spec["theta"], _profile(spec["profile"], 1.0), ds, dim=d)
    if kind == "monothetic":
        angles = list(spec["angles"])
        if len(angles) != n_blocks(d):
            raise ConfigError(f"needs {n_blocks(d)} block angles for d={d}", "walk.rotation.angles")
        return monothetic_law(TorusRotation(d, tuple(angles)), _profile(spec["profile"], 1.0), ds)
    angles = list(spec["angles"])
    if len(spec["profiles"]) != len(angles):
        raise ConfigError("one profile per basis angle is required", "walk.rotation.profiles")
    r = len(angles)
    profiles = [_profile(p, 1.0 / r) for p in spec["profiles"]]
    return torus_basis_law(angles, profiles, ds, dim=d)


def resolve(raw: dict) -> ExperimentConfig:
    """Validate ``raw`` against the schema and build every law; nothing is simulated."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(err.message, _path(err))
    experiment = raw.get("experiment")
    if experiment is None:
        raise ConfigError("no experiment given (positional argument or 'experiment' key)", "experiment")
    w = raw["walk"]
    d = w["d"]
    try:
        shared = _dynamics(w.get("dynamics"), DynamicalSystem.identity())
        tspec = w["translation"]
        if len(tspec["profiles"]) != d:
            raise ConfigError(f"expected {d} profiles, got {len(tspec['profiles'])}", "walk.translation.profiles")
        tlaw = TranslationLaw(
            tuple(_profile(p, 1.0 / d) for p in tspec["profiles"]),
            _dynamics(tspec.get("dynamics"), shared),
        )
        rlaw = _rotation(w.get("rotation"), d, shared)
        n_steps = w["n_steps"]
        checkpoints = tuple(w["checkpoints"]) if "checkpoints" in w else geometric_checkpoints(n_steps)
        walk = WalkConfig(
            tlaw,
            n_steps,
            rlaw,
            checkpoints,
            ensemble_size=w["walkers"],
            master_seed=w["seed"],
            track_increments=w.get("track_increments", experiment == "slln"),
        )
    except ConfigError:
        raise
    except (ConfigurationError, DimensionError) as exc:
        raise ConfigError(str(exc), "walk") from None

    chars = []
    for q, idx in enumerate(raw.get("characters", [])):
        if len(idx) != rlaw.r:
            raise ConfigError(f"character needs {rlaw.r} indices, got {len(idx)}", f"characters[{q}]")
        chars.append(Character(tuple(idx)))
    if experiment == "haar" and not chars:
        chars = [Character((k,) + (0,) * (rlaw.r - 1)) for k in range(1, 6)] if rlaw.r else []
    target = raw.get("target", "auto")
    if target != "auto" and len(target) != d:
        raise ConfigError(f"target needs {d} components", "target")
    ref = raw.get("reference_covariance")
    if ref is not None and (len(ref) != d or any(len(row) != d for row in ref)):
        raise ConfigError(f"reference covariance must be {d} x {d}", "reference_covariance")
    if experiment == "llt" and not walk.lattice:
        raise ConfigError("llt needs an unrotated lattice walk (rotation kind 'identity')", "walk.rotation")
    if experiment == "haar" and rlaw.is_identity:
        raise ConfigError("haar needs a rotation law", "walk.rotation")
    thresholds = dict(DEFAULT_THRESHOLDS)
    thresholds.update(raw.get("thresholds", {}))
    out = raw.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR
    return ExperimentConfig(
        experiment,
        walk,
        tuple(chars),
        float(raw.get("alpha", 0.75)),
        target,
        ref,
        thresholds,
        out,
        raw.get("format", "csv"),
        raw.get("workers", 1),
        raw,
    )


def resolved_echo(cfg: ExperimentConfig) -> dict:
    """The config with every default filled in; rerunning it reproduces the report.

    ``output_dir`` and ``workers`` are left out: neither affects the metrics.
    """
    echo = copy.deepcopy(cfg.raw)
    echo.pop("output_dir", None)
    echo.pop("workers", None)
    echo["experiment"] = cfg.experiment
    echo["walk"]["checkpoints"] = list(cfg.walk.checkpoints)
    echo["walk"]["track_increments"] = cfg.walk.track_increments
    echo["characters"] = [list(c.indices) for c in cfg.characters]
    echo["alpha"] = cfg.alpha
    echo["target"] = cfg.target
    echo["thresholds"] = cfg.thresholds
    echo["format"] = cfg.format
    return echo
