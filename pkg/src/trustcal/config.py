"""Experiment configuration: YAML files validated against a JSON schema.

Every key has a default, so an empty file is a valid configuration (Normal
model, KS statistic). Unknown keys are rejected. The schema is published
as :data:`CONFIG_SCHEMA` and printed by ``trustcal config-schema``.

Seeding rule: every random stream is derived from the master seed with
:func:`trustcal._seeding.derive_seed` by appending a key path, for example
``(master, "replicate", r, "calibration")`` for the calibration set of
replicate ``r`` or ``(..., "eval", g)`` for evaluation point ``g``. Streams
depend only on their keys, so execution order and ``--jobs`` cannot change
results.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema
import yaml

from .models import MODEL_REGISTRY
from .statistics import STATISTIC_KINDS

__all__ = [
    "CONFIG_SCHEMA",
    "DEFAULTS",
    "METHODS",
    "ConfigError",
    "load_config",
    "resolve_config",
    "config_hash",
]

METHODS = ("trust", "trustpp", "trustpp-tuned", "mc", "asymptotic", "oracle", "boosting")

DEFAULTS = {
    "model": {"name": "normal", "overrides": {}},
    "statistic": {"name": "ks", "posterior": {"mode": "auto", "n_points_1d": 2049, "n_points_2d": 257}},
    "methods": ["trust", "trustpp", "mc", "asymptotic"],
    "alpha": 0.05,
    "beta": 0.05,
    "n": 10,
    "B": 10000,
    "split": False,
    "split_fraction": 0.5,
    "tree": {"min_samples_split": 100, "ccp_alpha": 0.001, "max_depth": None},
    "forest": {"n_trees": 200, "M": None, "min_samples_split": 100, "max_depth": None, "empty": "error"},
    "tune": {"B_tune": 500, "n_sim": 500, "M_grid": None},
    "mc": {"n_mc": 500},
    "oracle": {"n_oracle": 100000, "nu_per_dim": 50, "invariant_dims": []},
    "nuisance": {"depth_limit": None, "max_per_dim": None},
    "grid": {"confset_per_dim": 1000, "eval_per_dim": 100, "nu_per_mu": 1},
    "evaluation": {"n_sim": 1000},
    "replicates": None,
    "seed": 0,
    "out": "results",
    "jobs": 1,
}

_pos_int = {"type": "integer", "minimum": 1}
_opt_pos_int = {"type": ["integer", "null"], "minimum": 1}
_unit = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


CONFIG_SCHEMA = _obj({
    "model": _obj({
        "name": {"enum": sorted(MODEL_REGISTRY)},
        "overrides": {"type": "object"},
    }),
    "statistic": _obj({
        "name": {"enum": list(STATISTIC_KINDS)},
        "posterior": _obj({
            "mode": {"enum": ["auto", "conjugate", "quadrature-1d", "quadrature-2d"]},
            "n_points_1d": {"type": "integer", "minimum": 3},
            "n_points_2d": {"type": "integer", "minimum": 3},
        }),
    }),
    "methods": {"type": "array", "items": {"enum": list(METHODS)}, "minItems": 1, "uniqueItems": True},
    "alpha": _unit,
    "beta": _unit,
    "n": _pos_int,
    "B": {"type": "integer", "minimum": 2},
    "split": {"type": "boolean"},
    "split_fraction": _unit,
    "tree": _obj({
        "min_samples_split": {"type": "integer", "minimum": 2},
        "ccp_alpha": {"type": "number", "minimum": 0},
        "max_depth": _opt_pos_int,
    }),
    "forest": _obj({
        "n_trees": _pos_int,
        "M": {"oneOf": [{"type": "null"}, _pos_int, {"const": "tune"}]},
        "min_samples_split": {"type": "integer", "minimum": 2},
        "max_depth": _opt_pos_int,
        "empty": {"enum": ["error", "relax"]},
    }),
    "tune": _obj({
        "B_tune": _pos_int,
        "n_sim": _pos_int,
        "M_grid": {"type": ["array", "null"], "items": _pos_int, "minItems": 1},
    }),
    "mc": _obj({"n_mc": _pos_int}),
    "oracle": _obj({
        "n_oracle": _pos_int,
        "nu_per_dim": {"oneOf": [_pos_int, {"type": "array", "items": _pos_int}]},
        "invariant_dims": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    }),
    "nuisance": _obj({"depth_limit": _opt_pos_int, "max_per_dim": _opt_pos_int}),
    "grid": _obj({"confset_per_dim": {"type": "integer", "minimum": 2},
                  "eval_per_dim": {"type": "integer", "minimum": 1}, "nu_per_mu": _pos_int}),
    "evaluation": _obj({"n_sim": _pos_int}),
    "replicates": _opt_pos_int,
    "seed": {"type": "integer", "minimum": 0},
    "out": {"type": "string"},
    "jobs": {"type": "integer"},
})


class ConfigError(ValueError):
    pass


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "overrides":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(raw: dict | None = None, **cli) -> dict:
    """Validate ``raw`` against the schema, fill defaults and apply CLI
    overrides (``None`` values are ignored).

    The replicate count defaults to 50 for models without nuisance
    parameters and 15 otherwise.
    """
    raw = raw or {}
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    for key, value in cli.items():
        if value is not None:
            cfg[key] = value
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid setting {where}: {exc.message}") from None
    if cfg["replicates"] is None:
        model = MODEL_REGISTRY[cfg["model"]["name"]]
        cfg["replicates"] = 15 if model().has_nuisance else 50
    if cfg["forest"]["M"] is not None and cfg["forest"]["M"] != "tune" and cfg["forest"]["M"] > cfg["forest"]["n_trees"]:
        raise ConfigError("forest.M must not exceed forest.n_trees")
    return cfg


def load_config(path=None, **cli) -> dict:
    """Read a YAML file (or nothing) and resolve it."""
    raw = {}
    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    return resolve_config(raw, **cli)


def config_hash(cfg: dict, keys=None) -> str:
    """Short stable hash of the settings that determine a stage's output.
    Settings that only affect how work is scheduled are excluded."""
    data = {k: v for k, v in cfg.items() if k not in ("out", "jobs")}
    if keys is not None:
        data = {k: data[k] for k in keys}
    blob = json.dumps(data, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
