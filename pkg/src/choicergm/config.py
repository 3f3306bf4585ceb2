"""YAML run configuration with schema validation."""

from __future__ import annotations

import copy
from pathlib import Path

import jsonschema
import yaml

_NUM = {"type": "number"}
_INT0 = {"type": "integer", "minimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_RULE = {"oneOf": [{"type": "string"}, {"type": "object"}]}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


_TERM = {"oneOf": [{"type": "string"}, _obj({
    "kind": {"type": "string"}, "vertex": {"type": "integer"}, "attribute": {"type": "string"},
    "level": {"type": ["string", "number"]}, "covariate": {"type": "string"}}, ["kind"])]}

_CHAIN = {"burn_in": _INT0, "thin": _INT1, "n_samples": _INT1,
          "initial": {"oneOf": [{"enum": ["empty", "full", "dual"]},
                                {"type": "array", "prefixItems": [{"const": "random"}, _NUM],
                                 "minItems": 2, "maxItems": 2}]}}

SCHEMA = _obj({
    "seed": {"type": "integer", "minimum": 0},
    "threads": _INT1,
    "data": _obj({
        "network": {"type": "string"},
        "format": {"enum": ["edge_list_csv", "adjacency_csv"]},
        "directed": {"type": "boolean"},
        "n": _INT1,
        "attributes": {"type": "string"},
        "attribute_types": {"type": "object", "additionalProperties": {"enum": ["numeric", "categorical"]}},
        "covariates": {"type": "object", "additionalProperties": {"type": "string"}},
        "reports": {"type": "string"},
        "las": {"enum": ["intersection", "union"]},
    }),
    "model": _obj({
        "terms": {"type": "array", "items": _TERM, "minItems": 1},
        "sociality": {"type": "boolean"},
        "theta": {"type": "array", "items": _NUM},
        "reference": _RULE,
    }),
    "fit": _obj({
        "lambda": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "cv"}]},
        "method": {"enum": ["mple", "sa"]},
        "cv_folds": {"type": "integer", "minimum": 2},
        "sa": _obj({"a0": _NUM, "n_iter": _INT1, "n_phase1": _INT1, "n_check": _INT1,
                    "check_tol": _NUM, "restarts": _INT1}),
        "sampler": _obj(_CHAIN),
    }),
    "control": _obj({"ell": _INT1, "rule": _RULE}),
    "dynamics": _obj({
        "n": _INT1,
        "directed": {"type": "boolean"},
        "schedule": {"enum": ["uniform_random_scan", "systematic_sweep", "poisson_clocks"]},
        **_CHAIN,
    }),
    "equilibrium": _obj({"oracle": {"type": "boolean"}}),
    "adequacy": _obj({"level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}),
    "sweep": _obj({
        "family": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        "draw_mode": {"enum": ["grid", "uniform"]},
        "low": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]},
        "high": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]},
        "resolution": _INT1,
        "n_draws": _INT1,
        "axis_values": {"type": "array", "items": {"type": "array", "items": _NUM}, "minItems": 2, "maxItems": 2},
        "n": {"type": "integer", "minimum": 2},
        "rule": _RULE,
        "to_rule": _RULE,
        "summary": {"enum": ["density", "centralization"]},
        "summary_mode": {"enum": ["final", "mean"]},
        "engine": {"enum": ["offset", "choice"]},
        "replicates": _INT1,
        "heatmap": {"type": "boolean"},
    }),
    "counterfactual": _obj({
        "kind": {"enum": ["none", "zero_negative_sociality", "permute_sociality", "sign_flip", "norm_shift"]},
        "term": {"type": "string"},
        "from_rule": _RULE,
        "to_rule": _RULE,
        "n_permutations": _INT1,
        "replicates": _INT1,
    }, ["kind"]),
    "stability": _obj({
        "graph": {"type": "string"},
        "star": {"type": "integer", "minimum": 2},
    }),
})


class ConfigError(ValueError):
    pass


def validate_config(cfg: dict) -> dict:
    """Check ``cfg`` against the schema; unknown keys are errors."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    return cfg


def load_config(path) -> dict:
    """Read, validate and return a run configuration.

    Relative data paths are resolved against the config file's directory.
    """
    path = Path(path)
    with open(path) as fh:
        try:
            cfg = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    validate_config(cfg)
    cfg = copy.deepcopy(cfg)
    data = cfg.get("data", {})
    for key in ("network", "attributes", "reports"):
        if key in data:
            data[key] = str((path.parent / data[key]).resolve())
    for name, p in data.get("covariates", {}).items():
        data["covariates"][name] = str((path.parent / p).resolve())
    stab = cfg.get("stability", {})
    if "graph" in stab:
        stab["graph"] = str((path.parent / stab["graph"]).resolve())
    return cfg


def schema_summary(cfg: dict) -> str:
    lines = []
    for key, block in cfg.items():
        if isinstance(block, dict):
            lines.append(f"{key}: {', '.join(sorted(block))}")
        else:
            lines.append(f"{key}: {block}")
    return "\n".join(lines)
