"""
Experiment config schemas.

Each experiment kind is described by a name, a description and an input schema. Configs are
validated before any computation; unknown keys are rejected and the first error is reported
with the JSON path of the offending key.
"""

import logging
from typing import Any, Dict, List

from jsonschema import Draft202012Validator

from .engine.errors import ConfigError

logger = logging.getLogger(__name__)

DECIMAL_PATTERN = r"^[+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+)([eE][+-]?[0-9]+)?$"

NUMBER = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": DECIMAL_PATTERN}]}


def _number(description: str) -> Dict[str, Any]:
    return {**NUMBER, "description": description}


def _vector(description: str) -> Dict[str, Any]:
    return {"type": "array", "items": NUMBER, "minItems": 2, "description": description}


ORACLE = {
    "type": "object",
    "properties": {
        "type": {"type": "string", "enum": ["fat-cantor", "ternary", "empty"],
                 "description": "Porous set: fat Cantor product, middle-thirds product or the empty set"},
        "mu": _number("Fat Cantor ratio in (0, 1/3)"),
        "depth": {"type": "integer", "minimum": 0, "description": "Truncation depth"},
        "mode": {"type": "string", "enum": ["c-porous", "power"], "description": "Porosity inequality"},
        "c": _number("Porosity constant for c-porous mode"),
        "p": _number("Exponent for power mode"),
        "offset": _number("Translation along the first axis"),
        "ambient_dim": {"type": "integer", "minimum": 2, "description": "Ambient dimension"},
    },
    "required": ["type"],
    "additionalProperties": False,
}

CURVE = {
    "type": "object",
    "properties": {
        "type": {"type": "string", "enum": ["line", "hermite"], "description": "Curve constructor"},
        "start": _vector("Start point of a line"),
        "velocity": _vector("Velocity of a line"),
        "breakpoints": {"type": "array", "items": NUMBER, "minItems": 2, "description": "Hermite knots"},
        "positions": {"type": "array", "items": {"type": "array", "items": NUMBER},
                      "description": "Curve value at every knot"},
        "derivatives": {"type": "array", "items": {"type": "array", "items": NUMBER},
                        "description": "Curve derivative at every knot"},
    },
    "required": ["type"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"type": {"const": "line"}}},
         "then": {"required": ["start", "velocity"]}},
        {"if": {"properties": {"type": {"const": "hermite"}}},
         "then": {"required": ["breakpoints", "positions", "derivatives"]}},
    ],
}

ENGINE = {
    "type": "object",
    "properties": {
        "mode": {"type": "string", "enum": ["desk-relaxed", "paper-strict"], "description": "Parameter regime"},
        "sigma": _number("Radius of the Gamma_1 ball around the initial curve"),
        "eps": _number("Total error budget"),
        "lambda": _number("Vitali interval scale; required in desk-relaxed mode"),
        "rounds": {"type": "integer", "minimum": 1, "description": "Round cap in desk-relaxed mode"},
        "c": _number("Porosity constant used for Q; defaults to the oracle's"),
        "tolerance": _number("Preimage measure tolerance"),
        "max_depth": {"type": "integer", "minimum": 1, "description": "Bisection depth cap"},
    },
    "required": ["sigma", "eps"],
    "additionalProperties": False,
    "if": {"not": {"properties": {"mode": {"const": "paper-strict"}}, "required": ["mode"]}},
    "then": {"required": ["lambda"]},
}

ADVERSARY = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "enum": ["stay", "worst-sampled"], "description": "Choice of f_{n+1}"},
        "samples": {"type": "integer", "minimum": 1, "description": "Candidates for worst-sampled"},
    },
    "required": ["name"],
    "additionalProperties": False,
}

COMMON = {
    "seed": {"type": "integer", "minimum": 0, "description": "Root seed"},
    "out_dir": {"type": "string", "description": "Output directory"},
    "format": {"type": "string", "enum": ["csv", "summary"], "description": "Write CSV tables or the summary only"},
}


def _engine_schema(extra: Dict[str, Any], required: List[str]) -> Dict[str, Any]:
    return {
        "type": "object",
        "properties": {**COMMON, "oracle": ORACLE, "curve": CURVE, "engine": ENGINE,
                       "adversary": ADVERSARY, **extra},
        "required": ["oracle", "curve", "engine", *required],
        "additionalProperties": False,
    }


EXPERIMENTS: List[Dict[str, Any]] = [
    {
        "name": "avoid",
        "description": "Run one avoidance pass from the configured curve and audit it",
        "inputSchema": _engine_schema({}, []),
    },
    {
        "name": "halving",
        "description": "Run passes until the preimage measure is halved or the round cap is reached",
        "inputSchema": _engine_schema({"audit": {"type": "boolean", "description": "Audit every round"}}, []),
    },
    {
        "name": "martingale",
        "description": "Run a short halving run and check the martingale built from its tent derivatives",
        "inputSchema": _engine_schema({}, []),
    },
    {
        "name": "sigma-schedule",
        "description": "Drive every piece of a finite union below a target on one curve",
        "inputSchema": {
            "type": "object",
            "properties": {
                **COMMON,
                "pieces": {"type": "array", "items": ORACLE, "description": "c-porous pieces of the union"},
                "target": _number("Target preimage measure for every piece"),
                "curve": CURVE,
                "engine": ENGINE,
                "adversary": ADVERSARY,
                "max_sweeps": {"type": "integer", "minimum": 1, "description": "Sweeps over the pieces"},
            },
            "required": ["pieces", "target", "curve", "engine"],
            "additionalProperties": False,
        },
    },
    {
        "name": "counterexample",
        "description": "Power-p porous set of tiny area met in positive measure by a family of curves",
        "inputSchema": {
            "type": "object",
            "properties": {
                **COMMON,
                "mu": _number("Fat Cantor ratio"),
                "p": _number("Porosity exponent with 2^p mu > 1"),
                "depth": {"type": "integer", "minimum": 1, "description": "Truncation depth"},
                "eps": _number("Area budget for the tubes"),
                "delta": _number("Gamma_1 radius for the perturbed curve"),
                "family_size": {"type": "integer", "minimum": 1, "description": "Number of tube curves"},
                "tolerance": _number("Preimage measure tolerance"),
                "witness_samples": {"type": "integer", "minimum": 0, "description": "Power-p witness queries"},
                "trials": {"type": "integer", "minimum": 1, "description": "Neighbourhood check trials"},
            },
            "required": ["mu", "p", "depth", "eps"],
            "additionalProperties": False,
        },
    },
    {
        "name": "porosity-check",
        "description": "Estimate the porosity constant of an oracle and sweep power-p witnesses",
        "inputSchema": {
            "type": "object",
            "properties": {
                **COMMON,
                "oracle": ORACLE,
                "samples": {"type": "integer", "minimum": 1, "description": "Sampled points"},
                "scales": {"type": "array", "items": NUMBER, "minItems": 1, "description": "Query scales eps"},
                "witness_queries": {"type": "integer", "minimum": 0, "description": "Power-p witness queries"},
            },
            "required": ["oracle"],
            "additionalProperties": False,
        },
    },
]


def list_experiments() -> List[Dict[str, Any]]:
    """List all available experiments."""
    return EXPERIMENTS


def get_schema(name: str) -> Dict[str, Any]:
    for experiment in EXPERIMENTS:
        if experiment["name"] == name:
            return experiment["inputSchema"]
    raise ValueError(f"Unknown experiment: {name}")


def _json_path(path) -> str:
    return ".".join(str(part) for part in path) or "<root>"


def validate_config(name: str, config: Dict[str, Any]) -> Dict[str, Any]:
    """Validate a config against the experiment's schema; the first error by path wins."""
    validator = Draft202012Validator(get_schema(name))
    errors = sorted(validator.iter_errors(config), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        error = errors[0]
        path = _json_path(error.absolute_path)
        # a missing key is reported at the key's own path
        if error.validator == "required":
            missing = [key for key in error.validator_value if key not in error.instance]
            if missing:
                path = _json_path([*error.absolute_path, missing[0]])
        logger.error(f"Invalid {name} config at {path}: {error.message}")
        raise ConfigError(error.message, path)
    return config
