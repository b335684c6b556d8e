"""Run configuration: JSON schema, validation and object construction.

Unknown keys are rejected at every level. Validation errors name the
offending field by its JSON path, e.g. ``beta`` or ``game.A[1]``.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .errors import ConfigError, OTGamesError
from .games import BUILTINS, GameModel, builtin, check_state
from .graph import StrategyGraph, build_graph, complete_graph

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_state = {"type": "array", "items": _nonneg, "minItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "description": {"type": "string"},
    "game": {
        "oneOf": [
            _obj({"type": {"const": "builtin"}, "name": {"enum": sorted(BUILTINS)}},
                 ["type", "name"]),
            _obj({
                "type": {"const": "matrix"},
                "A": {"type": "array", "minItems": 2,
                      "items": {"type": "array", "items": _num, "minItems": 2}},
                "name": {"type": "string"},
                "labels": {"type": "array", "items": {"type": "string"}},
            }, ["type", "A"]),
        ]
    },
    "graph": {
        "oneOf": [
            _obj({"type": {"const": "complete"}}, ["type"]),
            _obj({
                "type": {"const": "edges"},
                "edges": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "items": {"type": "integer"},
                                    "minItems": 2, "maxItems": 2}},
            }, ["type", "edges"]),
        ]
    },
    "beta": _nonneg,
    "beta_list": {
        "oneOf": [
            {"type": "array", "items": _nonneg},
            _obj({"start": _nonneg, "stop": _nonneg,
                  "num": {"type": "integer", "minimum": 1},
                  "spacing": {"enum": ["linear", "log"]}},
                 ["start", "stop", "num"]),
        ]
    },
    "initial": {
        "oneOf": [
            _obj({"type": {"const": "uniform"}}, ["type"]),
            _obj({"type": {"const": "explicit"},
                  "states": {"type": "array", "items": _state, "minItems": 1}},
                 ["type", "states"]),
            _obj({"type": {"const": "random"},
                  "count": {"type": "integer", "minimum": 1}}, ["type", "count"]),
        ]
    },
    "t_end": _pos,
    "dt_out": _pos,
    "integrator": _obj({"rtol": _pos, "atol": _pos,
                        "max_steps": {"type": "integer", "minimum": 1}}),
    "classify": _obj({
        "tail_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "eq_velocity_tol": _pos, "eq_diameter_tol": _pos, "cycle_min_diameter": _pos,
        "recurrence_tol": _pos, "min_period": _pos,
        "min_returns": {"type": "integer", "minimum": 1}, "period_rtol": _pos,
    }),
    "gibbs": _obj({
        "num_starts": {"type": "integer", "minimum": 1},
        "tol": _pos, "max_iter": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "cluster_radius": _pos, "stability": {"type": "boolean"},
    }),
    "stability": _obj({"states": {"type": "array", "items": _state, "minItems": 1}}),
    "agents": _obj({
        "N": {"type": "integer", "minimum": 1},
        "h": _pos, "h_max": _pos, "record_every": _pos,
    }, ["N"]),
    "diagnose": _obj({"trajectory": {"type": "string"}, "rho_inf": _state,
                      "tail_fraction": {"type": "number", "exclusiveMinimum": 0,
                                        "maximum": 1}},
                     ["trajectory"]),
    "output": _obj({"dir": {"type": "string"}, "prefix": {"type": "string"}}),
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
}, ["game"])

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(err) -> str:
    out = ""
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _describe(err) -> str:
    # oneOf failures: report the branch that got furthest
    if err.validator == "oneOf" and err.context:
        # skip branches whose "type" discriminator did not match
        wrong = {e.relative_schema_path[0] for e in err.context
                 if e.validator == "const" and list(e.relative_path)[-1:] == ["type"]}
        cands = [e for e in err.context if e.relative_schema_path[0] not in wrong]
        best = max(cands or err.context,
                   key=lambda e: (len(e.absolute_path), -len(e.message)))
        return _describe(best)
    return f"{_path(err)}: {err.message}"


def validate(cfg: dict) -> dict:
    """Schema check plus cross-field checks; returns ``cfg`` unchanged."""
    errors = sorted(_VALIDATOR.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors[:5]))
    game = cfg["game"]
    if game["type"] == "matrix":
        a = game["A"]
        if any(len(row) != len(a) for row in a):
            raise ConfigError("game.A: matrix must be square")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate(cfg)


def build_game(spec: dict) -> GameModel:
    try:
        if spec["type"] == "builtin":
            return builtin(spec["name"])
        return GameModel.from_matrix(spec["A"], name=spec.get("name", "matrix"),
                                     labels=spec.get("labels"))
    except OTGamesError as exc:
        raise ConfigError(f"game: {exc}") from exc


def game_spec(cfg: dict) -> dict:
    return cfg["game"]


def build_graph_from_spec(spec: Optional[dict], n: int) -> StrategyGraph:
    spec = spec or {"type": "complete"}
    try:
        if spec["type"] == "complete":
            return complete_graph(n)
        return build_graph(n, spec["edges"])
    except OTGamesError as exc:
        raise ConfigError(f"graph: {exc}") from exc


def beta_value(cfg: dict) -> float:
    if "beta" not in cfg:
        raise ConfigError("beta: required for this command")
    return float(cfg["beta"])


def beta_list(cfg: dict) -> list:
    spec = cfg.get("beta_list")
    if spec is None:
        raise ConfigError("beta_list: required for this command")
    if isinstance(spec, list):
        betas = [float(b) for b in spec]
    else:
        if spec.get("spacing", "linear") == "log":
            if spec["start"] <= 0:
                raise ConfigError("beta_list.start: log spacing needs a positive start")
            betas = list(np.geomspace(spec["start"], spec["stop"], spec["num"]))
        else:
            betas = list(np.linspace(spec["start"], spec["stop"], spec["num"]))
    if not betas:
        raise ConfigError("beta_list: must not be empty")
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ConfigError("beta_list: must be sorted")
    return betas


def initial_states(cfg: dict, n: int, rng) -> np.ndarray:
    """Initial states as rows; random states are Dirichlet(1, ..., 1) draws from ``rng``."""
    spec = cfg.get("initial", {"type": "uniform"})
    if spec["type"] == "uniform":
        return np.full((1, n), 1.0 / n)
    if spec["type"] == "random":
        return rng.dirichlet(np.ones(n), size=spec["count"])
    out = []
    for k, s in enumerate(spec["states"]):
        try:
            out.append(check_state(s, n))
        except OTGamesError as exc:
            raise ConfigError(f"initial.states[{k}]: {exc}") from exc
    return np.array(out)


def integrator_options(cfg: dict) -> dict:
    opts = dict(cfg.get("integrator", {}))
    if "dt_out" in cfg:
        opts["dt_out"] = cfg["dt_out"]
    return opts
