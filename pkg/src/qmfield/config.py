"""Run configuration: schema, defaults and construction of the objects it names."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np

from .amplitudes import (
    COMMUTATOR_TOL,
    INVERTIBILITY_FLOOR,
    NORMALIZER_FLOOR,
    build_family,
    parse_complex_matrix,
)
from .graph_topology import GraphWindow, build_tessellation
from .markov_field import (
    CHOI_DIM_CAP,
    TOL_CP,
    TOL_FACTORIZATION,
    TOL_LOCALIZATION,
    TOL_MODULE,
    TOL_NORMALIZATION,
    TOL_ORACLE,
    TOL_PROJECTIVE,
    TOL_STATE,
    TOL_STATIONARY,
    TOL_UNITAL,
)
from .operator_algebra import ProductState, SiteModel

TASKS = ("tessellate", "verify-family", "verify-field", "state-eval", "full-report")

TOLERANCES = {
    "state": TOL_STATE,
    "unitality": TOL_UNITAL,
    "cp": TOL_CP,
    "module": TOL_MODULE,
    "stationarity": TOL_STATIONARY,
    "projectivity": TOL_PROJECTIVE,
    "localization": TOL_LOCALIZATION,
    "factorization": TOL_FACTORIZATION,
    "oracle": TOL_ORACLE,
    "normalization": TOL_NORMALIZATION,
    "invertibility_floor": INVERTIBILITY_FLOOR,
    "commutator": COMMUTATOR_TOL,
    "normalizer_floor": NORMALIZER_FLOOR,
}

DEFAULTS = {
    "name": None,
    "sites": {"default_dim": 2, "dims": {}},
    "state": {"kind": "maximally_mixed"},
    "amplitudes": None,
    "tessellation": {"root": None, "radius": None, "max_level": None, "repair": "off"},
    "tolerances": {},
    "tasks": ["full-report"],
    "checks": {
        "instances": 3,
        "region_size": 2,
        "observables": 2,
        "growth_steps": 2,
        "sequence_steps": 3,
        "choi_cap": CHOI_DIM_CAP,
    },
    "state_eval": {"region": None, "observable": None, "oracle": True},
    "seed": 0,
    "output": None,
}

_label = {"type": ["string", "integer", "array"]}
_matrix = {"type": "array"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["graph"],
    "properties": {
        "name": {"type": ["string", "null"]},
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["lattice", "tree", "explicit"]},
                "dim": {"type": "integer", "minimum": 1},
                "degree": {"type": "integer", "minimum": 2},
                "edges": {"type": "array", "items": {"type": "array", "minItems": 2,
                                                     "maxItems": 2}},
            },
        },
        "sites": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "default_dim": {"type": "integer", "minimum": 1},
                "dims": {"type": "object", "additionalProperties": {"type": "integer",
                                                                    "minimum": 1}},
            },
        },
        "state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["maximally_mixed", "diagonal", "density"]},
                "probabilities": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "density": _matrix,
                "per_site": {"type": "object"},
            },
        },
        "amplitudes": {"type": ["object", "null"]},
        "tessellation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "root": {"anyOf": [_label, {"type": "null"}]},
                "radius": {"type": ["integer", "null"], "minimum": 1},
                "max_level": {"type": ["integer", "null"], "minimum": 1},
                "repair": {"enum": ["off", "greedy", "greedy-independent"]},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "minimum": 0} for k in TOLERANCES},
        },
        "tasks": {"type": "array", "items": {"enum": list(TASKS)}, "minItems": 1},
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "instances": {"type": "integer", "minimum": 0},
                "region_size": {"type": "integer", "minimum": 1},
                "observables": {"type": "integer", "minimum": 0},
                "growth_steps": {"type": "integer", "minimum": 1},
                "sequence_steps": {"type": "integer", "minimum": 0},
                "choi_cap": {"type": "integer", "minimum": 1},
            },
        },
        "state_eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "region": {"type": ["array", "null"]},
                "observable": {"type": ["object", "null"]},
                "oracle": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": ["string", "null"]},
    },
}


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def _path(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        parts.append(extra[0] if extra else "?")
    elif error.validator == "required":
        parts.append(error.message.split("'")[1])
    return ".".join(parts) or "<root>"


def _merge(defaults, given):
    if isinstance(defaults, dict) and isinstance(given, dict):
        out = copy.deepcopy(defaults)
        for k, v in given.items():
            out[k] = _merge(defaults.get(k), v) if k in defaults else copy.deepcopy(v)
        return out
    return copy.deepcopy(given)


def validate_config(raw: dict) -> dict:
    """Check ``raw`` against the schema and return it with all defaults filled in."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"invalid config at '{_path(e)}': {e.message}")
    cfg = _merge(DEFAULTS, raw)
    cfg["tolerances"] = {**TOLERANCES, **cfg["tolerances"]}
    g = cfg["graph"]
    if g["type"] == "explicit" and not g.get("edges"):
        raise ConfigError("invalid config at 'graph.edges': explicit graphs need edges")
    needs_family = {"verify-field", "state-eval", "full-report"} & set(cfg["tasks"])
    if needs_family and cfg["amplitudes"] is None:
        raise ConfigError("invalid config at 'amplitudes': required by the selected tasks")
    return cfg


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return validate_config(raw)


def apply_overrides(cfg: dict, seed=None, tolerances=None, repair=None, output=None) -> dict:
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    for name, value in (tolerances or {}).items():
        if name not in TOLERANCES:
            raise ConfigError(f"invalid config at 'tolerances.{name}': unknown tolerance")
        cfg["tolerances"][name] = float(value)
    if repair is not None:
        cfg["tessellation"]["repair"] = repair
    if output is not None:
        cfg["output"] = str(output)
    return validate_config(cfg)


# --------------------------------------------------------------------------
# materialization


def make_window(cfg: dict) -> GraphWindow:
    g = cfg["graph"]
    tess = cfg["tessellation"]
    return GraphWindow.from_spec(g, root=tess["root"],
                                 radius=tess["radius"])


def make_tessellation(cfg: dict, window: GraphWindow | None = None):
    window = window or make_window(cfg)
    tess = cfg["tessellation"]
    root = None if tess["root"] is None else window.decode(tess["root"])
    return build_tessellation(window, root=root, max_level=tess["max_level"],
                              repair=tess["repair"])


def make_sites(cfg: dict, window: GraphWindow) -> SiteModel:
    s = cfg["sites"]
    dims = {window.decode(k): d for k, d in s["dims"].items()}
    return SiteModel(window, dims=dims, default=s["default_dim"])


def make_state(cfg: dict, window: GraphWindow, sites: SiteModel) -> ProductState:
    st = cfg["state"]
    kind = st["kind"]
    if kind == "maximally_mixed":
        return ProductState()

    def one(value):
        if kind == "diagonal":
            return np.diag(np.asarray(value, dtype=float))
        return parse_complex_matrix(value)

    per_site = {window.decode(k): v
                for k, v in st.get("per_site", {}).items()}
    default = st.get("probabilities") if kind == "diagonal" else st.get("density")
    densities = {}
    for v in window.vertices:
        value = per_site.get(v, default)
        if value is None:
            continue
        densities[sites.site(v)] = one(value)
    return ProductState(densities)


def make_family(cfg: dict, t, sites: SiteModel, state: ProductState):
    tol = cfg["tolerances"]
    return build_family(t, cfg["amplitudes"], sites, state,
                        invertibility_floor=tol["invertibility_floor"],
                        commutator_tol=tol["commutator"],
                        normalizer_floor=tol["normalizer_floor"])
