"""Run configuration: JSON schema, parsing into model objects, and the
deterministic config hash embedded in every output file."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema
import numpy as np

from . import tensors as tn
from .geometry import InclusionShape, build_macro_mesh
from .limits import LoadSpec, RegimeConfig

_NUM_OR_INF = {"oneOf": [{"type": "number"}, {"const": "inf"}]}

SCHEMA = {
    "type": "object",
    "required": ["material", "cell", "regime"],
    "properties": {
        "material": {"oneOf": [{"type": "string"}, {"type": "object"}]},
        "cell": {
            "type": "object",
            "required": ["n"],
            "properties": {
                "shape": {"oneOf": [{"type": "null"}, {
                    "type": "object",
                    "required": ["kind", "size"],
                    "properties": {
                        "kind": {"enum": ["disk", "square"]},
                        "size": {"type": "number"},
                        "center": {"type": "array", "minItems": 2, "maxItems": 2},
                    },
                }]},
                "n": {"type": "integer", "minimum": 4},
                "n_z": {"type": "integer", "minimum": 2},
            },
        },
        "regime": {
            "type": "object",
            "required": ["delta", "mu", "tau"],
            "properties": {
                "delta": _NUM_OR_INF,
                "mu": {"enum": ["eps", "eps_h", "eps2"]},
                "tau": {"enum": [0, 2]},
                "kappa": _NUM_OR_INF,
            },
        },
        "macro": {
            "type": "object",
            "properties": {
                "L1": {"type": "number", "exclusiveMinimum": 0},
                "L2": {"type": "number", "exclusiveMinimum": 0},
                "n1": {"type": "integer", "minimum": 2},
                "n2": {"type": "integer", "minimum": 2},
                "gamma": {"type": "array", "items": {
                    "enum": ["left", "right", "bottom", "top"]}},
            },
        },
        "solver": {
            "type": "object",
            "properties": {
                "n_modes": {"type": "integer", "minimum": 1},
                "dense_threshold": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
                "eig_solver": {"enum": ["auto", "dense", "shift-invert", "lobpcg"]},
            },
        },
        "spectrum": {
            "type": "object",
            "properties": {
                "n_macro": {"type": "integer", "minimum": 1},
                "lambda_max": {"type": ["number", "null"]},
                "eta_max": {"type": "number", "exclusiveMinimum": 0},
                "eta_points": {"type": "integer", "minimum": 2},
                "beta_samples": {"type": "integer", "minimum": 2},
            },
        },
        "load": {
            "type": "object",
            "properties": {
                "amplitude": {"type": "array", "minItems": 3, "maxItems": 3},
                "macro": {"type": "object"},
                "transverse": {"enum": ["one", "x3"]},
                "cell": {"enum": ["one", "soft"]},
                "time": {"type": "object"},
            },
        },
        "resolvent": {
            "type": "object",
            "properties": {"lambda": {"type": "number", "exclusiveMinimum": 0}},
        },
        "evolve": {
            "type": "object",
            "properties": {
                "variant": {"enum": ["long_time_bending", "real_time",
                                     "strong_hc_bending", "delta0_hc"]},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number"},
            },
        },
        "validate": {
            "type": "object",
            "properties": {
                "eps": {"type": "array", "items": {"type": "number"}},
                "cells_per_eps": {"type": "integer", "minimum": 2},
                "n_z": {"type": "integer", "minimum": 2},
                "n_eigs": {"type": "integer", "minimum": 1},
                "budget": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class ConfigError(ValueError):
    pass


def _num(value):
    return np.inf if value == "inf" else float(value)


def load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    cfg["_dir"] = str(p.parent)
    return cfg


def config_hash(cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_material(cfg: dict) -> tn.MaterialSpec:
    node = cfg["material"]
    if isinstance(node, str):
        p = Path(node)
        if not p.is_absolute():
            p = Path(cfg.get("_dir", ".")) / p
        if not p.exists():
            raise ConfigError(f"material file {node} not found")
        return tn.load_material(p)
    return tn.material_from_dict(node)


def parse_shape(cfg: dict) -> InclusionShape | None:
    node = cfg["cell"].get("shape")
    if node is None:
        return None
    return InclusionShape(kind=node["kind"], size=float(node["size"]),
                          center=tuple(node.get("center", (0.5, 0.5))))


def parse_regime(cfg: dict) -> RegimeConfig:
    node = cfg["regime"]
    kappa = node.get("kappa")
    return RegimeConfig(delta=_num(node["delta"]), mu=node["mu"],
                        tau=int(node["tau"]),
                        kappa=None if kappa is None else _num(kappa))


def parse_macro_mesh(cfg: dict):
    node = cfg.get("macro", {})
    return build_macro_mesh(node.get("L1", 1.0), node.get("L2", 1.0),
                            node.get("n1", 8), node.get("n2", 8),
                            tuple(node.get("gamma", ("left",))))


def _macro_profile(node):
    if node is None or node.get("kind", "one") == "one":
        return None
    if node["kind"] == "sine":
        k1 = node.get("k1", 1)
        k2 = node.get("k2", 1)
        L1 = node.get("L1", 1.0)
        L2 = node.get("L2", 1.0)
        return lambda x: float(np.sin(k1 * np.pi * x[0] / L1)
                               * np.sin(k2 * np.pi * x[1] / L2))
    raise ConfigError(f"unknown macro profile {node['kind']!r}")


def _time_profile(node):
    if node is None or node.get("kind", "one") == "one":
        return None
    if node["kind"] == "sin":
        w = float(node.get("omega", 1.0))
        return lambda t: float(np.sin(w * t))
    raise ConfigError(f"unknown time profile {node['kind']!r}")


def parse_load(cfg: dict) -> LoadSpec:
    node = cfg.get("load", {})
    return LoadSpec(
        amplitude=tuple(node.get("amplitude", (0.0, 0.0, 1.0))),
        macro=_macro_profile(node.get("macro")),
        transverse=node.get("transverse", "one"),
        cell=node.get("cell", "one"),
        time=_time_profile(node.get("time")),
    )


DEMO_CONFIG = {
    "material": {
        "C0": {"isotropic": {"lambda": 1.0, "mu": 1.0}},
        "C1": {"isotropic": {"lambda": 1.0, "mu": 1.0}},
        "rho0": 1.0, "rho1": 1.0, "nu": 0.2,
    },
    "cell": {"shape": {"kind": "disk", "size": 0.26}, "n": 16, "n_z": 4},
    "regime": {"delta": 1.0, "mu": "eps", "tau": 0},
    "macro": {"L1": 1.0, "L2": 1.0, "n1": 8, "n2": 8, "gamma": ["left"]},
    "solver": {"n_modes": 50},
    "spectrum": {"n_macro": 8, "eta_max": 20.0, "eta_points": 81},
    "load": {"amplitude": [0.0, 0.0, 1.0]},
    "resolvent": {"lambda": 2.0},
    "evolve": {"variant": "real_time", "T": 1.0, "dt": 0.001},
    "validate": {"eps": [0.5, 0.25], "cells_per_eps": 8, "n_z": 4, "n_eigs": 3},
}
