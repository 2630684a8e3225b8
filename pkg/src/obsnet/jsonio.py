"""JSON formats for graphs, systems, gains and simulation settings, plus report schemas."""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .digraph import Digraph, GraphError
from .netdetect import NetworkSpecError, ObserverNetworkSystem
from .simulator import GainSet, HeldNoise, SimulationConfig, Sinusoid, ZeroDisturbance

__all__ = [
    "InputError",
    "GRAPH_SCHEMA",
    "SYSTEM_SCHEMA",
    "GAINS_SCHEMA",
    "CONFIG_SCHEMA",
    "REPORT_SCHEMAS",
    "load_json",
    "graph_from_json",
    "system_from_json",
    "gains_from_json",
    "config_from_json",
    "dumps",
]


class InputError(ValueError):
    """Unreadable or malformed input, with a location where one is known."""


_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_VECTOR = {"type": "array", "items": {"type": "number"}}
_NUM_OR_VEC = {"oneOf": [{"type": "number"}, _VECTOR]}
_NULLABLE_VEC = {"oneOf": [{"type": "null"}, _VECTOR]}

GRAPH_SCHEMA = {
    "type": "object",
    "required": ["num_nodes", "edges"],
    "properties": {
        "num_nodes": {"type": "integer", "minimum": 1},
        "edges": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        },
    },
}

SYSTEM_SCHEMA = {
    "type": "object",
    "required": ["A", "nodes", "graph"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "A": _MATRIX,
        "B": _MATRIX,
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["C", "H"],
                "properties": {"C": _MATRIX, "D": _MATRIX, "Dbar": _MATRIX, "H": _MATRIX},
            },
        },
        "graph": GRAPH_SCHEMA,
    },
}

GAINS_SCHEMA = {
    "type": "object",
    "required": ["nodes"],
    "properties": {
        "nodes": {
            "type": "array",
            "items": {"type": "object", "required": ["L", "K"], "properties": {"L": _MATRIX, "K": _MATRIX}},
        }
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["t_final", "dt", "x0"],
    "properties": {
        "t_final": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "x0": _VECTOR,
        "decimate": {"type": "integer", "minimum": 1},
        "disturbance": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "sinusoid", "noise"]},
                "amplitude": _NUM_OR_VEC,
                "frequency": _NUM_OR_VEC,
                "seed": {"type": "integer"},
                "hold": {"type": "number", "exclusiveMinimum": 0},
                "std": {"type": "number", "minimum": 0},
            },
        },
    },
}

_INT_LISTS = {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}
_TOLERANCES = {
    "type": "object",
    "required": ["rank_tol", "re_tol", "angle_tol", "cluster_tol"],
    "properties": {
        "rank_tol": {"type": ["number", "null"]},
        "rank_rule": {"type": "string"},
        "re_tol": {"type": "number"},
        "angle_tol": {"type": "number"},
        "cluster_tol": {"type": "number"},
    },
}

ANALYZE_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "graph", "clusters", "inner_subgraphs", "permutation", "block_sizes",
        "spanning_trees", "scc_count", "zero_multiplicity", "nullspace_basis", "tolerances",
    ],
    "properties": {
        "graph": GRAPH_SCHEMA,
        "num_clusters": {"type": "integer", "minimum": 1},
        "clusters": _INT_LISTS,
        "inner_subgraphs": _INT_LISTS,
        "permutation": {"type": "array", "items": {"type": "integer"}},
        "block_sizes": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "spanning_trees": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["cluster", "root", "edges"],
                "properties": {"cluster": {"type": "integer"}, "root": {"type": "integer"}, "edges": _INT_LISTS},
            },
        },
        "scc_count": {"type": "integer", "minimum": 1},
        "zero_multiplicity": {
            "type": "object",
            "required": ["exact", "numerical"],
            "properties": {"exact": {"type": "integer"}, "numerical": {"type": "integer"}},
        },
        "nullspace_basis": {"type": "array", "items": _VECTOR},
        "tolerances": _TOLERANCES,
    },
}

NULLSPACE_REPORT_SCHEMA = {
    "type": "object",
    "required": ["num_nodes", "multiplicity", "basis", "residual_inf_norms", "tolerances"],
    "properties": {
        "num_nodes": {"type": "integer"},
        "multiplicity": {"type": "integer"},
        "basis": {"type": "array", "items": _VECTOR},
        "residual_inf_norms": _VECTOR,
        "tolerances": _TOLERANCES,
    },
}

_NODE_RECORD = {
    "type": "object",
    "required": ["node", "condition_ii", "witness"],
    "properties": {"node": {"type": "integer"}, "condition_ii": {"type": "boolean"}, "witness": _NULLABLE_VEC},
}

DETECTABILITY_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "collectively_detectable", "pbh", "lemma3_holds", "lemma3", "clusters",
        "sufficient", "sufficient_applies", "necessary_conditions_hold", "tolerances",
    ],
    "properties": {
        "system": {"type": "object"},
        "collectively_detectable": {"type": "boolean"},
        "pbh": {
            "type": "object",
            "required": ["detectable", "eigenvalue", "witness"],
            "properties": {
                "detectable": {"type": "boolean"},
                "eigenvalue": {
                    "oneOf": [
                        {"type": "null"},
                        {"type": "object", "required": ["re", "im"],
                         "properties": {"re": {"type": "number"}, "im": {"type": "number"}}},
                    ]
                },
                "witness": _NULLABLE_VEC,
                "margin": {"type": ["number", "null"]},
            },
        },
        "lemma3_holds": {"type": "boolean"},
        "lemma3": {
            "type": "object",
            "required": ["kernel_dim", "product_dim", "intersection_dim", "witness"],
            "properties": {
                "kernel_dim": {"type": "integer"},
                "product_dim": {"type": "integer"},
                "intersection_dim": {"type": "integer"},
                "witness": _NULLABLE_VEC,
                "margin": {"type": ["number", "null"]},
            },
        },
        "necessary_conditions_hold": {"type": "boolean"},
        "clusters": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["vertices", "inner_subgraph", "condition_i", "witness_i", "nodes"],
                "properties": {
                    "vertices": {"type": "array", "items": {"type": "integer"}},
                    "inner_subgraph": {"type": "array", "items": {"type": "integer"}},
                    "condition_i": {"type": "boolean"},
                    "witness_i": _NULLABLE_VEC,
                    "nodes": {"type": "array", "items": _NODE_RECORD},
                },
            },
        },
        "sufficient": {
            "type": "object",
            "required": ["applies", "all_clusters_condition_i", "clusters_disjoint", "certified",
                         "unobservable_nodes", "exempt_nodes"],
        },
        "sufficient_applies": {"type": "boolean"},
        "laplacian_zero_multiplicity": {"type": "integer"},
        "consistency_violations": {"type": "array", "items": {"type": "string"}},
        "tolerances": _TOLERANCES,
    },
}

SIMULATE_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["hurwitz", "spectral_abscissa", "closed_loop_eigenvalues", "initial_error_norm",
                 "final_error_norms", "samples", "trace"],
    "properties": {
        "hurwitz": {"type": "boolean"},
        "spectral_abscissa": {"type": "number"},
        "closed_loop_eigenvalues": {
            "type": "array",
            "items": {"type": "object", "required": ["re", "im"]},
        },
        "initial_error_norm": {"type": "number"},
        "final_error_norms": _VECTOR,
        "samples": {"type": "integer"},
        "trace": {"type": "string"},
    },
}

REPORT_SCHEMAS = {
    "analyze": ANALYZE_REPORT_SCHEMA,
    "nullspace": NULLSPACE_REPORT_SCHEMA,
    "detectability": DETECTABILITY_REPORT_SCHEMA,
    "simulate": SIMULATE_SUMMARY_SCHEMA,
}


def _location(error: jsonschema.ValidationError) -> str:
    parts = []
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (f".{p}" if parts else str(p)))
    return "".join(parts) or "<root>"


def validate(data, schema, what: str) -> None:
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        raise InputError(f"{what}: field {_location(exc)}: {exc.message}") from None


def load_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def graph_from_json(data, what: str = "graph") -> Digraph:
    validate(data, GRAPH_SCHEMA, what)
    try:
        return Digraph.from_json(data)
    except GraphError as exc:
        raise InputError(f"{what}: {exc}") from None


def system_from_json(data, what: str = "system") -> ObserverNetworkSystem:
    validate(data, SYSTEM_SCHEMA, what)
    graph = graph_from_json(data["graph"], f"{what}: field graph")
    nodes = data["nodes"]
    if len(nodes) != graph.num_nodes:
        raise InputError(f"{what}: field nodes: {len(nodes)} entries for a {graph.num_nodes}-node graph")
    try:
        sys = ObserverNetworkSystem(
            A=data["A"],
            B=data.get("B"),
            C=[nd["C"] for nd in nodes],
            D=[nd.get("D") for nd in nodes],
            Dbar=[nd.get("Dbar") for nd in nodes],
            H=[nd["H"] for nd in nodes],
            graph=graph,
        )
    except NetworkSpecError as exc:
        raise InputError(f"{what}: {exc}") from None
    if "n" in data and data["n"] != sys.n:
        raise InputError(f"{what}: field n is {data['n']} but A is {sys.n}x{sys.n}")
    return sys


def gains_from_json(data, sys: ObserverNetworkSystem, what: str = "gains") -> GainSet:
    validate(data, GAINS_SCHEMA, what)
    nodes = data["nodes"]
    gains = GainSet(L=[nd["L"] for nd in nodes], K=[nd["K"] for nd in nodes])
    try:
        gains.check(sys)
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from None
    return gains


def config_from_json(data, seed: int | None = None, decimate: int | None = None,
                     what: str = "config") -> SimulationConfig:
    validate(data, CONFIG_SCHEMA, what)
    dist = data.get("disturbance", {"kind": "zero"})
    kind = dist["kind"]
    if kind == "zero":
        disturbance = ZeroDisturbance()
    elif kind == "sinusoid":
        disturbance = Sinusoid(_listish(dist.get("amplitude", 1.0)), _listish(dist.get("frequency", 1.0)))
    else:
        disturbance = HeldNoise(
            seed=dist.get("seed", 0) if seed is None else seed,
            hold=dist.get("hold", 0.1),
            std=dist.get("std", 1.0),
        )
    try:
        return SimulationConfig(
            t_final=data["t_final"],
            dt=data["dt"],
            x0=data["x0"],
            disturbance=disturbance,
            decimate=data.get("decimate", 1) if decimate is None else decimate,
        )
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from None


def _listish(v):
    return tuple(v) if isinstance(v, list) else v


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        x = float(f"{x:.12g}")
        return 0.0 if x == 0 else x
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    """Serialise a report with floats rounded to 12 significant digits."""
    return json.dumps(_clean(obj), indent=2) + "\n"
