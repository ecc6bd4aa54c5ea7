"""JSON run configuration: schema, validation and construction of model objects."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .circuit import MINUS_COS, PLUS_COS, ChainCircuit, JunctionParams
from .resonator import C_LIGHT, L_MAX, L_MIN, TransmissionLine

TASKS = ("solve", "extract", "scan", "spectrum", "dynamics", "optimize", "gates", "qec", "check")

_pos = {"type": "number", "exclusiveMinimum": 0}
_num = {"type": "number"}
_pos_or_list = {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 1}]}
_grid = {"type": "array", "items": _pos, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj(
    {
        "task": {"enum": list(TASKS)},
        "circuit": _obj(
            {
                "E0_GHz": {"type": "array", "items": _num, "minItems": 1},
                "Esigma_GHz": {"type": "array", "items": _pos, "minItems": 1},
                "L_vertical_nH": _pos_or_list,
                "L_coupling_nH": _pos_or_list,
                "flux_rad": {"type": "array", "items": _num},
                "junction_sign": {"enum": [MINUS_COS, PLUS_COS]},
            },
            ["E0_GHz", "Esigma_GHz", "L_vertical_nH", "L_coupling_nH"],
        ),
        "line": _obj(
            {
                "Z_c_ohm": _pos,
                "v_eff_c": _pos,
                "length_mm": _pos,
                "target_f0_GHz": _pos,
                "length_bounds_mm": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "z_factor": _pos,
            }
        ),
        "solver": _obj(
            {
                "tol": _pos,
                "max_iter": {"type": "integer", "minimum": 1},
                "restarts": {"type": "integer", "minimum": 0},
            }
        ),
        "scan": _obj(
            {
                "L_vertical_nH": _grid,
                "L_coupling_nH": _grid,
                "outputs": {"type": "array", "items": {"enum": ["J", "chi", "A"]}, "minItems": 1, "uniqueItems": True},
            },
            ["L_vertical_nH", "L_coupling_nH"],
        ),
        "spectrum": _obj(
            {
                "flux_loop": {"type": "integer", "minimum": 1},
                "flux_start_rad": _num,
                "flux_stop_rad": _num,
                "points": {"type": "integer", "minimum": 2},
            }
        ),
        "dynamics": _obj(
            {
                "sequence": {"enum": ["three_pi", "arbitrary_theta"]},
                "theta_rad": _num,
                "rabi_GHz": _pos,
                "dt_ns": _pos,
                "samples": {"type": "integer", "minimum": 2},
            }
        ),
        "optimize": _obj(
            {
                "theta_rad": _num,
                "duration_ns": _pos,
                "steps": {"type": "integer", "minimum": 2},
                "iterations": {"type": "integer", "minimum": 0},
                "lambda_a": _pos,
                "guess_GHz": _pos,
                "flank_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
            }
        ),
        "gates": _obj(
            {
                "flux_loop": {"type": "integer", "minimum": 1},
                "flux_amplitude_rad": _num,
                "flux_duration_ns": _pos,
                "flux_samples": {"type": "integer", "minimum": 3},
                "J_inter_GHz": _num,
                "rzz_duration_ns": _pos,
            }
        ),
        "qec": _obj(
            {
                "kappa_GHz": _pos,
                "random_states": {"type": "integer", "minimum": 0},
                "slowness": {"type": "number", "minimum": 10},
            }
        ),
    },
    ["circuit"],
)

DEFAULTS = {
    "circuit": {"junction_sign": MINUS_COS},
    "line": {"Z_c_ohm": 50.0, "v_eff_c": 0.39, "length_bounds_mm": [L_MIN * 1e3, L_MAX * 1e3], "z_factor": 2.0},
    "solver": {"tol": 1e-12, "max_iter": 200, "restarts": 8},
    "spectrum": {"flux_loop": 1, "flux_start_rad": -np.pi, "flux_stop_rad": np.pi, "points": 121},
    "dynamics": {"sequence": "three_pi", "theta_rad": np.pi, "samples": 2000},
    "optimize": {
        "theta_rad": np.pi / 2,
        "duration_ns": 5000.0,
        "steps": 5000,
        "iterations": 500,
        "lambda_a": 0.5,
        "guess_GHz": 1e-3,
        "flank_fraction": 0.05,
    },
    "gates": {
        "flux_loop": 1,
        "flux_amplitude_rad": 0.1,
        "flux_duration_ns": 10.0,
        "flux_samples": 201,
        "J_inter_GHz": 1e-5,
        "rzz_duration_ns": 1000.0,
    },
    "qec": {"kappa_GHz": 1e-4, "random_states": 20, "slowness": 2000.0},
}


class SchemaViolation(ValueError):
    """All problems found in a config, each as (JSON pointer, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))

    def to_dict(self) -> dict:
        return {"error": "SchemaViolation", "violations": [{"pointer": p, "message": m} for p, m in self.errors]}


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def _schema_errors(doc):
    out = []
    for err in Draft202012Validator(SCHEMA).iter_errors(doc):
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            allowed = set(err.schema.get("properties", {}))
            for key in sorted(set(err.instance) - allowed):
                out.append((_pointer(path + [key]), f"unknown key {key!r}"))
        else:
            out.append((_pointer(path), err.message))
    return out


def _as_list(v, n):
    return list(v) if isinstance(v, list) else [v] * n


def _consistency_errors(doc):
    c = doc.get("circuit", {})
    out = []
    e0, es = c.get("E0_GHz"), c.get("Esigma_GHz")
    if not isinstance(e0, list) or not isinstance(es, list):
        return out
    n = len(es)
    if len(e0) != n:
        out.append(("/circuit/E0_GHz", f"expected {n} values to match Esigma_GHz, got {len(e0)}"))
    for key, want in (("L_vertical_nH", n), ("L_coupling_nH", n - 1), ("flux_rad", n)):
        v = c.get(key)
        if isinstance(v, list) and len(v) != want:
            out.append((f"/circuit/{key}", f"expected {want} values for {n} junctions, got {len(v)}"))
    line = doc.get("line", {})
    b = line.get("length_bounds_mm")
    if isinstance(b, list) and len(b) == 2 and all(isinstance(x, (int, float)) for x in b) and b[0] >= b[1]:
        out.append(("/line/length_bounds_mm", "lower bound must be below upper bound"))
    sp = doc.get("spectrum", {})
    if isinstance(sp.get("flux_loop"), int) and sp["flux_loop"] > n:
        out.append(("/spectrum/flux_loop", f"only {n} loops"))
    g = doc.get("gates", {})
    if isinstance(g.get("flux_loop"), int) and g["flux_loop"] > n:
        out.append(("/gates/flux_loop", f"only {n} loops"))
    return out


@dataclass
class RunConfig:
    data: dict  # normalized document with defaults filled in

    @property
    def task(self) -> str | None:
        return self.data.get("task")

    @property
    def n(self) -> int:
        return len(self.data["circuit"]["Esigma_GHz"])

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    def circuit(self) -> ChainCircuit:
        c = self.data["circuit"]
        n = self.n
        return ChainCircuit(
            tuple(JunctionParams(a, b) for a, b in zip(c["E0_GHz"], c["Esigma_GHz"])),
            tuple(_as_list(c["L_vertical_nH"], n)),
            tuple(_as_list(c["L_coupling_nH"], n - 1)),
            tuple(c.get("flux_rad", [0.0] * n)),
            c["junction_sign"],
        )

    def line(self) -> TransmissionLine:
        ln = self.data["line"]
        length = ln.get("length_mm")
        return TransmissionLine(ln["Z_c_ohm"], ln["v_eff_c"] * C_LIGHT, None if length is None else length * 1e-3)

    @property
    def target_f0(self) -> float | None:
        ln = self.data["line"]
        if "length_mm" in ln:
            return None
        return ln.get("target_f0_GHz", 9.0)

    @property
    def length_bounds(self) -> tuple:
        return tuple(x * 1e-3 for x in self.data["line"]["length_bounds_mm"])

    def normalized_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.data, sort_keys=True).encode()).hexdigest()


def _merge_defaults(doc):
    out = copy.deepcopy(doc)
    for key, defaults in DEFAULTS.items():
        if key in out or key in ("circuit", "line", "solver"):
            sec = out.setdefault(key, {})
            for k, v in defaults.items():
                sec.setdefault(k, copy.deepcopy(v))
    return out


def parse_config(document) -> RunConfig:
    """Validate a config (JSON text, bytes, path or dict); raise SchemaViolation listing every problem."""
    if isinstance(document, Path):
        document = document.read_bytes()
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaViolation([("", f"not UTF-8: {exc}")]) from None
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaViolation([("", f"invalid JSON: {exc}")]) from None
    errors = _schema_errors(document)
    if isinstance(document, dict):
        errors += _consistency_errors(document)
    if errors:
        raise SchemaViolation(errors)
    return RunConfig(_merge_defaults(document))


def example_config_text() -> str:
    return resources.files("isene").joinpath("data/example_config.json").read_text(encoding="utf-8")


def example_config() -> RunConfig:
    return parse_config(example_config_text())

