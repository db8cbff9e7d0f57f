"""Scenario configuration: strict JSON schema, defaults, semantic checks.

Unknown keys are rejected everywhere (a typo in a physics parameter must
fail loudly, not silently fall back to a default), and the physics-level
preconditions (momentum commensurability, CFL / splitting budgets) are
checked before any compute starts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .grids import Grid, grid_create
from .kg import EmPotential, PhysicalParams, constant_potential

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "SCENARIO_KINDS", "SCHEMA"]

SCENARIO_KINDS = (
    "free_kg",
    "charged_kg",
    "schrodinger",
    "classical_limit_sweep",
    "vortex",
    "convergence",
)

KG_RESIDUALS = ("continuity_free", "action_free", "continuity_charged", "action_charged")
SCH_RESIDUALS = ("madelung_continuity", "madelung_action")

_NUM_OR_VEC = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "grid"],
    "properties": {
        "kind": {"enum": list(SCENARIO_KINDS)},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dims", "points", "lengths"],
            "properties": {
                "dims": {"enum": [1, 2]},
                "points": _NUM_OR_VEC,
                "lengths": _NUM_OR_VEC,
            },
        },
        "physical": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hbar": {"type": "number", "exclusiveMinimum": 0},
                "mass": {"type": "number", "exclusiveMinimum": 0},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "charge": {"type": "number"},
            },
        },
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["plane_wave", "gaussian", "vortex"]},
                "momentum": _NUM_OR_VEC,
                "center": _NUM_OR_VEC,
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "energy_sign": {"enum": [1, -1]},
            },
        },
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["none", "constant", "sine_vector", "scalar_ramp"]},
                "w0": {"type": "number"},
                "a0": _NUM_OR_VEC,
                "amplitude": {"type": "number"},
                "rate": {"type": "number"},
                "mode": {"type": "integer", "minimum": 1},
            },
        },
        "stepping": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "null"}]},
                "steps_per_snapshot": {"type": "integer", "minimum": 1},
                "snapshots": {"type": "integer", "minimum": 3},
                "cfl_safety": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "warmup_steps": {"type": "integer", "minimum": 0},
            },
        },
        "residuals": {
            "type": "array",
            "items": {"enum": list(KG_RESIDUALS + SCH_RESIDUALS)},
            "uniqueItems": True,
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["c_values", "time"],
            "properties": {
                "c_values": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 3,
                },
                "time": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "convergence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "steps_per_snapshot_levels": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 3,
                },
            },
        },
        "contours": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["corner", "size"],
                "properties": {
                    "corner": {"type": "array", "items": {"type": "integer", "minimum": 0},
                               "minItems": 2, "maxItems": 2},
                    "size": {"type": "array", "items": {"type": "integer", "minimum": 2},
                             "minItems": 2, "maxItems": 2},
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"oneOf": [{"type": "string"}, {"type": "null"}]},
                "snapshots": {"type": "boolean"},
            },
        },
    },
}

_DEFAULTS = {
    "physical": {"hbar": 1.0, "mass": 1.0, "c": 1.0, "charge": 0.0},
    "potential": {"type": "none"},
    "stepping": {
        "dt": None,
        "steps_per_snapshot": 10,
        "snapshots": 5,
        "cfl_safety": 0.5,
        "warmup_steps": 0,
    },
    "output": {"directory": None, "snapshots": True},
}

_DEFAULT_RESIDUALS = {
    "free_kg": ["continuity_free", "action_free"],
    "charged_kg": ["continuity_charged", "action_charged"],
    "schrodinger": ["madelung_continuity", "madelung_action"],
    "convergence": ["continuity_free", "action_free"],
    "classical_limit_sweep": [],
    "vortex": [],
}


class ConfigError(ValueError):
    """Configuration rejected; ``problems`` lists JSON-pointer-ish paths."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(self.problems))


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    grid: Grid
    params: PhysicalParams
    raw: dict = field(repr=False)  # validated document with defaults applied

    @property
    def initial_state(self) -> dict:
        return self.raw["initial_state"]

    @property
    def stepping(self) -> dict:
        return self.raw["stepping"]

    @property
    def residuals(self) -> list[str]:
        return self.raw["residuals"]

    @property
    def output_dir(self) -> str | None:
        return self.raw["output"]["directory"]

    def potential(self) -> EmPotential | None:
        return build_potential(self.raw["potential"], self.grid)


def _as_vec(value, dims: int) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * dims
    return [float(v) for v in value]


def build_potential(spec: dict, grid: Grid) -> EmPotential | None:
    kind = spec["type"]
    if kind == "none":
        return None
    if kind == "constant":
        return constant_potential(spec.get("w0", 0.0), tuple(_as_vec(spec.get("a0", 0.0), grid.dims)), dims=grid.dims)
    if kind == "sine_vector":
        # W = 0, A_x = amplitude * sin(2 pi mode x / L_x) (other components 0)
        amp = spec.get("amplitude", 1.0)
        mode = spec.get("mode", 1)
        k0 = 2 * math.pi * mode / grid.lengths[0]
        import numpy as np

        zeros = lambda xs, t: np.zeros_like(np.asarray(xs[0], dtype=float))
        vec = [lambda xs, t, a=amp, k=k0: a * np.sin(k * np.asarray(xs[0], dtype=float))]
        vec += [zeros] * (grid.dims - 1)
        return EmPotential(scalar=zeros, vector=tuple(vec),
                           scalar_dt=zeros, uniform_vector=False)
    if kind == "scalar_ramp":
        # W = rate * t * cos(2 pi mode x / L_x), A = 0
        rate = spec.get("rate", 1.0)
        mode = spec.get("mode", 1)
        k0 = 2 * math.pi * mode / grid.lengths[0]
        import numpy as np

        profile = lambda xs, r=rate, k=k0: r * np.cos(k * np.asarray(xs[0], dtype=float))
        zeros = lambda xs, t: np.zeros_like(np.asarray(xs[0], dtype=float))
        return EmPotential(
            scalar=lambda xs, t: t * profile(xs),
            vector=tuple([zeros] * grid.dims),
            scalar_dt=lambda xs, t: profile(xs),
            uniform_vector=True,
        )
    raise AssertionError(f"unhandled potential type {kind}")  # schema prevents this


def _merge_defaults(doc: dict) -> dict:
    merged = dict(doc)
    for key, block in _DEFAULTS.items():
        user = dict(merged.get(key, {}))
        filled = dict(block)
        filled.update(user)
        merged[key] = filled
    kind = merged.get("kind")
    if "residuals" not in merged and kind in _DEFAULT_RESIDUALS:
        merged["residuals"] = list(_DEFAULT_RESIDUALS[kind])
    merged.setdefault("residuals", [])
    if kind == "convergence":
        conv = dict(merged.get("convergence", {}))
        conv.setdefault("steps_per_snapshot_levels", [16, 8, 4])
        merged["convergence"] = conv
    return merged


def _semantic_checks(doc: dict, grid: Grid, params: PhysicalParams) -> list[str]:
    problems = []
    kind = doc["kind"]
    init = doc.get("initial_state")
    if kind in ("free_kg", "charged_kg", "schrodinger", "classical_limit_sweep", "convergence"):
        if init is None:
            problems.append("$.initial_state: required for this scenario kind")
        elif init["type"] == "vortex":
            problems.append("$.initial_state.type: vortex states only run under the vortex kind")
    if kind == "vortex":
        if grid.dims != 2:
            problems.append("$.grid.dims: vortex scenarios require a 2D grid")
        if init is not None and init["type"] != "vortex":
            problems.append("$.initial_state.type: vortex kind expects a vortex state")
    if kind == "classical_limit_sweep":
        if "sweep" not in doc:
            problems.append("$.sweep: required for classical_limit_sweep")
        if init is not None and init["type"] != "gaussian":
            problems.append("$.initial_state.type: the c-sweep compares gaussian packets")
    if init is not None and init["type"] == "gaussian" and "sigma" not in init:
        problems.append("$.initial_state.sigma: required for gaussian states")

    # momentum commensurability: p L / (2 pi hbar) must be an integer
    if init is not None and init["type"] in ("plane_wave", "gaussian"):
        p = _as_vec(init.get("momentum", 0.0), grid.dims)
        if len(p) != grid.dims:
            problems.append("$.initial_state.momentum: one component per axis required")
        else:
            for axis, (pj, length) in enumerate(zip(p, grid.lengths)):
                cycles = pj * length / (2 * math.pi * params.hbar)
                if abs(cycles - round(cycles)) > 1e-9:
                    problems.append(
                        f"$.initial_state.momentum[{axis}]: p*L/(2*pi*hbar) = {cycles:g} "
                        "is not an integer (incommensurate with the periodic box)"
                    )

    # step bounds
    stepping = doc["stepping"]
    dt = stepping["dt"]
    safety = stepping["cfl_safety"]
    if dt is not None:
        if kind == "schrodinger":
            bound = safety * 2 * params.mass * min(grid.spacing) ** 2 / params.hbar
            if dt > bound * (1 + 1e-12):
                problems.append(
                    f"$.stepping.dt: {dt:g} exceeds the splitting budget {bound:g}"
                )
        elif kind != "vortex":
            bound = safety * min(grid.spacing) / params.c
            if dt > bound * (1 + 1e-12):
                problems.append(f"$.stepping.dt: {dt:g} violates the CFL bound {bound:g}")

    # residual selection vs scenario kind
    for i, eq in enumerate(doc["residuals"]):
        if kind in ("free_kg", "charged_kg", "convergence") and eq in SCH_RESIDUALS:
            problems.append(f"$.residuals[{i}]: {eq} applies to Schrodinger series only")
        if kind == "schrodinger" and eq in KG_RESIDUALS:
            problems.append(f"$.residuals[{i}]: {eq} applies to K-G series only")
        if eq in ("continuity_charged", "action_charged") and doc["potential"]["type"] == "none":
            problems.append(f"$.residuals[{i}]: {eq} needs a potential")

    # grid vector lengths
    for key in ("points", "lengths"):
        v = doc["grid"][key]
        if isinstance(v, list) and len(v) != grid.dims:
            problems.append(f"$.grid.{key}: expected {grid.dims} entries")
    return problems


def parse_config(path: str | Path) -> ScenarioConfig:
    """Load, validate and materialize a scenario configuration."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"$: not valid JSON ({exc})"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["$: top-level value must be an object"])

    merged = _merge_defaults(doc)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(merged), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError([f"{e.json_path}: {e.message}" for e in errors])

    grid_spec = merged["grid"]
    dims = grid_spec["dims"]
    points = grid_spec["points"]
    lengths = grid_spec["lengths"]
    points = tuple(int(p) for p in (points if isinstance(points, list) else [points] * dims))
    lengths = tuple(float(L) for L in (lengths if isinstance(lengths, list) else [lengths] * dims))
    try:
        grid = grid_create(dims, points, lengths)
    except ValueError as exc:
        raise ConfigError([f"$.grid: {exc}"]) from None

    phys = merged["physical"]
    params = PhysicalParams(
        hbar=phys["hbar"], mass=phys["mass"], c=phys["c"], charge=phys["charge"]
    )

    problems = _semantic_checks(merged, grid, params)
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(kind=merged["kind"], grid=grid, params=params, raw=merged)
