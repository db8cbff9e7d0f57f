"""Scenario orchestration: evolve, decompose, verify, persist.

One scenario per invocation. All data artifacts (snapshot CSVs, sidecars,
report JSONs) are byte-deterministic for a given config and toolkit
version; the manifest additionally records wall times and is compared
modulo those fields.
"""
from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .circulation import (
    Contour,
    contour_circulation,
    export_winding_csv,
    irrotational_check,
    plaquette_winding,
)
from .config import ScenarioConfig
from .grids import complex_field
from .hydro import decompose, decompose_nonrel, quantum_potential_rel
from .kg import (
    KgState,
    PhysicalParams,
    SolverInstability,
    StepControl,
    evolve_kg,
    init_charged_gaussian_packet,
    init_gaussian_packet,
    init_plane_wave,
    init_vortex,
    step_control,
)
from .residuals import (
    RESIDUAL_FUNCTIONS,
    classical_limit_compare,
    convergence_study,
    kg_series,
    sch_series,
)
from .schrodinger import SchState, evolve_schrodinger, schrodinger_step_control
from .snapshot_io import export_snapshot

__all__ = ["run_scenario", "verify_manifest", "RunResult"]


@dataclass
class RunResult:
    manifest_path: Path
    exit_status: str  # "ok" | "instability"

    @property
    def ok(self) -> bool:
        return self.exit_status == "ok"


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


class _Manifest:
    def __init__(self, config: ScenarioConfig, out_dir: Path):
        self.out_dir = out_dir
        self.doc = {
            "toolkit_version": __version__,
            "kind": config.kind,
            "config": config.raw,
            "started_utc": _utcnow(),
            "finished_utc": None,
            "exit_status": "ok",
            "files": [],
            "reports": [],
            "notes": [],
        }

    def add_file(self, path: Path, kind: str):
        rel = path.relative_to(self.out_dir).as_posix()
        self.doc["files"].append({"path": rel, "bytes": path.stat().st_size, "kind": kind})

    def add_report(self, name: str, path: Path):
        self.doc["reports"].append({"name": name, "path": path.relative_to(self.out_dir).as_posix()})

    def finish(self, status: str) -> Path:
        self.doc["exit_status"] = status
        self.doc["finished_utc"] = _utcnow()
        path = self.out_dir / "manifest.json"
        _write_json(path, self.doc)
        return path


def _make_control(config: ScenarioConfig) -> StepControl:
    stepping = config.stepping
    if config.kind == "schrodinger":
        return schrodinger_step_control(
            config.grid,
            config.params,
            dt=stepping["dt"],
            steps_per_snapshot=stepping["steps_per_snapshot"],
            cfl_safety=stepping["cfl_safety"],
        )
    return step_control(
        config.grid,
        config.params,
        dt=stepping["dt"],
        steps_per_snapshot=stepping["steps_per_snapshot"],
        cfl_safety=stepping["cfl_safety"],
    )


def _initial_kg_state(config: ScenarioConfig) -> KgState:
    init = config.initial_state
    grid, params = config.grid, config.params
    sign = init.get("energy_sign", 1)
    if init["type"] == "plane_wave":
        return init_plane_wave(grid, params, _vec(init.get("momentum", 0.0), grid.dims), sign)
    if init["type"] == "gaussian":
        center = _vec(init.get("center", [L / 2 for L in grid.lengths]), grid.dims)
        pot_spec = config.raw["potential"]
        if pot_spec["type"] == "constant" and params.charge != 0.0:
            return init_charged_gaussian_packet(
                grid, params, center, init["sigma"],
                w0=pot_spec.get("w0", 0.0),
                a0=tuple(_vec(pot_spec.get("a0", 0.0), grid.dims)),
                momentum=_vec(init.get("momentum", 0.0), grid.dims),
                energy_sign=sign,
            )
        return init_gaussian_packet(
            grid, params, center, init["sigma"],
            momentum=_vec(init.get("momentum", 0.0), grid.dims), energy_sign=sign,
        )
    raise AssertionError(f"unhandled initial state {init['type']}")


def _vec(value, dims):
    if isinstance(value, (int, float)):
        return [float(value)] * dims
    return [float(v) for v in value]


def _export_series(manifest: _Manifest, config: ScenarioConfig, series, snap_dir: Path):
    if not config.raw["output"]["snapshots"]:
        return
    snap_dir.mkdir(parents=True, exist_ok=True)
    dt_snap = series.dt_snap
    n = len(series.times)
    for i in range(n):
        hydro = series.hydro[i]
        if 0 < i < n - 1:
            amps = [series.hydro[i - 1].amplitude, hydro.amplitude, series.hydro[i + 1].amplitude]
            hydro = hydro.with_vqu_rel(
                quantum_potential_rel(amps, series.params, dt_snap, mask=hydro.node_mask)
            )
        if series.kind == "kg":
            psi_vals = series.wave[i].psi.values
        else:
            psi_vals = series.wave[i].phi.values
        csv_path, meta_path = export_snapshot(
            psi_vals, hydro, series.params, snap_dir / f"snap_{i:04d}"
        )
        manifest.add_file(csv_path, "snapshot_csv")
        manifest.add_file(meta_path, "snapshot_meta")


def _run_residuals(manifest: _Manifest, config: ScenarioConfig, series, report_dir: Path):
    report_dir.mkdir(parents=True, exist_ok=True)
    for eq in config.residuals:
        report = RESIDUAL_FUNCTIONS[eq](series)
        path = report_dir / f"{eq}.json"
        _write_json(path, report.to_dict())
        manifest.add_file(path, "residual_report")
        manifest.add_report(eq, path)


def _run_kg(config: ScenarioConfig, manifest: _Manifest, out_dir: Path) -> str:
    control = _make_control(config)
    potential = config.potential()
    state = _initial_kg_state(config)
    warmup = config.stepping["warmup_steps"]
    status = "ok"
    try:
        if warmup:
            warm = StepControl(control.dt, warmup, control.cfl_safety)
            state = evolve_kg(state, config.params, warm, 2, potential=potential)[-1]
        states = evolve_kg(
            state, config.params, control, config.stepping["snapshots"], potential=potential
        )
    except SolverInstability as exc:
        manifest.doc["notes"].append(f"instability: {exc}")
        states = exc.last_stable
        status = "instability"
    if len(states) >= 3:
        series = kg_series(states, config.params, potential=potential)
        _export_series(manifest, config, series, out_dir / "snapshots")
        if status == "ok":
            _run_residuals(manifest, config, series, out_dir / "reports")
    return status


def _run_schrodinger(config: ScenarioConfig, manifest: _Manifest, out_dir: Path) -> str:
    control = _make_control(config)
    potential = config.potential()
    grid, params = config.grid, config.params
    init = config.initial_state
    if init["type"] == "plane_wave":
        p = _vec(init.get("momentum", 0.0), grid.dims)
        p = [p] if grid.dims == 1 and np.isscalar(p) else p
        phase = np.zeros(grid.shape)
        for pj, mesh in zip(np.atleast_1d(p), grid.meshes()):
            phase = phase + pj * mesh / params.hbar
        phi = np.exp(1j * phase)
    else:
        center = _vec(init.get("center", [L / 2 for L in grid.lengths]), grid.dims)
        center = np.atleast_1d(center)
        r2 = np.zeros(grid.shape)
        for c0, mesh in zip(center, grid.meshes()):
            r2 = r2 + (mesh - c0) ** 2
        phi = np.exp(-r2 / (4 * init["sigma"] ** 2)).astype(complex)
        phi /= np.sqrt(np.sum(np.abs(phi) ** 2) * grid.cell_volume)
    state = SchState(complex_field(grid, phi), 0.0)
    warmup = config.stepping["warmup_steps"]
    if warmup:
        warm = StepControl(control.dt, warmup, control.cfl_safety)
        state = evolve_schrodinger(state, params, warm, 2, potential=potential)[-1]
    states = evolve_schrodinger(
        state, params, control, config.stepping["snapshots"], potential=potential
    )
    series = sch_series(states, params, potential=potential)
    _export_series(manifest, config, series, out_dir / "snapshots")
    _run_residuals(manifest, config, series, out_dir / "reports")
    return "ok"


def _run_classical_sweep(config: ScenarioConfig, manifest: _Manifest, out_dir: Path) -> str:
    grid = config.grid
    base = config.params
    init = config.initial_state
    sweep = config.raw["sweep"]
    t_final = float(sweep["time"])
    n_snap = config.stepping["snapshots"]
    center = _vec(init.get("center", [L / 2 for L in grid.lengths]), grid.dims)
    sigma = init["sigma"]

    # Schrodinger reference (c-independent)
    phi = None
    r2 = np.zeros(grid.shape)
    for c0, mesh in zip(np.atleast_1d(center), grid.meshes()):
        r2 = r2 + (mesh - c0) ** 2
    phi = np.exp(-r2 / (4 * sigma**2)).astype(complex)
    phi /= np.sqrt(np.sum(np.abs(phi) ** 2) * grid.cell_volume)
    seg = t_final / (n_snap - 1)
    sch_bound = 0.5 * 2 * base.mass * min(grid.spacing) ** 2 / base.hbar
    sch_steps = max(1, int(np.ceil(seg / min(sch_bound, seg))))
    sch_ctrl = schrodinger_step_control(
        grid, base, dt=seg / sch_steps, steps_per_snapshot=sch_steps
    )
    sch = sch_series(
        evolve_schrodinger(SchState(complex_field(grid, phi), 0.0), base, sch_ctrl, n_snap),
        base,
    )

    runs = []
    for c in sweep["c_values"]:
        params = PhysicalParams(hbar=base.hbar, mass=base.mass, c=float(c), charge=base.charge)
        state = init_gaussian_packet(grid, params, center, sigma, energy_sign=+1, normalize=False)
        # match the Schrodinger amplitude profile exactly
        scale = phi.flat[np.argmax(np.abs(phi))] / state.psi.values.flat[np.argmax(np.abs(phi))]
        state = KgState(
            complex_field(grid, state.psi.values * scale),
            complex_field(grid, state.pi.values * scale),
            0.0,
        )
        # resolve both the CFL bound and the rest-energy phase rotation
        rest_budget = 0.04 * params.hbar / (params.mass * params.c**2)
        cfl = 0.5 * min(grid.spacing) / params.c
        steps = max(1, int(np.ceil(seg / min(rest_budget, cfl))))
        ctrl = step_control(grid, params, dt=seg / steps, steps_per_snapshot=steps)
        runs.append((float(c), kg_series(evolve_kg(state, params, ctrl, n_snap), params)))

    report = classical_limit_compare(runs, sch)
    path = out_dir / "reports" / "classical_limit.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, report.to_dict())
    manifest.add_file(path, "classical_limit_report")
    manifest.add_report("classical_limit", path)
    return "ok"


def _run_vortex(config: ScenarioConfig, manifest: _Manifest, out_dir: Path) -> str:
    grid, params = config.grid, config.params
    init = config.initial_state
    center = _vec(init.get("center", [L / 2 for L in grid.lengths]), 2)
    state = init_vortex(grid, params, center)
    hydro = decompose(state.psi, state.pi, params)

    wm = plaquette_winding(state.psi)
    report_dir = out_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    wpath = report_dir / "winding.csv"
    export_winding_csv(wm, wpath)
    manifest.add_file(wpath, "winding_csv")

    contours = config.raw.get("contours")
    if not contours:
        nx, ny = grid.shape
        contours = [{"corner": [nx // 4, ny // 4], "size": [nx // 2, ny // 2]}]
    gammas = []
    for spec in contours:
        i0, j0 = spec["corner"]
        w, h = spec["size"]
        loop = Contour.rectangle(i0, j0, i0 + w, j0 + h)
        gamma = contour_circulation(state.psi, loop, params)
        gammas.append(
            {
                "corner": [i0, j0],
                "size": [w, h],
                "circulation": gamma,
                "quanta": int(round(gamma / (2 * np.pi * params.hbar))),
            }
        )
    irr = irrotational_check(hydro, params)
    payload = {
        "winding_total_live": wm.total(),
        "under_resolved": wm.under_resolved,
        "contours": gammas,
        "irrotational": irr.to_dict(),
    }
    cpath = report_dir / "circulation.json"
    _write_json(cpath, payload)
    manifest.add_file(cpath, "circulation_report")
    manifest.add_report("circulation", cpath)

    if config.raw["output"]["snapshots"]:
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)
        csv_path, meta_path = export_snapshot(
            state.psi.values, hydro, params, snap_dir / "snap_0000"
        )
        manifest.add_file(csv_path, "snapshot_csv")
        manifest.add_file(meta_path, "snapshot_meta")
    return "ok"


def _run_convergence(config: ScenarioConfig, manifest: _Manifest, out_dir: Path) -> str:
    control = _make_control(config)
    potential = config.potential()
    state0 = _initial_kg_state(config)
    warmup = config.stepping["warmup_steps"] or 80
    warm = StepControl(control.dt, warmup, control.cfl_safety)
    state0 = evolve_kg(state0, config.params, warm, 2, potential=potential)[-1]
    levels = config.raw["convergence"]["steps_per_snapshot_levels"]

    def evaluate(spshot):
        ctrl = StepControl(control.dt, int(spshot), control.cfl_safety)
        states = evolve_kg(
            state0, config.params, ctrl, config.stepping["snapshots"], potential=potential
        )
        series = kg_series(states, config.params, potential=potential)
        return [RESIDUAL_FUNCTIONS[eq](series) for eq in config.residuals]

    study = convergence_study(evaluate, levels, label="steps_per_snapshot")
    path = out_dir / "reports" / "convergence.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, study.to_dict())
    manifest.add_file(path, "convergence_report")
    manifest.add_report("convergence", path)
    if any(not lv.stable for lv in study.levels):
        manifest.doc["notes"].append("instability: one or more refinement levels diverged")
        return "instability"
    return "ok"


_RUNNERS = {
    "free_kg": _run_kg,
    "charged_kg": _run_kg,
    "schrodinger": _run_schrodinger,
    "classical_limit_sweep": _run_classical_sweep,
    "vortex": _run_vortex,
    "convergence": _run_convergence,
}


def run_scenario(config: ScenarioConfig, out_dir: str | Path) -> RunResult:
    """Deterministic end-to-end run; returns the manifest location and status."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(config, out_dir)
    try:
        status = _RUNNERS[config.kind](config, manifest, out_dir)
    except SolverInstability as exc:
        manifest.doc["notes"].append(f"instability: {exc}")
        status = "instability"
    path = manifest.finish(status)
    return RunResult(manifest_path=path, exit_status=status)


def verify_manifest(manifest_path: str | Path) -> list[str]:
    """Check that every file listed in a manifest exists at its recorded size."""
    manifest_path = Path(manifest_path)
    problems = []
    try:
        doc = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return [f"cannot read manifest: {exc}"]
    base = manifest_path.parent
    for entry in doc.get("files", []):
        p = base / entry["path"]
        if not p.exists():
            problems.append(f"missing file: {entry['path']}")
        elif p.stat().st_size != entry["bytes"]:
            problems.append(
                f"size mismatch: {entry['path']} has {p.stat().st_size} bytes, "
                f"manifest records {entry['bytes']}"
            )
    return problems
