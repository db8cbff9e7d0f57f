"""CSV + JSON-sidecar snapshot persistence.

Floats are printed with 17 significant digits, which round-trips 64-bit
values exactly, so a re-imported snapshot reproduces the in-memory state
bit for bit. Masked points leave the quantum-potential columns empty; the
relativistic quantum potential column is empty where no centered time
stencil was available (series endpoints).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grids import Grid, grid_create
from .hydro import HydroState
from .kg import PhysicalParams

__all__ = ["export_snapshot", "import_snapshot", "snapshot_columns"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def snapshot_columns(dims: int) -> list[str]:
    idx = ["ix"] if dims == 1 else ["ix", "iy"]
    j_cols = ["j_x"] if dims == 1 else ["j_x", "j_y"]
    return idx + ["re_psi", "im_psi", "amp", "action", "rho"] + j_cols + [
        "vqu_rel",
        "vqu_nonrel",
        "mask",
    ]


def export_snapshot(
    psi_values: np.ndarray,
    hydro: HydroState,
    params: PhysicalParams,
    path_base: str | Path,
) -> tuple[Path, Path]:
    """Write ``<base>.csv`` and ``<base>.json``; returns both paths."""
    base = Path(path_base)
    grid = hydro.grid
    dims = grid.dims
    cols = snapshot_columns(dims)

    mask = hydro.node_mask
    vqu_rel = hydro.vqu_rel.values if hydro.vqu_rel is not None else None
    vqu_nr = hydro.vqu_nonrel.values

    lines = [",".join(cols)]
    for index in np.ndindex(grid.shape):
        row = [str(i) for i in index]
        row.append(_fmt(float(psi_values[index].real)))
        row.append(_fmt(float(psi_values[index].imag)))
        row.append(_fmt(float(hydro.amplitude.values[index])))
        row.append(_fmt(float(hydro.action.values[index])))
        row.append(_fmt(float(hydro.rho.values[index])))
        for j in hydro.current:
            row.append(_fmt(float(j.values[index])))
        masked = bool(mask[index])
        if masked or vqu_rel is None or not np.isfinite(vqu_rel[index]):
            row.append("")
        else:
            row.append(_fmt(float(vqu_rel[index])))
        row.append("" if masked else _fmt(float(vqu_nr[index])))
        row.append("1" if masked else "0")
        lines.append(",".join(row))
    csv_path = base.with_suffix(".csv")
    csv_path.write_text("\n".join(lines) + "\n")

    meta = {
        "time": hydro.time,
        "energy_sign": hydro.energy_sign,
        "params": {
            "hbar": params.hbar,
            "mass": params.mass,
            "c": params.c,
            "charge": params.charge,
        },
        "grid": {
            "dims": dims,
            "points": list(grid.shape),
            "lengths": list(grid.lengths),
        },
        "columns": cols,
    }
    meta_path = base.with_suffix(".json")
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return csv_path, meta_path


def import_snapshot(csv_path: str | Path):
    """Read a snapshot back; returns (grid, psi, fields dict, meta dict).

    psi is rebuilt from the re/im columns and is bit-identical to the
    exported state; empty cells come back as NaN.
    """
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    grid = grid_create(
        meta["grid"]["dims"], tuple(meta["grid"]["points"]), tuple(meta["grid"]["lengths"])
    )
    lines = csv_path.read_text().strip().splitlines()
    cols = lines[0].split(",")
    if cols != meta["columns"]:
        raise ValueError(f"column header mismatch in {csv_path}")
    n_idx = meta["grid"]["dims"]
    data = {c: np.full(grid.shape, np.nan) for c in cols[n_idx:]}
    mask = np.zeros(grid.shape, dtype=bool)
    for line in lines[1:]:
        parts = line.split(",")
        index = tuple(int(v) for v in parts[:n_idx])
        for name, val in zip(cols[n_idx:], parts[n_idx:]):
            if name == "mask":
                mask[index] = val == "1"
            elif val != "":
                data[name][index] = float(val)
    psi = data["re_psi"] + 1j * data["im_psi"]
    data["mask"] = mask
    return grid, psi, data, meta
