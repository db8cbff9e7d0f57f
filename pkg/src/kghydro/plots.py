"""Static SVG rendering of run artifacts.

Plots are a best-effort convenience: a failed plot is recorded in the
manifest and never aborts anything. SVGs are written without creation
dates so reruns differ only in content.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["emit_plots"]


def _savefig(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _load_snapshot_series(base: Path, doc: dict):
    from .snapshot_io import import_snapshot

    snaps = []
    for entry in doc["files"]:
        if entry["kind"] == "snapshot_csv":
            grid, psi, data, meta = import_snapshot(base / entry["path"])
            snaps.append((grid, psi, data, meta))
    return snaps


def _plot_fields_1d(plt, snaps, plot_dir: Path):
    made = []
    fig, (ax_amp, ax_vqu) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for grid, _psi, data, meta in snaps:
        x = grid.axes[0]
        ax_amp.plot(x, data["amp"], label=f"t={meta['time']:.3g}")
        ax_vqu.plot(x, data["vqu_nonrel"])
    ax_amp.set_ylabel("|psi|")
    ax_amp.legend(fontsize=8)
    ax_vqu.set_ylabel("V_qu (nonrel)")
    ax_vqu.set_xlabel("x")
    path = plot_dir / "fields_1d.svg"
    _savefig(fig, path)
    plt.close(fig)
    made.append(path)
    return made


def _plot_fields_2d(plt, snaps, plot_dir: Path):
    made = []
    grid, _psi, data, meta = snaps[-1]
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(data["amp"].T, origin="lower",
                   extent=(0, grid.lengths[0], 0, grid.lengths[1]))
    fig.colorbar(im, ax=ax, label="|psi|")
    ax.set_title(f"amplitude at t={meta['time']:.3g}")
    path = plot_dir / "amplitude_2d.svg"
    _savefig(fig, path)
    plt.close(fig)
    made.append(path)
    return made


def _plot_winding(plt, base: Path, doc: dict, plot_dir: Path):
    import csv as _csv

    wpath = None
    for entry in doc["files"]:
        if entry["kind"] == "winding_csv":
            wpath = base / entry["path"]
    if wpath is None:
        return []
    rows = list(_csv.reader(wpath.open()))[1:]
    if not rows:
        return []
    nx = max(int(r[0]) for r in rows) + 1
    ny = max(int(r[1]) for r in rows) + 1
    w = np.zeros((nx, ny))
    for i, j, val in rows:
        w[int(i), int(j)] = int(val)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(w.T, origin="lower", cmap="RdBu", vmin=-1, vmax=1)
    fig.colorbar(im, ax=ax, label="plaquette winding")
    path = plot_dir / "winding_map.svg"
    _savefig(fig, path)
    plt.close(fig)
    return [path]


def _plot_classical_limit(plt, base: Path, doc: dict, plot_dir: Path):
    for entry in doc["files"]:
        if entry["kind"] == "classical_limit_report":
            rep = json.loads((base / entry["path"]).read_text())
            fig, ax = plt.subplots(figsize=(6, 5))
            ax.loglog(rep["c_values"], rep["l2_errors"], "o-")
            ax.set_xlabel("c")
            ax.set_ylabel("relative L2 error")
            ax.set_title(f"classical limit: slope = {rep['slope']:.3f}")
            path = plot_dir / "classical_limit.svg"
            _savefig(fig, path)
            plt.close(fig)
            return [path]
    return []


def _plot_convergence(plt, base: Path, doc: dict, plot_dir: Path):
    for entry in doc["files"]:
        if entry["kind"] == "convergence_report":
            rep = json.loads((base / entry["path"]).read_text())
            fig, ax = plt.subplots(figsize=(6, 5))
            eqs = sorted(rep["observed_order"])
            for eq in eqs:
                xs, ys = [], []
                for lv in rep["levels"]:
                    if lv["stable"] and eq in lv["reports"]:
                        xs.append(lv["reports"][eq]["dt_snap"])
                        ys.append(lv["reports"][eq]["rms"])
                order = rep["observed_order"][eq]
                label = eq if order is None else f"{eq} (order = {order:.2f})"
                ax.loglog(xs, ys, "o-", label=label)
            ax.set_xlabel(rep.get("label", "dt_snap"))
            ax.set_ylabel("rms defect")
            ax.legend(fontsize=8)
            path = plot_dir / "convergence.svg"
            _savefig(fig, path)
            plt.close(fig)
            return [path]
    return []


def emit_plots(manifest_path: str | Path) -> list[Path]:
    """Render SVGs for a completed run and index them in the manifest."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    manifest_path = Path(manifest_path)
    doc = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    plot_dir = base / "plots"
    plot_dir.mkdir(parents=True, exist_ok=True)

    made: list[Path] = []
    skips: list[str] = []
    tasks = []
    kind = doc["kind"]
    if kind in ("free_kg", "charged_kg", "schrodinger"):
        snaps = _load_snapshot_series(base, doc)
        if snaps and snaps[0][0].dims == 1:
            tasks.append(("fields_1d", lambda: _plot_fields_1d(plt, snaps, plot_dir)))
        elif snaps:
            tasks.append(("fields_2d", lambda: _plot_fields_2d(plt, snaps, plot_dir)))
        else:
            skips.append("fields: no snapshots in manifest")
    if kind == "vortex":
        snaps = _load_snapshot_series(base, doc)
        if snaps:
            tasks.append(("fields_2d", lambda: _plot_fields_2d(plt, snaps, plot_dir)))
        tasks.append(("winding", lambda: _plot_winding(plt, base, doc, plot_dir)))
    if kind == "classical_limit_sweep":
        tasks.append(("classical_limit", lambda: _plot_classical_limit(plt, base, doc, plot_dir)))
    if kind == "convergence":
        tasks.append(("convergence", lambda: _plot_convergence(plt, base, doc, plot_dir)))

    for name, task in tasks:
        try:
            made.extend(task())
        except Exception as exc:  # plots must never be fatal
            skips.append(f"{name}: {exc}")

    doc["files"] = [f for f in doc["files"] if f["kind"] != "plot_svg"]
    for p in made:
        doc["files"].append(
            {"path": p.relative_to(base).as_posix(), "bytes": p.stat().st_size, "kind": "plot_svg"}
        )
    if skips:
        doc["plot_skips"] = skips
    manifest_path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return made
