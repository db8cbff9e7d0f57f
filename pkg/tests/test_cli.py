import json

import numpy as np
import pytest

from kghydro.cli import EXIT_CONFIG, EXIT_INSTABILITY, EXIT_OK, main


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def free_kg_config(**overrides):
    doc = {
        "kind": "free_kg",
        "grid": {"dims": 1, "points": 128, "lengths": 8 * np.pi},
        "initial_state": {"type": "gaussian", "sigma": 1.0, "center": 4 * np.pi},
        "stepping": {"dt": 0.05, "steps_per_snapshot": 4, "snapshots": 5, "warmup_steps": 10},
    }
    doc.update(overrides)
    return doc


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_run_happy_path(tmp_path, capsys):
    cfg = write(tmp_path, free_kg_config())
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_status"] == "ok"
    assert {r["name"] for r in man["reports"]} == {"continuity_free", "action_free"}
    snap_csvs = [f for f in man["files"] if f["kind"] == "snapshot_csv"]
    assert len(snap_csvs) == 5
    # config echo carries the materialized defaults
    assert man["config"]["physical"]["c"] == 1.0


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, free_kg_config(initial_state={"type": "plane_wave", "momentum": 0.123}))
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "out") == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "momentum" in err


def test_unknown_key_exit_code(tmp_path, capsys):
    doc = free_kg_config()
    doc["dampening"] = 1.0
    cfg = write(tmp_path, doc)
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "out") == EXIT_CONFIG


def test_instability_exit_and_manifest(tmp_path):
    # cfl_safety = 1.0 passes the formal bound but exceeds the RK4 stability
    # region once the mass term is included: the run must abort, keep the
    # stable snapshots, and mark the manifest
    doc = free_kg_config(
        stepping={
            "dt": None,
            "steps_per_snapshot": 40,
            "snapshots": 8,
            "cfl_safety": 1.0,
            "warmup_steps": 0,
        }
    )
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == EXIT_INSTABILITY
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_status"] == "instability"
    assert any("instability" in note for note in man["notes"])


def test_determinism_byte_identical(tmp_path):
    cfg = write(tmp_path, free_kg_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli("run", "--config", cfg, "--out", out1) == EXIT_OK
    assert run_cli("run", "--config", cfg, "--out", out2) == EXIT_OK
    man1 = json.loads((out1 / "manifest.json").read_text())
    man2 = json.loads((out2 / "manifest.json").read_text())
    for f1, f2 in zip(man1["files"], man2["files"]):
        assert f1 == f2
        assert (out1 / f1["path"]).read_bytes() == (out2 / f2["path"]).read_bytes()
    for key in ("started_utc", "finished_utc"):
        man1.pop(key), man2.pop(key)
    assert man1 == man2


def test_verify_manifest_detects_corruption(tmp_path, capsys):
    cfg = write(tmp_path, free_kg_config())
    out = tmp_path / "out"
    run_cli("run", "--config", cfg, "--out", out)
    man_path = out / "manifest.json"
    assert run_cli("verify-manifest", man_path) == EXIT_OK
    man = json.loads(man_path.read_text())
    victim = out / man["files"][0]["path"]
    victim.write_text(victim.read_text() + "tampered\n")
    assert run_cli("verify-manifest", man_path) == 1
    assert "size mismatch" in capsys.readouterr().err


def test_plot_emits_svg(tmp_path):
    cfg = write(tmp_path, free_kg_config())
    out = tmp_path / "out"
    run_cli("run", "--config", cfg, "--out", out)
    assert run_cli("plot", out / "manifest.json") == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    svgs = [f for f in man["files"] if f["kind"] == "plot_svg"]
    assert svgs and (out / svgs[0]["path"]).exists()
    assert run_cli("verify-manifest", out / "manifest.json") == EXIT_OK


def test_charged_scenario_runs(tmp_path):
    doc = {
        "kind": "charged_kg",
        "grid": {"dims": 1, "points": 128, "lengths": 8 * np.pi},
        "physical": {"charge": 0.5},
        "initial_state": {"type": "gaussian", "sigma": 1.0, "center": 4 * np.pi},
        "potential": {"type": "constant", "w0": 0.4, "a0": 0.2},
        "stepping": {"dt": 0.05, "steps_per_snapshot": 4, "snapshots": 5},
    }
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert {r["name"] for r in man["reports"]} == {"continuity_charged", "action_charged"}


def test_schrodinger_scenario_runs(tmp_path):
    doc = {
        "kind": "schrodinger",
        "grid": {"dims": 1, "points": 128, "lengths": 40.0},
        "initial_state": {"type": "gaussian", "sigma": 1.5, "center": 20.0},
        "stepping": {"dt": 0.02, "steps_per_snapshot": 5, "snapshots": 5},
    }
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert {r["name"] for r in man["reports"]} == {"madelung_continuity", "madelung_action"}


def test_vortex_scenario_runs(tmp_path):
    doc = {
        "kind": "vortex",
        "grid": {"dims": 2, "points": 64, "lengths": 16.0},
        "initial_state": {"type": "vortex"},
        "stepping": {"dt": 0.05},
    }
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == EXIT_OK
    rep = json.loads((out / "reports" / "circulation.json").read_text())
    assert rep["winding_total_live"] == 1
    assert rep["contours"][0]["quanta"] == 1
    assert rep["contours"][0]["circulation"] == pytest.approx(2 * np.pi)
    assert not rep["irrotational"]["applicable"]
    assert run_cli("plot", out / "manifest.json") == EXIT_OK


def test_convergence_scenario_runs(tmp_path):
    doc = {
        "kind": "convergence",
        "grid": {"dims": 1, "points": 128, "lengths": 24.0},
        "initial_state": {"type": "gaussian", "sigma": 1.0, "center": 12.0},
        "stepping": {"dt": 0.005, "snapshots": 5},
        "convergence": {"steps_per_snapshot_levels": [16, 8, 4]},
    }
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == EXIT_OK
    rep = json.loads((out / "reports" / "convergence.json").read_text())
    for eq in ("continuity_free", "action_free"):
        assert rep["observed_order"][eq] == pytest.approx(2.0, abs=0.4)


def test_list_scenarios(capsys):
    assert run_cli("list-scenarios") == EXIT_OK
    out = capsys.readouterr().out
    assert "free_kg" in out and "vortex" in out
