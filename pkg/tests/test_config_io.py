import json

import numpy as np
import pytest

from kghydro import PhysicalParams, decompose, grid_create, init_gaussian_packet
from kghydro.config import ConfigError, parse_config
from kghydro.snapshot_io import export_snapshot, import_snapshot, snapshot_columns

NAT = PhysicalParams()


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


BASE = {
    "kind": "free_kg",
    "grid": {"dims": 1, "points": 64, "lengths": 8 * np.pi},
    "initial_state": {"type": "plane_wave", "momentum": 1.0},
}


def test_minimal_config_materializes_defaults(tmp_path):
    cfg = parse_config(write_config(tmp_path, BASE))
    assert cfg.params == PhysicalParams(hbar=1.0, mass=1.0, c=1.0, charge=0.0)
    assert cfg.stepping["cfl_safety"] == 0.5
    assert cfg.stepping["snapshots"] == 5
    assert cfg.raw["potential"] == {"type": "none"}
    assert cfg.residuals == ["continuity_free", "action_free"]
    assert cfg.grid.shape == (64,)


def test_incommensurate_momentum_rejected(tmp_path):
    doc = dict(BASE, initial_state={"type": "plane_wave", "momentum": 1.5})
    doc["grid"] = {"dims": 1, "points": 64, "lengths": 2 * np.pi}
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, doc))
    assert any("initial_state.momentum" in p for p in err.value.problems)


def test_unknown_key_rejected(tmp_path):
    doc = dict(BASE)
    doc["dampening"] = 0.1
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, doc))
    assert any("dampening" in p for p in err.value.problems)


def test_nested_unknown_key_rejected(tmp_path):
    doc = dict(BASE, stepping={"dt": 0.01, "viscosity": 1.0})
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, doc))
    assert any("viscosity" in p for p in err.value.problems)


def test_cfl_violation_rejected_before_compute(tmp_path):
    doc = dict(BASE, stepping={"dt": 10.0})
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, doc))
    assert any("CFL" in p for p in err.value.problems)


def test_charged_residual_requires_potential(tmp_path):
    doc = dict(BASE, kind="charged_kg", residuals=["continuity_charged"])
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, doc))
    assert any("needs a potential" in p for p in err.value.problems)


def test_vortex_requires_2d(tmp_path):
    doc = {
        "kind": "vortex",
        "grid": {"dims": 1, "points": 64, "lengths": 16.0},
        "initial_state": {"type": "vortex"},
    }
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, doc))
    assert any("2D" in p for p in err.value.problems)


def test_bad_json_reported(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)


# --- snapshot io -------------------------------------------------------------


def make_snapshot(n=256, length=25.0):
    g = grid_create(1, n, length)
    state = init_gaussian_packet(g, NAT, center=length / 2, sigma=1.0)
    hydro = decompose(state.psi, state.pi, NAT)
    return g, state, hydro


def test_csv_shape_and_header(tmp_path):
    g, state, hydro = make_snapshot()
    csv_path, meta_path = export_snapshot(state.psi.values, hydro, NAT, tmp_path / "snap")
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == ",".join(snapshot_columns(1))
    assert lines[0] == "ix,re_psi,im_psi,amp,action,rho,j_x,vqu_rel,vqu_nonrel,mask"
    assert len(lines) == 1 + 256
    meta = json.loads(meta_path.read_text())
    assert meta["grid"]["points"] == [256]
    assert meta["energy_sign"] == 1


def test_reimport_is_bit_exact(tmp_path):
    g, state, hydro = make_snapshot()
    csv_path, _ = export_snapshot(state.psi.values, hydro, NAT, tmp_path / "snap")
    grid2, psi2, data, meta = import_snapshot(csv_path)
    assert grid2.shape == g.shape
    assert np.array_equal(psi2, state.psi.values)  # 17 significant digits round-trip
    assert np.array_equal(data["mask"], hydro.node_mask)
    um = ~hydro.node_mask
    assert np.array_equal(data["amp"][um], hydro.amplitude.values[um])


def test_masked_points_have_empty_vqu(tmp_path):
    g, state, hydro = make_snapshot()
    assert hydro.node_mask.any()  # gaussian tails are masked on this box
    csv_path, _ = export_snapshot(state.psi.values, hydro, NAT, tmp_path / "snap")
    lines = csv_path.read_text().strip().splitlines()
    cols = lines[0].split(",")
    i_mask = cols.index("mask")
    i_vr, i_vn = cols.index("vqu_rel"), cols.index("vqu_nonrel")
    masked_rows = [ln.split(",") for ln in lines[1:] if ln.split(",")[i_mask] == "1"]
    assert masked_rows
    assert all(r[i_vr] == "" and r[i_vn] == "" for r in masked_rows)


def test_2d_csv_columns(tmp_path):
    g = grid_create(2, 16, 16.0)
    from kghydro import init_plane_wave

    state = init_plane_wave(g, NAT, (2 * np.pi / 16.0, 0.0), +1)
    hydro = decompose(state.psi, state.pi, NAT)
    csv_path, _ = export_snapshot(state.psi.values, hydro, NAT, tmp_path / "snap2d")
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "ix,iy,re_psi,im_psi,amp,action,rho,j_x,j_y,vqu_rel,vqu_nonrel,mask"
    assert len(lines) == 1 + 16 * 16
