import numpy as np
import pytest

from kghydro import (
    PhysicalParams,
    SchState,
    complex_field,
    constant_potential,
    evolve_schrodinger,
    grid_create,
    real_field,
    schrodinger_step,
    schrodinger_step_charged,
    schrodinger_step_control,
    volume_integral,
)

NAT = PhysicalParams()


def plane_wave_state(grid, p):
    x = grid.axes[0]
    return SchState(complex_field(grid, np.exp(1j * p * x)), time=0.0)


def gaussian_state(grid, center, sigma, p0=0.0):
    x = grid.axes[0]
    phi = np.exp(-((x - center) ** 2) / (4 * sigma**2)) * np.exp(1j * p0 * x)
    phi /= np.sqrt(np.sum(np.abs(phi) ** 2) * grid.cell_volume)
    return SchState(complex_field(grid, phi), time=0.0)


def phase_rate(states, idx=0):
    t = np.array([s.time for s in states])
    ph = np.unwrap([np.angle(s.phi.values.flat[idx]) for s in states])
    return -np.polyfit(t, ph, 1)[0]


def test_free_plane_wave_dispersion():
    g = grid_create(1, 64, 2 * np.pi)
    ctrl = schrodinger_step_control(g, NAT, dt=0.001, steps_per_snapshot=100)
    snaps = evolve_schrodinger(plane_wave_state(g, 1.0), NAT, ctrl, 10)
    assert phase_rate(snaps) == pytest.approx(0.5, rel=1e-8)  # p^2/2m


def test_free_gaussian_spreading_law():
    g = grid_create(1, 256, 40.0)
    sigma = 1.0
    ctrl = schrodinger_step_control(g, NAT, dt=0.002, steps_per_snapshot=250)
    snaps = evolve_schrodinger(gaussian_state(g, 20.0, sigma), NAT, ctrl, 5)
    x = g.axes[0]
    for s in snaps:
        n = np.abs(s.phi.values) ** 2
        n /= np.sum(n) * g.cell_volume
        mean = np.sum(x * n) * g.cell_volume
        var = np.sum((x - mean) ** 2 * n) * g.cell_volume
        expected = sigma**2 + (s.time / (2 * sigma)) ** 2  # hbar = m = 1
        assert var == pytest.approx(expected, rel=1e-6)


def test_strang_local_order():
    # one dt step vs two dt/2 steps differ at O(dt^3) locally
    g = grid_create(1, 128, 20.0)
    v = real_field(g, 0.5 * (g.axes[0] - 10.0) ** 2)
    s0 = gaussian_state(g, 10.0, 1.0)
    errs = []
    for dt in (4e-3, 2e-3):
        ctrl_full = schrodinger_step_control(g, NAT, dt=dt)
        ctrl_half = schrodinger_step_control(g, NAT, dt=dt / 2)
        one = schrodinger_step(s0, NAT, v, ctrl_full)
        two = schrodinger_step(schrodinger_step(s0, NAT, v, ctrl_half), NAT, v, ctrl_half)
        errs.append(np.linalg.norm(one.phi.values - two.phi.values))
    order = np.log2(errs[0] / errs[1])
    assert order == pytest.approx(3.0, abs=0.2)


def test_unitarity_per_step():
    g = grid_create(1, 256, 40.0)
    v = real_field(g, 0.5 * (g.axes[0] - 20.0) ** 2)
    s = gaussian_state(g, 18.0, 1.2)
    ctrl = schrodinger_step_control(g, NAT, dt=0.005)
    norm0 = volume_integral(real_field(g, np.abs(s.phi.values) ** 2))
    for _ in range(200):
        s = schrodinger_step(s, NAT, v, ctrl)
        norm = volume_integral(real_field(g, np.abs(s.phi.values) ** 2))
        assert abs(norm - norm0) / norm0 < 1e-12


def test_charged_zero_charge_identical():
    g = grid_create(1, 128, 20.0)
    s0 = gaussian_state(g, 10.0, 1.0)
    pot = constant_potential(1.0, 0.5, dims=1)
    ctrl = schrodinger_step_control(g, NAT, dt=0.004)
    a = schrodinger_step(s0, NAT, None, ctrl)
    b = schrodinger_step_charged(s0, NAT, pot, ctrl)
    assert np.array_equal(a.phi.values, b.phi.values)


def test_charged_constant_w_gauge_phase():
    # constant W0: exp(-i e W0 t / hbar) global phase relative to the free run
    g = grid_create(1, 128, 20.0)
    params = PhysicalParams(charge=0.7)
    w0 = 1.3
    pot = constant_potential(w0, 0.0, dims=1)
    s_free = gaussian_state(g, 10.0, 1.0)
    s_chg = s_free
    ctrl = schrodinger_step_control(g, params, dt=0.004)
    for _ in range(250):
        s_free = schrodinger_step(s_free, params, None, ctrl)
        s_chg = schrodinger_step_charged(s_chg, params, pot, ctrl)
    t = s_free.time
    expected = s_free.phi.values * np.exp(-1j * params.charge * w0 * t / params.hbar)
    assert np.max(np.abs(s_chg.phi.values - expected)) < 1e-12


def test_charged_constant_a_minimal_coupling_dispersion():
    # plane wave p under constant A0: energy (p - eA0)^2 / 2m from phase rate
    g = grid_create(1, 64, 2 * np.pi)
    params = PhysicalParams(charge=0.5)
    a0 = 0.8
    pot = constant_potential(0.0, a0, dims=1)
    ctrl = schrodinger_step_control(g, params, dt=0.001, steps_per_snapshot=100)
    s = plane_wave_state(g, 2.0)
    snaps = [s]
    for _ in range(9):
        for _ in range(ctrl.steps_per_snapshot):
            s = schrodinger_step_charged(s, params, pot, ctrl)
        snaps.append(s)
    expected = (2.0 - params.charge * a0) ** 2 / 2
    assert phase_rate(snaps) == pytest.approx(expected, rel=1e-8)


def test_charged_spatially_varying_a_rejected():
    from kghydro.kg import EmPotential

    g = grid_create(1, 64, 2 * np.pi)
    params = PhysicalParams(charge=1.0)
    pot = EmPotential(
        scalar=lambda xs, t: np.zeros_like(xs[0]),
        vector=(lambda xs, t: np.sin(xs[0]),),
        uniform_vector=False,
    )
    ctrl = schrodinger_step_control(g, params, dt=0.001)
    with pytest.raises(NotImplementedError):
        schrodinger_step_charged(plane_wave_state(g, 1.0), params, pot, ctrl)


def test_sch_dt_budget_enforced():
    g = grid_create(1, 256, 10.0)
    with pytest.raises(ValueError, match="budget"):
        schrodinger_step_control(g, NAT, dt=0.5)
