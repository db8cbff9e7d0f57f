"""Strang-split spectral Schrodinger evolution.

Used as the nonrelativistic reference: its norm is conserved to roundoff
(each substep is a unitary multiplier), which makes it a clean oracle for
the K-G norm drift and for the classical-limit comparison.

    i hbar phi_t = -(hbar^2/2m) lap(phi) + V phi

is advanced by half-potential / full-kinetic / half-potential. The charged
variant advances i hbar phi_t = (1/2m)(-i hbar grad - eA)^2 phi + eW phi
and supports spatially uniform A(t), for which the gauged kinetic operator
stays diagonal in k with phase (hbar k - eA)^2 / 2m.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ComplexField, Grid, RealField
from .kg import EmPotential, PhysicalParams, SolverInstability, StepControl

__all__ = [
    "SchState",
    "schrodinger_step_control",
    "schrodinger_step",
    "schrodinger_step_charged",
    "evolve_schrodinger",
]


@dataclass(frozen=True)
class SchState:
    phi: ComplexField
    time: float

    @property
    def grid(self) -> Grid:
        return self.phi.grid


def schrodinger_step_control(
    grid: Grid,
    params: PhysicalParams,
    dt: float | None = None,
    steps_per_snapshot: int = 1,
    cfl_safety: float = 0.5,
) -> StepControl:
    """Step control under the splitting accuracy budget dt <= s*2m*dx^2/hbar."""
    bound = cfl_safety * 2 * params.mass * min(grid.spacing) ** 2 / params.hbar
    if dt is None:
        dt = bound
    if abs(dt) > bound * (1 + 1e-12):
        raise ValueError(
            f"dt={dt:g} exceeds the splitting budget {bound:g} "
            f"(safety {cfl_safety} on 2m*dx^2/hbar)"
        )
    return StepControl(dt=dt, steps_per_snapshot=steps_per_snapshot, cfl_safety=cfl_safety)


def _check_finite(phi: np.ndarray, t: float):
    if not np.all(np.isfinite(phi)):
        raise SolverInstability(f"non-finite Schrodinger values at t={t:g}")


def schrodinger_step(
    state: SchState,
    params: PhysicalParams,
    potential_v: RealField | None,
    control: StepControl,
) -> SchState:
    """One Strang-split step with a static potential V(x)."""
    grid = state.grid
    dt = control.dt
    phi = state.phi.values
    if potential_v is not None:
        half = np.exp(-0.5j * potential_v.values * dt / params.hbar)
        phi = half * phi
    kinetic = np.exp(-0.5j * params.hbar * grid.k_squared * dt / params.mass)
    phi = np.fft.ifftn(kinetic * np.fft.fftn(phi))
    if potential_v is not None:
        phi = half * phi
    _check_finite(phi, state.time)
    return SchState(ComplexField(grid, phi), time=state.time + dt)


def schrodinger_step_charged(
    state: SchState,
    params: PhysicalParams,
    potential: EmPotential | None,
    control: StepControl,
) -> SchState:
    """One gauged Strang-split step; W(x,t) arbitrary, A(t) spatially uniform.

    Time-dependent potentials are sampled at the step midpoint (2nd order).
    With charge = 0 this is identical to the free step.
    """
    grid = state.grid
    dt = control.dt
    if potential is None or params.charge == 0.0:
        return schrodinger_step(state, params, None, control)
    if not potential.uniform_vector:
        raise NotImplementedError(
            "gauged split-stepping supports spatially uniform vector potentials only"
        )
    e = params.charge
    t_mid = state.time + dt / 2
    w = potential.sample_scalar(grid, t_mid)
    a = tuple(float(np.ravel(aj)[0]) for aj in potential.sample_vector(grid, t_mid))

    phi = state.phi.values
    half = np.exp(-0.5j * e * w * dt / params.hbar)
    phi = half * phi
    hk_minus_ea = sum(
        (params.hbar * k - e * aj) ** 2 for k, aj in zip(grid._k_broadcast, a)
    )
    kinetic = np.exp(-0.5j * hk_minus_ea * dt / (params.mass * params.hbar))
    phi = np.fft.ifftn(kinetic * np.fft.fftn(phi))
    phi = half * phi
    _check_finite(phi, state.time)
    return SchState(ComplexField(grid, phi), time=state.time + dt)


def evolve_schrodinger(
    state: SchState,
    params: PhysicalParams,
    control: StepControl,
    n_snapshots: int,
    potential_v: RealField | None = None,
    potential: EmPotential | None = None,
) -> list[SchState]:
    """Collect ``n_snapshots`` states including the initial one."""
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    if potential_v is not None and potential is not None:
        raise ValueError("pass either a static V(x) or an EM potential, not both")
    snaps = [state]
    current = state
    for _ in range(n_snapshots - 1):
        for _ in range(control.steps_per_snapshot):
            if potential is not None:
                current = schrodinger_step_charged(current, params, potential, control)
            else:
                current = schrodinger_step(current, params, potential_v, control)
        snaps.append(current)
    return snaps
