"""Free and charged Klein-Gordon evolution on periodic grids.

The second-order wave equation

    (1/c^2) psi_tt - lap(psi) = -(m^2 c^2 / hbar^2) psi

is reduced to the first-order system (psi, pi = psi_t) and advanced with
classical RK4 using the spectral Laplacian. Minimal coupling to an
electromagnetic potential (W, A) replaces the derivatives by gauged ones,

    d/dt -> d/dt + i e W / hbar,      grad -> grad - i e A / hbar,

which expanded gives the update used in `kg_step_charged`:

    psi_tt = -2i(e/hbar) W psi_t - i(e/hbar) W_t psi + (e W / hbar)^2 psi
             + c^2 [ lap(psi) - i(e/hbar)(div A) psi - 2i(e/hbar) A.grad(psi)
                     - (e/hbar)^2 |A|^2 psi ]
             - (m^2 c^4 / hbar^2) psi

(rederived symbolically; tests check the e = 0 reduction is bitwise exact
and the constant-potential energy/momentum shifts).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grids import ComplexField, Grid, complex_field, div_arr, grad_arr, lap_arr, real_field, RealField

__all__ = [
    "PhysicalParams",
    "StepControl",
    "KgState",
    "EmPotential",
    "SolverInstability",
    "constant_potential",
    "step_control",
    "init_plane_wave",
    "init_charged_plane_wave",
    "init_gaussian_packet",
    "init_charged_gaussian_packet",
    "init_vortex",
    "kg_step_free",
    "kg_step_charged",
    "evolve_kg",
    "lorenz_gauge_defect",
    "commensurate_momentum",
]


@dataclass(frozen=True)
class PhysicalParams:
    """hbar, mass, c and charge; natural units hbar = m = c = 1 by default."""

    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0
    charge: float = 0.0

    def __post_init__(self):
        if self.hbar <= 0 or self.mass <= 0 or self.c <= 0:
            raise ValueError("hbar, mass and c must be positive")

    @property
    def rest_energy(self) -> float:
        return self.mass * self.c**2

    def energy(self, momentum_sq) -> np.ndarray | float:
        """Relativistic dispersion E(p) = sqrt(m^2 c^4 + p^2 c^2), positive branch."""
        return np.sqrt(self.rest_energy**2 + momentum_sq * self.c**2)


@dataclass(frozen=True)
class StepControl:
    dt: float
    steps_per_snapshot: int = 1
    cfl_safety: float = 0.5

    def __post_init__(self):
        if self.dt == 0:
            raise ValueError("dt must be nonzero (negative dt runs backward)")
        if self.steps_per_snapshot < 1:
            raise ValueError("steps_per_snapshot must be >= 1")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")

    def reversed(self) -> "StepControl":
        return StepControl(-self.dt, self.steps_per_snapshot, self.cfl_safety)

    @property
    def dt_snapshot(self) -> float:
        return self.dt * self.steps_per_snapshot


def step_control(
    grid: Grid,
    params: PhysicalParams,
    dt: float | None = None,
    steps_per_snapshot: int = 1,
    cfl_safety: float = 0.5,
) -> StepControl:
    """Validated step control with dt <= cfl_safety * min(dx) / c.

    With dt omitted the bound itself is used.
    """
    bound = cfl_safety * min(grid.spacing) / params.c
    if dt is None:
        dt = bound
    if abs(dt) > bound * (1 + 1e-12):
        raise ValueError(
            f"dt={dt:g} violates the CFL bound {bound:g} "
            f"(safety {cfl_safety} on spacing {min(grid.spacing):g}, c={params.c:g})"
        )
    return StepControl(dt=dt, steps_per_snapshot=steps_per_snapshot, cfl_safety=cfl_safety)


@dataclass(frozen=True)
class KgState:
    """Wavefunction and its time derivative at one instant."""

    psi: ComplexField
    pi: ComplexField
    time: float

    def __post_init__(self):
        if self.psi.grid is not self.pi.grid and self.psi.grid != self.pi.grid:
            raise ValueError("psi and pi must share one grid")

    @property
    def grid(self) -> Grid:
        return self.psi.grid


class SolverInstability(RuntimeError):
    """Raised when an evolution produces non-finite values.

    `last_stable` carries the most recent finite snapshot list so a runner
    can persist a partial result.
    """

    def __init__(self, message: str, last_stable=None):
        super().__init__(message)
        self.last_stable = last_stable or []


@dataclass(frozen=True)
class EmPotential:
    """Closed-form electromagnetic potential.

    ``scalar(xs, t)`` and each ``vector[j](xs, t)`` receive the tuple of
    coordinate meshes and must broadcast to the grid shape. ``scalar_dt``
    is the analytic time derivative when available; otherwise dW/dt falls
    back to a 4th-order finite difference in t.
    """

    scalar: Callable
    vector: tuple[Callable, ...]
    scalar_dt: Callable | None = None
    uniform_vector: bool = False

    def sample_scalar(self, grid: Grid, t: float) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.scalar(grid.meshes(), t), dtype=float), grid.shape)

    def sample_scalar_dt(self, grid: Grid, t: float, h: float = 1e-3) -> np.ndarray:
        if self.scalar_dt is not None:
            return np.broadcast_to(np.asarray(self.scalar_dt(grid.meshes(), t), dtype=float), grid.shape)
        w = lambda tt: self.sample_scalar(grid, tt)
        # 5-point 4th-order central difference
        return (-w(t + 2 * h) + 8 * w(t + h) - 8 * w(t - h) + w(t - 2 * h)) / (12 * h)

    def sample_vector(self, grid: Grid, t: float) -> tuple[np.ndarray, ...]:
        if len(self.vector) != grid.dims:
            raise ValueError("vector potential needs one component per axis")
        return tuple(
            np.broadcast_to(np.asarray(a(grid.meshes(), t), dtype=float), grid.shape)
            for a in self.vector
        )


def constant_potential(w0: float, a0: float | Sequence[float], dims: int = 1) -> EmPotential:
    """Uniform static (W0, A0)."""
    a0 = (a0,) * dims if np.isscalar(a0) else tuple(a0)
    if len(a0) != dims:
        raise ValueError("a0 must have one component per axis")
    return EmPotential(
        scalar=lambda xs, t, w0=w0: np.full_like(np.asarray(xs[0], dtype=float), w0),
        vector=tuple(
            (lambda xs, t, aj=aj: np.full_like(np.asarray(xs[0], dtype=float), aj)) for aj in a0
        ),
        scalar_dt=lambda xs, t: np.zeros_like(np.asarray(xs[0], dtype=float)),
        uniform_vector=True,
    )


def commensurate_momentum(grid: Grid, params: PhysicalParams, momentum) -> tuple[float, ...]:
    """Validate p_j L_j / (2 pi hbar) is an integer; returns the momentum tuple."""
    p = (momentum,) * grid.dims if np.isscalar(momentum) else tuple(momentum)
    if len(p) != grid.dims:
        raise ValueError("momentum must have one component per axis")
    for pj, L in zip(p, grid.lengths):
        cycles = pj * L / (2 * np.pi * params.hbar)
        if abs(cycles - round(cycles)) > 1e-9:
            raise ValueError(
                f"momentum component {pj:g} is incommensurate with the box: "
                f"p*L/(2*pi*hbar) = {cycles:g} is not an integer"
            )
    return tuple(float(pj) for pj in p)


def init_plane_wave(
    grid: Grid,
    params: PhysicalParams,
    momentum,
    energy_sign: int = +1,
) -> KgState:
    """Exact plane wave exp[i(p.x -/+ E t)/hbar] at t = 0.

    energy_sign +1 is the matter branch (E = +sqrt(m^2c^4 + p^2c^2) in the
    phase), -1 the antimatter branch (E -> -E).
    """
    if energy_sign not in (+1, -1):
        raise ValueError("energy_sign must be +1 or -1")
    p = commensurate_momentum(grid, params, momentum)
    energy = float(params.energy(sum(pj**2 for pj in p)))
    phase = np.zeros(grid.shape)
    for pj, mesh in zip(p, grid.meshes()):
        phase = phase + pj * mesh / params.hbar
    psi = np.exp(1j * phase)
    pi = (-1j * energy_sign * energy / params.hbar) * psi
    return KgState(complex_field(grid, psi), complex_field(grid, pi), time=0.0)


def init_charged_plane_wave(
    grid: Grid,
    params: PhysicalParams,
    momentum,
    w0: float,
    a0,
    energy_sign: int = +1,
) -> KgState:
    """Exact plane-wave solution of the K-G equation under constant (W0, A0).

    The gauged dispersion is (E - eW0)^2 = (p - eA0)^2 c^2 + m^2 c^4, so the
    phase rotates at E = eW0 +/- sqrt((p - eA0)^2 c^2 + m^2 c^4).
    """
    if energy_sign not in (+1, -1):
        raise ValueError("energy_sign must be +1 or -1")
    p = commensurate_momentum(grid, params, momentum)
    a0 = (a0,) * grid.dims if np.isscalar(a0) else tuple(a0)
    kin2 = sum((pj - params.charge * aj) ** 2 for pj, aj in zip(p, a0))
    energy = params.charge * w0 + energy_sign * float(params.energy(kin2))
    phase = np.zeros(grid.shape)
    for pj, mesh in zip(p, grid.meshes()):
        phase = phase + pj * mesh / params.hbar
    psi = np.exp(1j * phase)
    pi = (-1j * energy / params.hbar) * psi
    return KgState(complex_field(grid, psi), complex_field(grid, pi), time=0.0)


def init_gaussian_packet(
    grid: Grid,
    params: PhysicalParams,
    center,
    sigma: float,
    momentum=0.0,
    energy_sign: int = +1,
    normalize: bool = True,
    tail_threshold: float = 1e-12,
) -> KgState:
    """Single-branch Gaussian packet.

    psi = N exp(-(x-x0)^2/(4 sigma^2)) exp(i p0.x/hbar); pi is set spectrally,
    mode-by-mode, to -/+ (i/hbar) E(k) psi_k, which makes the state a pure
    superposition of one energy branch. With normalize=True the state is
    scaled so |integral of rho| = 1 with rho = -hbar Im(psi* pi)/(m c^2).
    """
    if energy_sign not in (+1, -1):
        raise ValueError("energy_sign must be +1 or -1")
    if sigma < 4 * max(grid.spacing):
        raise ValueError(
            f"sigma={sigma:g} under-resolved: need sigma >= 4*spacing = {4 * max(grid.spacing):g}"
        )
    x0 = (center,) * grid.dims if np.isscalar(center) else tuple(center)
    p0 = commensurate_momentum(grid, params, momentum)

    r2 = np.zeros(grid.shape)
    phase = np.zeros(grid.shape)
    for c0, pj, mesh in zip(x0, p0, grid.meshes()):
        r2 = r2 + (mesh - c0) ** 2
        phase = phase + pj * mesh / params.hbar
    psi = np.exp(-r2 / (4 * sigma**2)) * np.exp(1j * phase)

    edge_amp = _edge_max(np.abs(psi)) / np.abs(psi).max()
    if edge_amp > tail_threshold:
        warnings.warn(
            f"packet tail {edge_amp:.2e} at the box edge exceeds {tail_threshold:.0e}; "
            "enlarge the box or shrink sigma",
            stacklevel=2,
        )

    ek = params.energy(params.hbar**2 * grid.k_squared)
    pi = np.fft.ifftn((-1j * energy_sign / params.hbar) * ek * np.fft.fftn(psi))

    if normalize:
        rho = -params.hbar * np.imag(np.conj(psi) * pi) / (params.mass * params.c**2)
        total = abs(np.sum(rho) * grid.cell_volume)
        scale = 1.0 / np.sqrt(total)
        psi = psi * scale
        pi = pi * scale
    return KgState(complex_field(grid, psi), complex_field(grid, pi), time=0.0)


def init_charged_gaussian_packet(
    grid: Grid,
    params: PhysicalParams,
    center,
    sigma: float,
    w0: float,
    a0,
    momentum=0.0,
    energy_sign: int = +1,
    normalize: bool = True,
) -> KgState:
    """Single-branch Gaussian under a constant potential (W0, A0).

    The gauged branch frequencies are E(k) = eW0 +/- sqrt((hbar k - eA0)^2 c^2
    + m^2 c^4), so pi is set spectrally to -i E(k) psi_k / hbar; seeding a
    charged run with the free-branch pi would mix in O((eW0/2E)^2) of the
    other gauged branch.
    """
    base = init_gaussian_packet(
        grid, params, center, sigma, momentum=momentum,
        energy_sign=energy_sign, normalize=False,
    )
    a0 = (a0,) * grid.dims if np.isscalar(a0) else tuple(a0)
    kin2 = np.zeros(grid.shape)
    for k, aj in zip(grid._k_broadcast, a0):
        kin2 = kin2 + (params.hbar * k - params.charge * aj) ** 2
    energy = params.charge * w0 + energy_sign * params.energy(kin2)
    psi = base.psi.values
    pi = np.fft.ifftn((-1j / params.hbar) * energy * np.fft.fftn(psi))
    if normalize:
        w = np.full(grid.shape, w0)
        rho = (
            -params.hbar * np.imag(np.conj(psi) * pi)
            - params.charge * w * np.abs(psi) ** 2
        ) / (params.mass * params.c**2)
        scale = 1.0 / np.sqrt(abs(np.sum(rho) * grid.cell_volume))
        psi = psi * scale
        pi = pi * scale
    return KgState(complex_field(grid, psi), complex_field(grid, pi), time=0.0)


def init_vortex(
    grid: Grid,
    params: PhysicalParams,
    center,
    window_sigma: float | None = None,
) -> KgState:
    """Rest-state field carrying a single +1 phase vortex at ``center``.

    psi = ((x-x0) + i(y-y0)) * gaussian window, pi = -i (m c^2/hbar) psi.
    A center that falls on a lattice point is nudged half a cell so the
    core sits inside a plaquette (cores on corners are indeterminate).
    """
    from .circulation import vortex_field  # local import avoids a cycle

    if grid.dims != 2:
        raise ValueError("vortex initial states require a 2D grid")
    nudged = []
    for c0, dx in zip(tuple(center), grid.spacing):
        offset = c0 / dx
        if abs(offset - round(offset)) < 1e-9:
            c0 = c0 + dx / 2
        nudged.append(c0)
    psi = vortex_field(grid, [tuple(nudged)], [+1], window_sigma=window_sigma)
    pi_vals = (-1j * params.rest_energy / params.hbar) * psi.values
    return KgState(psi, complex_field(grid, pi_vals), time=0.0)


def _edge_max(amp: np.ndarray) -> float:
    worst = 0.0
    for axis in range(amp.ndim):
        sl0 = [slice(None)] * amp.ndim
        sl0[axis] = 0
        worst = max(worst, float(np.max(amp[tuple(sl0)])))
    return worst


def _rhs_free(grid: Grid, params: PhysicalParams, psi: np.ndarray, pi: np.ndarray):
    acc = params.c**2 * lap_arr(grid, psi) - (params.rest_energy**2 / params.hbar**2) * psi
    return pi, acc


def _rhs_charged(
    grid: Grid,
    params: PhysicalParams,
    potential: EmPotential,
    t: float,
    psi: np.ndarray,
    pi: np.ndarray,
):
    e_over_h = params.charge / params.hbar
    w = potential.sample_scalar(grid, t)
    w_t = potential.sample_scalar_dt(grid, t)
    a = potential.sample_vector(grid, t)
    grad_psi = grad_arr(grid, psi)
    div_a = div_arr(grid, a)
    a_dot_grad = sum(aj * gj for aj, gj in zip(a, grad_psi))
    a_sq = sum(aj**2 for aj in a)
    acc = (
        -2j * e_over_h * w * pi
        - 1j * e_over_h * w_t * psi
        + (e_over_h * w) ** 2 * psi
        + params.c**2
        * (
            lap_arr(grid, psi)
            - 1j * e_over_h * div_a * psi
            - 2j * e_over_h * a_dot_grad
            - (e_over_h**2) * a_sq * psi
        )
        - (params.rest_energy**2 / params.hbar**2) * psi
    )
    return pi, acc


def _rk4(grid, params, state: KgState, dt: float, rhs) -> KgState:
    psi, pi, t = state.psi.values, state.pi.values, state.time
    with np.errstate(invalid="ignore", over="ignore"):  # blowups detected below
        a1, b1 = rhs(t, psi, pi)
        a2, b2 = rhs(t + dt / 2, psi + dt / 2 * a1, pi + dt / 2 * b1)
        a3, b3 = rhs(t + dt / 2, psi + dt / 2 * a2, pi + dt / 2 * b2)
        a4, b4 = rhs(t + dt, psi + dt * a3, pi + dt * b3)
        psi_n = psi + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        pi_n = pi + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    if not (np.all(np.isfinite(psi_n)) and np.all(np.isfinite(pi_n))):
        raise SolverInstability(f"non-finite values after step at t={t:g} (dt={dt:g})")
    return KgState(ComplexField(grid, psi_n), ComplexField(grid, pi_n), time=t + dt)


def kg_step_free(state: KgState, params: PhysicalParams, control: StepControl) -> KgState:
    """One RK4 step of the free K-G system (psi, pi)."""
    grid = state.grid
    return _rk4(grid, params, state, control.dt, lambda t, ps, pp: _rhs_free(grid, params, ps, pp))


def kg_step_charged(
    state: KgState,
    params: PhysicalParams,
    potential: EmPotential | None,
    control: StepControl,
) -> KgState:
    """One RK4 step of the minimally-coupled K-G system.

    With charge = 0 (or no potential) this reduces bitwise to the free path.
    """
    grid = state.grid
    if potential is None or params.charge == 0.0:
        return kg_step_free(state, params, control)
    return _rk4(
        grid,
        params,
        state,
        control.dt,
        lambda t, ps, pp: _rhs_charged(grid, params, potential, t, ps, pp),
    )


def evolve_kg(
    state: KgState,
    params: PhysicalParams,
    control: StepControl,
    n_snapshots: int,
    potential: EmPotential | None = None,
) -> list[KgState]:
    """Advance and collect ``n_snapshots`` states (the initial one included),
    spaced ``control.dt * control.steps_per_snapshot`` apart.

    On instability raises SolverInstability carrying the stable snapshots.
    """
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    snaps = [state]
    current = state
    # amplitude explosion bound: the evolution is norm-preserving, so any
    # large growth is numerical divergence even while still finite
    ceiling = 1e6 * max(float(np.max(np.abs(state.psi.values))), 1e-300)
    try:
        for _ in range(n_snapshots - 1):
            for _ in range(control.steps_per_snapshot):
                current = kg_step_charged(current, params, potential, control)
                if float(np.max(np.abs(current.psi.values))) > ceiling:
                    raise SolverInstability(
                        f"amplitude exploded at t={current.time:g} (dt={control.dt:g})"
                    )
            snaps.append(current)
    except SolverInstability as exc:
        raise SolverInstability(str(exc), last_stable=snaps) from None
    return snaps


def lorenz_gauge_defect(
    potential: EmPotential,
    grid: Grid,
    t: float,
    params: PhysicalParams,
) -> RealField:
    """Pointwise gauge defect (1/c^2) dW/dt + div A; zero in Lorenz gauge.

    dW/dt is taken from the analytic derivative when the potential provides
    one, else a 4th-order finite difference in t; div A is spectral.
    """
    w_t = potential.sample_scalar_dt(grid, t)
    div_a = div_arr(grid, potential.sample_vector(grid, t))
    return real_field(grid, w_t / params.c**2 + np.real(div_a))
