"""Amplitude-action (polar) decomposition of wavefunctions.

A complex field psi = R exp(iS/hbar) is split into the two real variables
R = |psi| and the unwrapped action S, together with the derived density,
current, quantum potentials and velocity:

    rho  = -(R^2 / m c^2) dS/dt          (from pi, node-safely)
    J_j  =  R^2 (d_j S) / m              (= hbar Im(psi* d_j psi)/m)
    V_qu_nonrel = -(hbar^2 / 2m) lap(R)/R
    V_qu_rel    =  (hbar^2 / m) [ (1/c^2) R_tt - lap(R) ] / R
    qdot = J / rho                        (pure-branch states only)

Points with R below a relative threshold (plus a one-cell dilation ring)
are masked: 1/R quantities carry a NaN sentinel there and are excluded
from all norms downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grids import ComplexField, Grid, RealField, grad_arr, lap_arr
from .kg import PhysicalParams

__all__ = [
    "NodePolicy",
    "HydroState",
    "node_mask",
    "wrap_angle",
    "unwrap_phase",
    "decompose",
    "decompose_nonrel",
    "recompose",
    "quantum_potential_nonrel",
    "quantum_potential_rel",
    "velocity_field",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class NodePolicy:
    """Relative amplitude threshold and dilation radius for node masking."""

    epsilon_rel: float = 1e-8
    dilation_radius: int = 1

    def __post_init__(self):
        if self.epsilon_rel <= 0:
            raise ValueError("epsilon_rel must be positive")
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")


@dataclass(frozen=True)
class HydroState:
    """Two-real-variable representation of a wavefunction snapshot."""

    amplitude: RealField
    action: RealField
    rho: RealField
    current: tuple[RealField, ...]
    vqu_nonrel: RealField
    node_mask: np.ndarray
    energy_sign: int
    time: float
    vqu_rel: RealField | None = None

    @property
    def grid(self) -> Grid:
        return self.amplitude.grid

    def with_vqu_rel(self, vqu_rel: RealField) -> "HydroState":
        return replace(self, vqu_rel=vqu_rel)


MIXED_BRANCH_FRACTION = 0.02


def _branch_sign_spectral(grid: Grid, psi: np.ndarray, pi: np.ndarray, params: PhysicalParams) -> int:
    """Exact free-field branch classification in Fourier space.

    Mode-wise a free K-G state splits as psi_k(t) = a+ e^{-iE t/hbar} +
    a- e^{+iE t/hbar} with a+- = (psi_k -+ i hbar pi_k / E(k))/2; the state
    is pure matter (antimatter) when the minority branch carries less than
    a 2% weight fraction (a rest packet seeded with pi = -i m c^2 psi/hbar,
    nominally pure matter, already carries ~0.5% of the other branch at
    sigma = 1). Pointwise sign tests cannot do this job: even
    exact single-branch packets have opposite-sign Compton tails in rho,
    while some genuine mixtures have pointwise-uniform rho.
    """
    ek = params.energy(params.hbar**2 * grid.k_squared)
    psih = np.fft.fftn(psi)
    pih = np.fft.fftn(pi)
    a_plus = 0.5 * (psih + 1j * params.hbar * pih / ek)
    a_minus = 0.5 * (psih - 1j * params.hbar * pih / ek)
    w_plus = float(np.sum(np.abs(a_plus) ** 2))
    w_minus = float(np.sum(np.abs(a_minus) ** 2))
    total = w_plus + w_minus
    if total == 0.0:
        return 0
    if min(w_plus, w_minus) / total <= MIXED_BRANCH_FRACTION:
        return +1 if w_plus >= w_minus else -1
    return 0


def _branch_sign_weighted(rho_unmasked: np.ndarray, amp_sq_unmasked: np.ndarray, params: PhysicalParams) -> int:
    """Gauge-aware classification from the gauged density.

    Pure branches satisfy |rho| = gamma |psi|^2 with gamma >= 1, so the
    state is pure when the minority-sign mass fraction of rho is small and
    the mass-weighted mean gamma is at least 1 (up to tolerance).
    """
    pos = float(np.sum(rho_unmasked[rho_unmasked > 0]))
    neg = float(-np.sum(rho_unmasked[rho_unmasked < 0]))
    total = pos + neg
    if total == 0.0:
        return 0
    if min(pos, neg) / total > MIXED_BRANCH_FRACTION:
        return 0
    mean_gamma = total / float(np.sum(amp_sq_unmasked))
    if mean_gamma < 1.0 - MIXED_BRANCH_FRACTION:
        return 0
    return +1 if pos >= neg else -1


def node_mask(amplitude: np.ndarray, policy: NodePolicy = NodePolicy()) -> np.ndarray:
    """Boolean mask of near-node points, dilated periodically."""
    peak = float(np.max(amplitude))
    if peak == 0.0:
        raise ValueError("field is zero everywhere (all points are nodes)")
    mask = amplitude < policy.epsilon_rel * peak
    for _ in range(policy.dilation_radius):
        grown = mask.copy()
        for axis in range(mask.ndim):
            grown |= np.roll(mask, 1, axis=axis) | np.roll(mask, -1, axis=axis)
        mask = grown
    return mask


def wrap_angle(delta: np.ndarray) -> np.ndarray:
    """Map angle differences to the half-open interval (-pi, pi]."""
    return delta - TWO_PI * np.ceil((delta - np.pi) / TWO_PI)


def _unwrap_along(theta: np.ndarray, axis: int) -> np.ndarray:
    d = wrap_angle(np.diff(theta, axis=axis))
    out = np.cumsum(d, axis=axis)
    first = np.take(theta, [0], axis=axis)
    return np.concatenate([first, first + out], axis=axis)


def unwrap_phase(wrapped: RealField, params: PhysicalParams = PhysicalParams()) -> RealField:
    """Unwrap a wrapped action field (values in (-pi*hbar, pi*hbar]).

    Differences between neighbours are corrected to the nearest multiple of
    2*pi*hbar and integrated along a fixed deterministic sweep: the axis-0
    spine at column 0, then each axis-1 row from the spine. The result
    differs from the true action by a global 2*pi*hbar integer in vortex-free
    fields; vortices make it path-dependent and are detected downstream by
    the circulation analyzer, not here.
    """
    period = TWO_PI * params.hbar
    if np.max(np.abs(wrapped.values)) > period / 2 * (1 + 1e-12):
        raise ValueError("wrapped values must lie in (-pi*hbar, pi*hbar]")
    return RealField(wrapped.grid, unwrap_values(wrapped.values, period=period))


def unwrap_values(wrapped: np.ndarray, period: float) -> np.ndarray:
    theta = wrapped * (TWO_PI / period)
    if wrapped.ndim == 1:
        out = _unwrap_along(theta, axis=0)
    else:
        spine = _unwrap_along(theta[:, 0], axis=0)
        d = wrap_angle(np.diff(theta, axis=1))
        out = np.concatenate(
            [spine[:, None], spine[:, None] + np.cumsum(d, axis=1)], axis=1
        )
    return out * (period / TWO_PI)


def decompose(
    psi: ComplexField,
    pi: ComplexField,
    params: PhysicalParams,
    policy: NodePolicy = NodePolicy(),
    time: float = 0.0,
    potential=None,
) -> HydroState:
    """Split (psi, pi) into hydrodynamic variables.

    dS/dt is taken from pi as hbar*Im(pi/psi) (never by differencing stored
    action snapshots); rho and J are computed in the node-safe product forms
    -hbar Im(psi* pi)/(m c^2) and hbar Im(psi* grad psi)/m. When an EM
    potential is supplied (a charged evolution), rho and J are the gauged
    conserved density and current, -(R^2/mc^2)(S_t + eW) and
    (R^2/m)(grad S - eA), and the branch classification uses them.
    """
    grid = psi.grid
    psi_v = psi.values
    pi_v = pi.values
    amp = np.abs(psi_v)
    mask = node_mask(amp, policy)

    wrapped = params.hbar * np.angle(psi_v)
    action = unwrap_values(wrapped, period=TWO_PI * params.hbar)

    rho = -params.hbar * np.imag(np.conj(psi_v) * pi_v) / (params.mass * params.c**2)
    current = [
        params.hbar * np.imag(np.conj(psi_v) * g) / params.mass
        for g in grad_arr(grid, psi_v)
    ]
    if potential is not None and params.charge != 0.0:
        w = potential.sample_scalar(grid, time)
        a = potential.sample_vector(grid, time)
        rho = rho - params.charge * w * amp**2 / (params.mass * params.c**2)
        current = [j - params.charge * aj * amp**2 / params.mass for j, aj in zip(current, a)]
        sign = _branch_sign_weighted(rho[~mask], amp[~mask] ** 2, params)
    else:
        sign = _branch_sign_spectral(grid, psi_v, pi_v, params)

    vqu_nr = quantum_potential_values_nonrel(grid, amp, params, mask)

    return HydroState(
        amplitude=RealField(grid, amp),
        action=RealField(grid, action),
        rho=RealField(grid, rho),
        current=tuple(RealField(grid, j) for j in current),
        vqu_nonrel=RealField(grid, vqu_nr),
        node_mask=mask,
        energy_sign=sign,
        time=time,
    )


def decompose_nonrel(
    phi: ComplexField,
    params: PhysicalParams,
    policy: NodePolicy = NodePolicy(),
    time: float = 0.0,
) -> HydroState:
    """Madelung variables of a Schrodinger wavefunction.

    rho here is the nonrelativistic density n = |phi|^2 and the branch is
    matter by construction.
    """
    grid = phi.grid
    phi_v = phi.values
    amp = np.abs(phi_v)
    mask = node_mask(amp, policy)
    wrapped = params.hbar * np.angle(phi_v)
    action = unwrap_values(wrapped, period=TWO_PI * params.hbar)
    current = tuple(
        params.hbar * np.imag(np.conj(phi_v) * g) / params.mass
        for g in grad_arr(grid, phi_v)
    )
    vqu_nr = quantum_potential_values_nonrel(grid, amp, params, mask)
    return HydroState(
        amplitude=RealField(grid, amp),
        action=RealField(grid, action),
        rho=RealField(grid, amp**2),
        current=tuple(RealField(grid, j) for j in current),
        vqu_nonrel=RealField(grid, vqu_nr),
        node_mask=mask,
        energy_sign=+1,
        time=time,
    )


def recompose(amplitude: RealField, action: RealField, params: PhysicalParams) -> ComplexField:
    """psi = R exp(iS/hbar)."""
    amp = amplitude.values
    if np.any(amp < 0):
        raise ValueError("amplitude must be non-negative")
    return ComplexField(amplitude.grid, amp * np.exp(1j * action.values / params.hbar))


def quantum_potential_values_nonrel(
    grid: Grid, amp: np.ndarray, params: PhysicalParams, mask: np.ndarray
) -> np.ndarray:
    lap_amp = lap_arr(grid, amp)
    safe = np.where(mask, 1.0, amp)
    out = -(params.hbar**2 / (2 * params.mass)) * lap_amp / safe
    return np.where(mask, np.nan, out)


def quantum_potential_nonrel(
    amplitude: RealField,
    params: PhysicalParams,
    mask: np.ndarray | None = None,
    policy: NodePolicy = NodePolicy(),
) -> RealField:
    """V_qu = -(hbar^2/2m) lap(|psi|)/|psi|, NaN on masked points."""
    amp = amplitude.values
    if mask is None:
        mask = node_mask(amp, policy)
    return RealField(amplitude.grid, quantum_potential_values_nonrel(amplitude.grid, amp, params, mask))


def quantum_potential_rel(
    amplitudes: Sequence[RealField],
    params: PhysicalParams,
    dt: float,
    mask: np.ndarray | None = None,
    policy: NodePolicy = NodePolicy(),
) -> RealField:
    """Relativistic quantum potential from three uniformly spaced snapshots.

    V_qu = (hbar^2/m) [ (1/c^2) d2R/dt2 - lap(R) ] / R evaluated at the middle
    time, with the second time derivative from the centered 3-point stencil
    and the Laplacian spectral. Zero (to stencil truncation) for plane waves;
    for static amplitudes it reduces to -(hbar^2/m) lap(R)/R, twice the
    nonrelativistic magnitude.
    """
    if len(amplitudes) != 3:
        raise ValueError("exactly three amplitude snapshots are required")
    grid = amplitudes[1].grid
    prev_a, mid_a, next_a = (f.values for f in amplitudes)
    if mask is None:
        mask = node_mask(mid_a, policy)
    r_tt = (next_a - 2.0 * mid_a + prev_a) / dt**2
    dalembert = r_tt / params.c**2 - lap_arr(grid, mid_a)
    safe = np.where(mask, 1.0, mid_a)
    out = (params.hbar**2 / params.mass) * dalembert / safe
    return RealField(grid, np.where(mask, np.nan, out))


def velocity_field(hydro: HydroState, params: PhysicalParams) -> tuple[RealField, ...]:
    """qdot = J / rho, the fluid velocity of a pure-branch state.

    For a matter plane wave this is p c^2 / E = p/(gamma m); mixed-branch
    states are rejected because the single-branch identities behind rho do
    not hold for superpositions of both energy signs.
    """
    if hydro.energy_sign == 0:
        raise ValueError("velocity field is defined only for pure-branch states")
    mask = hydro.node_mask
    rho = hydro.rho.values
    safe_rho = np.where(mask, 1.0, rho)
    out = []
    for j in hydro.current:
        v = j.values / safe_rho
        out.append(RealField(hydro.grid, np.where(mask, np.nan, v)))
    return tuple(out)
