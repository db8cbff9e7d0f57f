"""kghydro: pseudo-spectral Klein-Gordon / Schrodinger evolution with
hydrodynamic (amplitude-action) decomposition, residual verification of the
hydrodynamic equations, and circulation quantization checks."""

from .grids import (
    ComplexField,
    Grid,
    RealField,
    complex_field,
    divergence,
    grad_arr,
    gradient,
    grid_create,
    laplacian,
    real_field,
    volume_integral,
)
from .kg import (
    EmPotential,
    KgState,
    PhysicalParams,
    SolverInstability,
    StepControl,
    commensurate_momentum,
    constant_potential,
    evolve_kg,
    init_charged_gaussian_packet,
    init_charged_plane_wave,
    init_gaussian_packet,
    init_plane_wave,
    init_vortex,
    kg_step_charged,
    kg_step_free,
    lorenz_gauge_defect,
    step_control,
)
from .schrodinger import (
    SchState,
    evolve_schrodinger,
    schrodinger_step,
    schrodinger_step_charged,
    schrodinger_step_control,
)
from .hydro import (
    HydroState,
    NodePolicy,
    decompose,
    decompose_nonrel,
    node_mask,
    quantum_potential_nonrel,
    quantum_potential_rel,
    recompose,
    unwrap_phase,
    velocity_field,
)
from .residuals import (
    ClassicalLimitReport,
    ConvergenceStudy,
    ResidualReport,
    SnapshotSeries,
    classical_limit_compare,
    convergence_study,
    kg_series,
    residual_action_charged,
    residual_action_free,
    residual_continuity_charged,
    residual_continuity_free,
    residual_madelung_action,
    residual_madelung_continuity,
    sch_series,
)
from .circulation import (
    Contour,
    IrrotationalReport,
    WindingMap,
    contour_circulation,
    irrotational_check,
    plaquette_winding,
    vortex_field,
)

__version__ = "0.1.0"
