"""Semi-implicit spectral deferred correction integrators for nodal DG.

The package couples SDC time integration on right-Radau nodes (with
semi-implicit sweeps that converge to the L-stable Radau collocation
schemes) to a nodal discontinuous Galerkin discretization of 1D
conservation laws, and ships the linear stability toolkit and benchmark
driver used to characterize the schemes.
"""

from .collocation import (
    CollocationSet,
    QuadratureRule,
    cfl_scale,
    collocation_set,
    gll_rule,
    lagrange_interpolate,
    radau_nodes,
    sdc_weights,
)
from .errors import (
    ConfigError,
    InconclusiveSearchError,
    InvalidArgumentError,
    NonConvergenceError,
    NonphysicalStateError,
    SingularMatrixError,
    SisdcError,
    SolverBreakdownError,
    SolverError,
    StepFailureError,
    SweepFailureError,
)
from .models import (
    GasParams,
    burgers_model,
    convdiff_model,
    eigen_structure,
    euler_ns_model,
)
from .solvers import (
    BandStorage,
    LinearSystem,
    SolveReport,
    band_from_dense,
    banded_factorize,
    banded_solve,
    fgmres,
    pcg,
)
from .dg import (
    BoundaryGhosts,
    DgRhs,
    DgSpaceOps,
    GridFunction,
    Mesh1D,
    ShockCaptureParams,
    convection_term,
    diffusion_term,
    project,
    rhs_explicit,
    rhs_implicit_operator,
    shock_sensor,
    write_gridfunction_csv,
)
from .integrators import (
    ARS443,
    CB2,
    ImexTableau,
    STEPPERS,
    ars443_step,
    cb2_step,
    get_stepper,
    imex_euler_step,
    imex_rk_step,
    si11_step,
    si12_step,
    si22_step,
    tvdrk3_step,
)
from .sdc import (
    SdcConfig,
    TUNED_CONFIGS,
    sdc_fixed_point,
    sdc_node_iterates,
    sdc_step,
    sdc_stepper,
)
from .stability import (
    DahlquistSplitRhs,
    StabilityGrid,
    ZrMaxResult,
    amplification_for,
    extract_neutral,
    find_zr_max,
    r_collocation,
    r_imex_euler,
    r_numeric,
    r_sdc,
    r_si11,
    r_si12,
    r_si21,
    r_si22,
    scan_domain,
)
from .cases import CASE_NAMES, Case, build_case, compute_cfl, dt_from_cfl, steps_for_cfl
from .bench import (
    ErrorReport,
    RunResult,
    eoc_rates,
    get_reference,
    resolve_scheme,
    run_case,
    run_eoc,
    run_sweep,
)

__version__ = "0.1.0"
