"""Stochastic Galerkin shallow-water solver with hyperbolicity preservation.

The package is organized as layers:

``basis``
    Orthonormal Jacobi bases for Beta-distributed parameters, multi-index
    sets, Gauss quadrature exact on triple products, projection.
``galerkin``
    Coefficient-vector algebra: triple-product tensor, multiplication
    operator P(z), products, ratios, matrix square roots, and the
    positive-definiteness certificate for the height operator.
``system``
    The Galerkin shallow-water system: fluxes with the asymmetric closure of
    the mixed nonlinear term, source, Jacobians, wave-speed bounds, and the
    symmetrizer that proves hyperbolicity.
``solver``
    Well-balanced central-upwind finite volumes with positivity correction,
    moment filtering, velocity desingularization, and positivity-limited
    SSP Runge-Kutta time stepping.
``scenarios``
    Built-in experiments, statistics, error norms, a stochastic-collocation
    comparator, and the closure-discrepancy diagnostic.
``cli``
    The ``sgswe`` command-line tool.
"""

from .basis import (
    DistributionSpec,
    MultiIndexSet,
    OrthonormalBasis,
    QuadratureRule,
    build_basis,
    evaluate_basis,
    p3_exact_rule,
    pce_project,
    tensor_gauss_rule,
    tensor_index_set,
)
from .galerkin import (
    HyperbolicityCertificate,
    SingularOperatorError,
    certify_hyperbolic,
    galerkin_divide,
    galerkin_product,
    p_matrix,
    sqrt_pd,
    triple_product_tensor,
)
from .scenarios import (
    MomentField,
    RunResult,
    ScenarioSpec,
    builtin_scenario,
    closure_discrepancy,
    collocation_solve,
    convergence_table,
    error_norm,
    initial_state,
    moments,
    run_scenario,
)
from .solver import (
    BoundaryConditions,
    BottomField,
    CentralUpwindSolver,
    Grid,
    SolverConfig,
    StateField,
    build_bottom,
    desingularize_velocity,
    hyperbolicity_filter,
    local_speeds,
    minmod,
    minmod_slope,
    numerical_flux_x,
    numerical_flux_y,
    positivity_correction,
    well_balanced_source,
)
from .system import (
    NonHyperbolicStateError,
    flux_x,
    flux_y,
    jacobian_x,
    jacobian_y,
    source,
    symmetrized_jacobian,
    velocity_pce,
    wave_speed_bounds,
)

__version__ = "0.1.0"
