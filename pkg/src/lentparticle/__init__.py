"""Carre du champ computations for Poisson-driven jump SDEs.

The library simulates finite-activity truncations of Levy-type jump
measures, integrates SDEs driven by them together with their first-order
flows, and assembles the carre du champ (Malliavin covariance) matrix of
path functionals by differentiating each functional through every atom of
the driving configuration.  Rank diagnostics on that matrix feed
density-existence checks, cross-validated against closed-form scenarios.
"""

__version__ = "0.1.0"

from .bottom_structure import (
    BottomStructure,
    check_ellipticity,
    from_expressions,
    gamma_matrix,
    gamma_scalar,
    gradient_flat,
    intro_1d,
    isotropic,
    psi_over_k,
    standard_instances,
)
from .density_criteria import (
    KdeResult,
    RankReport,
    RankStatsTable,
    RegularCaseReport,
    ScanResult,
    kde_density,
    monte_carlo_rank_stats,
    rank_diagnostic,
    regular_case_check,
    span_dimension,
    sufficient_condition_scan,
)
from .errors import (
    ConditioningWarning,
    ConfigFileError,
    ConfigurationError,
    ConvergenceWarning,
    DomainError,
    FunctionalError,
    InputError,
    LentParticleError,
    ModelError,
    NumericError,
    StateError,
    StructureError,
)
from .lent_particle import (
    FORMULA_TAGS,
    GammaMatrix,
    MarkFunction,
    MarkFunctional,
    SdeFunctional,
    gamma_flow,
    gamma_flow_left,
    gamma_generic,
    gamma_linear,
    gamma_rho_mc,
    linear_functional,
    sharp_linear,
    sharp_sample,
)
from .poisson_measure import (
    JumpConfiguration,
    TruncatedLevyModel,
    add_particle,
    compensated_integral,
    mark_integral,
    read_configuration_csv,
    remove_particle,
    simulate_configuration,
    write_configuration_csv,
)
from .rng import path_seed, stream
from .scenarios import (
    DoleansPairFunctional,
    DoleansResult,
    GeneratorCheckReport,
    LevyAreaResult,
    McKeanResult,
    Scenario,
    doleans_dade,
    get_scenario,
    graph_levy_model,
    levy_area,
    mckean_vlasov,
    polar_levy_model,
    power_law_model,
    stable_like_coefficient,
    stable_like_generator_check,
    stable_like_pushforward_check,
    uniform_box_model,
    zeta,
)
from .sde_engine import (
    CoefficientSet,
    Trajectory,
    affine_solution,
    read_trajectory_csv,
    solve_flow_derivative,
    solve_inverse_flow,
    solve_sde,
    solve_with_flows,
    validate_coefficients,
    write_trajectory_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
