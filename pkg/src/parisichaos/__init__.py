"""Numerical Parisi measures, disorder chaos in mixed even p-spin models,
coupled interpolation bounds and exact small-N checks."""
from .chaos import (
    ChaosPoint,
    CoupledParams,
    chaos_bound,
    evaluate_phi_v,
    f_eta,
    guerra_bound,
    guerra_zero_and_slope,
    solve_u_t,
    standard_coupling,
    verify_subadditivity,
)
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateMeasureError,
    InvalidArgumentError,
    NoBracketError,
    NumericalFailure,
    ParisiChaosError,
)
from .estimators import ChaosCurveEstimator, ParisiEstimator
from .grid import GridConfig, GridFunction
from .mixture import MixtureSpec, parse_preset, theta_eval, validate_mixture, xi_eval
from .optimize import (
    OptimizerOptions,
    ParisiMeasure,
    min_support,
    optimize_level_k,
    solve_parisi_measure,
)
from .pde import PhiSolution, consistency_check, phi_derivative, solve_phi
from .rsb import (
    AFamily,
    FieldSpec,
    RSBParams,
    build_a_functions,
    insert_atom,
    parisi_functional,
    stationarity_residuals,
    tilted_moment,
)
from .simulator import (
    SimConfig,
    SimResult,
    constrained_coupled_free_energy,
    exact_free_energy,
    overlap_distribution,
    sample_correlated_hamiltonians,
)

__version__ = "0.1.0"
