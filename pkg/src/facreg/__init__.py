"""Factor-augmented sparse linear regression.

Estimates latent common factors of a high-dimensional predictor matrix by
principal components, augments the regression with standardized factor
scores, fits the sparse coefficients with an L1 penalty path, and ships a
Monte Carlo study driver plus a CLI (``facreg simulate|fit|select-k``).
"""

from .augmented import (
    AugmentedDesign,
    AugmentedFit,
    CoefficientEstimate,
    PopulationModel,
    StandardFit,
    back_transform,
    build_augmented_design,
    exact_prediction_error,
    fit_augmented,
    fit_standard,
    population_beta_lr,
    re_constant_estimate,
    sample_prediction_error,
)
from .covariance import (
    CovarianceSpectrum,
    DataMatrix,
    FactorScores,
    ProjectionResult,
    bai_ng_select,
    bai_ng_sigma2,
    default_k_max,
    eigendecompose_scaled,
    empirical_covariance,
    factor_scores,
    project_standardize,
)
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateColumnError,
    DegenerateFactorError,
    FacregError,
    InputError,
    NumericalError,
)
from .lasso import (
    CpReport,
    GridSpec,
    LassoPath,
    LassoProblem,
    cp_statistic,
    kkt_residual,
    lasso_fit,
    lasso_path,
    objective_value,
    rho_max,
)
from .simulate import (
    MonteCarloSummary,
    ReplicationResult,
    SimulationScenario,
    emit_table,
    generate_dataset,
    make_loadings,
    replication_seed,
    run_replication,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedDesign",
    "AugmentedFit",
    "CoefficientEstimate",
    "ConvergenceError",
    "CovarianceSpectrum",
    "CpReport",
    "DataError",
    "DataMatrix",
    "DegenerateColumnError",
    "DegenerateFactorError",
    "FacregError",
    "FactorScores",
    "GridSpec",
    "InputError",
    "LassoPath",
    "LassoProblem",
    "MonteCarloSummary",
    "NumericalError",
    "PopulationModel",
    "ProjectionResult",
    "ReplicationResult",
    "SimulationScenario",
    "StandardFit",
    "back_transform",
    "bai_ng_select",
    "bai_ng_sigma2",
    "build_augmented_design",
    "cp_statistic",
    "default_k_max",
    "eigendecompose_scaled",
    "emit_table",
    "empirical_covariance",
    "exact_prediction_error",
    "factor_scores",
    "fit_augmented",
    "fit_standard",
    "generate_dataset",
    "kkt_residual",
    "lasso_fit",
    "lasso_path",
    "make_loadings",
    "objective_value",
    "population_beta_lr",
    "project_standardize",
    "re_constant_estimate",
    "replication_seed",
    "rho_max",
    "run_replication",
    "run_study",
    "sample_prediction_error",
]
