"""Carbon risk measurement and management toolkit.

Measurement: brown-minus-green (BMG) factor construction from score panels,
static multi-factor regressions, and time-varying carbon betas estimated with
a Kalman filter.  Management: minimum-variance and benchmark-tracking
portfolio construction under carbon-beta and carbon-intensity constraints.
"""

from .enhanced_index import (
    Benchmark,
    EnhancedIndexTracker,
    IndexDiagnostics,
    active_share,
    group_exposure,
    scaled_betas,
    te_linearity_report,
    te_optimize,
)
from .exceptions import (
    CarbonRiskError,
    CollinearityError,
    DegenerateSortError,
    EmptyUniverseError,
    EstimationError,
    InfeasibleProblemError,
    InsufficientDataError,
    SingularMatrixError,
    ValidationError,
)
from .factors import (
    FactorBuildConfig,
    ScorePanel,
    SortedBuckets,
    bmg_return,
    build_bmg_factor,
    compute_bgs,
    sort_universe,
)
from .garch import (
    Garch11,
    Garch11Params,
    conditional_variance,
    fit_garch11,
    standardize_factor,
)
from .kalman import (
    KalmanFit,
    StateSpaceConfig,
    TimeVaryingBeta,
    aggregate_betas,
    forecast_error_compare,
    kalman_filter,
    mle_fit,
    ols_implied_config,
)
from .linalg import (
    FactorCovarianceModel,
    phi,
    smw_rank1_apply,
    smw_rank1_inverse,
    smw_rank2_apply,
    smw_rank2_inverse,
)
from .minvar import (
    MinimumVariance,
    MinVarResult,
    TwoFactorThresholds,
    gmv_capm,
    gmv_two_factor,
    mv_capm_long_only,
    mv_carbon_constrained,
    mv_two_factor_long_only,
    mv_with_intensity_exclusion,
    shrunk_covariance,
    waci,
)
from .qp import QpProblem, QpSolution, solve_qp
from .regression import (
    MODEL_SPECS,
    FactorOLS,
    OlsFit,
    batch_compare,
    descriptive_stats,
    f_test_nested,
    factor_correlation,
    ols_fit,
    quintile_sort,
)
from .synth import SynthSpec, generate_panel

__version__ = "0.1.0"

__all__ = [
    "Benchmark",
    "CarbonRiskError",
    "CollinearityError",
    "DegenerateSortError",
    "EmptyUniverseError",
    "EnhancedIndexTracker",
    "EstimationError",
    "FactorBuildConfig",
    "FactorCovarianceModel",
    "FactorOLS",
    "Garch11",
    "Garch11Params",
    "IndexDiagnostics",
    "InfeasibleProblemError",
    "InsufficientDataError",
    "KalmanFit",
    "MODEL_SPECS",
    "MinVarResult",
    "MinimumVariance",
    "OlsFit",
    "QpProblem",
    "QpSolution",
    "ScorePanel",
    "SingularMatrixError",
    "SortedBuckets",
    "StateSpaceConfig",
    "SynthSpec",
    "TimeVaryingBeta",
    "TwoFactorThresholds",
    "ValidationError",
    "active_share",
    "aggregate_betas",
    "batch_compare",
    "bmg_return",
    "build_bmg_factor",
    "compute_bgs",
    "conditional_variance",
    "descriptive_stats",
    "f_test_nested",
    "factor_correlation",
    "fit_garch11",
    "forecast_error_compare",
    "generate_panel",
    "gmv_capm",
    "gmv_two_factor",
    "group_exposure",
    "kalman_filter",
    "mle_fit",
    "mv_capm_long_only",
    "mv_carbon_constrained",
    "mv_two_factor_long_only",
    "mv_with_intensity_exclusion",
    "ols_fit",
    "ols_implied_config",
    "phi",
    "quintile_sort",
    "scaled_betas",
    "shrunk_covariance",
    "smw_rank1_apply",
    "smw_rank1_inverse",
    "smw_rank2_apply",
    "smw_rank2_inverse",
    "solve_qp",
    "sort_universe",
    "standardize_factor",
    "te_linearity_report",
    "te_optimize",
    "waci",
]
