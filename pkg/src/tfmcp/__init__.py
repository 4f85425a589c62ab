"""CP-structured factor models for tensor-valued time series."""

from .decomposition import CPFactorDecomposition
from .estimators import (
    EstimationError,
    FitConfig,
    FitResult,
    ProjectionState,
    als,
    cals,
    coals,
    cpca,
    cpca_init,
    finalize_fit,
    fit_method,
    hope,
    iso_refine,
    oals,
    one_step_hope,
    project_z,
    projection_leakage,
)
from .linalg import (
    ConvergenceError,
    EigPairs,
    RankDeficientError,
    qr_orthonormalize,
    regularized_b,
    sign_normalize,
    sym_top_eigs,
    top_left_singular,
)
from .metrics import (
    ErrorReport,
    explained_variability,
    factor_recovery,
    linear_fit_r2,
    loading_error,
)
from .model import (
    CoherenceReport,
    CpFactorModel,
    InequalityCheck,
    ModelDiagnostics,
    check_prop1,
    coherence_report,
    diagnostics,
    reconstruct,
    reconstruct_series,
    snr,
)
from .moments import (
    LaggedMoment,
    explained_fraction,
    lag_scan,
    lagged_cross_moment,
    multi_lag_refine,
    select_lag,
)
from .simulate import (
    SimConfig,
    gen_ar1_factors,
    gen_loadings,
    gen_noise,
    gen_series,
    named_config,
    seed_streams,
)
from .tensor_ops import (
    hs_norm,
    khatri_rao,
    mode_vec_product,
    multi_contract,
    outer,
    refold,
    unfold,
    unvec,
    vec,
)

__version__ = "0.1.0"

__all__ = [
    "CPFactorDecomposition",
    "CoherenceReport",
    "ConvergenceError",
    "CpFactorModel",
    "EigPairs",
    "ErrorReport",
    "EstimationError",
    "FitConfig",
    "FitResult",
    "InequalityCheck",
    "LaggedMoment",
    "ModelDiagnostics",
    "ProjectionState",
    "RankDeficientError",
    "SimConfig",
    "als",
    "cals",
    "check_prop1",
    "coals",
    "coherence_report",
    "cpca",
    "cpca_init",
    "diagnostics",
    "explained_fraction",
    "explained_variability",
    "factor_recovery",
    "finalize_fit",
    "fit_method",
    "gen_ar1_factors",
    "gen_loadings",
    "gen_noise",
    "gen_series",
    "hope",
    "hs_norm",
    "iso_refine",
    "khatri_rao",
    "lag_scan",
    "lagged_cross_moment",
    "linear_fit_r2",
    "loading_error",
    "mode_vec_product",
    "multi_contract",
    "multi_lag_refine",
    "named_config",
    "oals",
    "one_step_hope",
    "outer",
    "project_z",
    "projection_leakage",
    "qr_orthonormalize",
    "reconstruct",
    "reconstruct_series",
    "refold",
    "regularized_b",
    "seed_streams",
    "select_lag",
    "sign_normalize",
    "snr",
    "sym_top_eigs",
    "top_left_singular",
    "unfold",
    "unvec",
    "vec",
]
