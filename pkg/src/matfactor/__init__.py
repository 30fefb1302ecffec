"""Factor models for matrix-valued time series.

Fits the bilinear model ``X_t = R F_t C' + E_t`` by eigen-analysis of
lag-aggregated auto-cross-covariances, keeping the observations in matrix
form. A vectorized single-loading baseline, a simulation toolkit, a
Monte-Carlo study driver, and out-of-sample validation utilities round out
the package. See the README for the CLI.
"""

from .baseline import (
    PANEL_LIMIT,
    VecFactorFit,
    autocov_gram_vec,
    fit_vec,
    matrix_param_count,
    signal_vec,
    vector_param_count,
)
from .errors import (
    ConvergenceFailure,
    DegenerateSpectrum,
    DimensionMismatch,
    IncompletePanel,
    LagTooLarge,
    MatfactorError,
    NonFinite,
    NotOrthonormal,
    NotSPD,
    PanelTooLarge,
    SchemaError,
    ScheduleInvalid,
    TooFewObservations,
    UnstableAR,
    ZeroVarianceCell,
)
from .estimator import (
    AutocovGram,
    EstimatorOptions,
    FactorFit,
    LoadingEstimate,
    MAX_LAG_WINDOW,
    autocov_gram,
    estimate_rank,
    extract_factors,
    fit,
    reconstruct_signal,
    subspace_distance,
    sym_eig,
)
from .io import (
    dump_json,
    export_csv,
    ingest_csv,
    parse_study_grid,
    read_fit_json,
    read_rank_freq_csv,
    read_study_table_csv,
    simconfig_from_jsonable,
    simconfig_to_jsonable,
    write_fit_json,
    write_study_csv,
    write_study_json,
    write_study_table_csv,
    write_validation_csv,
    write_validation_json,
)
from .series import (
    LaggedBlockCov,
    MatrixSeries,
    StandardizedSeries,
    lagged_block_cov,
    standardize,
    transpose_series,
    vec_series,
)
from .simulation import (
    AR1Spec,
    DEFAULT_AR_GRID,
    KroneckerNoise,
    MA2Spec,
    SimConfig,
    SimTruth,
    gen_factors,
    gen_loadings,
    gen_noise,
    simulate,
)
from .study import (
    CellResult,
    MetricSummary,
    RANK_METRICS,
    SCALAR_METRICS,
    StudyCell,
    StudyReport,
    resolve_workers,
    run_study,
)
from .validation import (
    ModelSpec,
    RateFit,
    ValidationReport,
    ValidationRow,
    kfold_cv,
    make_rolling_schedule,
    rate_study,
    rolling_validation,
    rss_sst,
)
from .varimax import varimax, varimax_criterion

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # series
    "MatrixSeries", "StandardizedSeries", "LaggedBlockCov",
    "standardize", "transpose_series", "vec_series", "lagged_block_cov",
    # estimator
    "EstimatorOptions", "AutocovGram", "LoadingEstimate", "FactorFit",
    "MAX_LAG_WINDOW", "autocov_gram", "sym_eig", "estimate_rank", "fit",
    "extract_factors", "reconstruct_signal", "subspace_distance",
    # varimax
    "varimax", "varimax_criterion",
    # baseline
    "PANEL_LIMIT", "VecFactorFit", "autocov_gram_vec", "fit_vec",
    "signal_vec", "matrix_param_count", "vector_param_count",
    # simulation
    "AR1Spec", "MA2Spec", "KroneckerNoise", "SimConfig", "SimTruth",
    "DEFAULT_AR_GRID", "gen_loadings", "gen_factors", "gen_noise", "simulate",
    # study
    "SCALAR_METRICS", "RANK_METRICS", "StudyCell", "MetricSummary",
    "CellResult", "StudyReport", "resolve_workers", "run_study",
    # validation
    "ModelSpec", "ValidationRow", "ValidationReport", "RateFit",
    "kfold_cv", "make_rolling_schedule", "rolling_validation", "rate_study",
    "rss_sst",
    # io
    "ingest_csv", "export_csv", "dump_json", "write_fit_json",
    "read_fit_json", "write_study_json", "write_study_csv",
    "write_study_table_csv", "read_study_table_csv", "read_rank_freq_csv",
    "write_validation_json", "write_validation_csv",
    "simconfig_to_jsonable", "simconfig_from_jsonable", "parse_study_grid",
    # errors
    "MatfactorError", "DimensionMismatch", "NonFinite",
    "TooFewObservations", "ZeroVarianceCell", "LagTooLarge",
    "DegenerateSpectrum", "ConvergenceFailure", "NotOrthonormal", "NotSPD",
    "UnstableAR", "PanelTooLarge", "SchemaError", "IncompletePanel",
]
