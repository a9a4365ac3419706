"""Error-bounded sample-size optimization for grouped analytical queries.

Given a grouped table, an analytical function, and an error constraint
(error within eps with probability 1 - delta), the package searches for a
near-minimal stratified sample size by estimating errors with the bootstrap,
fitting a log-linear error model to the observations, and predicting the
cheapest size that meets the bound in closed form.  Constraints stated under
other metrics (max error, L1/Lp, order preservation, pairwise differences)
are converted to equivalent squared-error bounds and run through the same
loop.
"""

from .analytics import (
    AnalyticalFunction,
    ConvergenceError,
    InsufficientDataError,
    Predicate,
    evaluate,
    max_approx,
    transform_inconsistent,
)
from .dataset import (
    CsvFormatError,
    Dataset,
    GeneratorSpec,
    GroupIndex,
    build_index,
    generate_synthetic,
    load_csv,
    stack_groups,
    to_csv,
    true_result,
)
from .engine import (
    ConversionRequest,
    IndistinguishableGroupsError,
    SearchConfig,
    SearchOutcome,
    SearchStatus,
    convert_bound,
    initialize_sizes,
    optimize_sample_size,
    optimize_with_metric,
    order_bound,
)
from .estimation import (
    GEOMETRIC_MEAN,
    L1,
    L2,
    LINF,
    MAX_DIFFERENCE,
    METRICS,
    BootstrapConfig,
    ErrorConstraint,
    bootstrap_error,
    metric_eval,
)
from .harness import (
    EvalReport,
    GridCase,
    SweepSpec,
    clt_baseline_size,
    run_grid,
    run_sweep,
    simulated_confidence,
    z_score,
)
from .model import (
    DiagnosticConfig,
    ErrorProfile,
    ErrorRecord,
    ModelParams,
    UnrecoverableFit,
    design_row,
    diagnose,
    fit_ols,
    fit_wls,
    predict_sizes,
    r2_score,
)
from .sampling import Sample, exhaustive_sample, stratified_sample

__all__ = [
    "AnalyticalFunction",
    "BootstrapConfig",
    "ConversionRequest",
    "ConvergenceError",
    "CsvFormatError",
    "Dataset",
    "DiagnosticConfig",
    "ErrorConstraint",
    "ErrorProfile",
    "ErrorRecord",
    "EvalReport",
    "GEOMETRIC_MEAN",
    "GeneratorSpec",
    "GridCase",
    "GroupIndex",
    "IndistinguishableGroupsError",
    "InsufficientDataError",
    "L1",
    "L2",
    "LINF",
    "MAX_DIFFERENCE",
    "METRICS",
    "ModelParams",
    "Predicate",
    "Sample",
    "SearchConfig",
    "SearchOutcome",
    "SearchStatus",
    "SweepSpec",
    "UnrecoverableFit",
    "build_index",
    "bootstrap_error",
    "clt_baseline_size",
    "convert_bound",
    "design_row",
    "diagnose",
    "evaluate",
    "exhaustive_sample",
    "fit_ols",
    "fit_wls",
    "generate_synthetic",
    "initialize_sizes",
    "load_csv",
    "max_approx",
    "metric_eval",
    "optimize_sample_size",
    "optimize_with_metric",
    "order_bound",
    "predict_sizes",
    "r2_score",
    "run_grid",
    "run_sweep",
    "simulated_confidence",
    "stack_groups",
    "stratified_sample",
    "to_csv",
    "transform_inconsistent",
    "true_result",
    "z_score",
]

__version__ = "0.1.0"
