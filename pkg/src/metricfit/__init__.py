"""Post-hoc class weighting of black-box classifier outputs.

Fit a weight per class on a labeled validation sample so that the weighted
argmax of the black box's probabilities maximizes a chosen confusion-matrix
metric; includes a brute-force oracle, a hidden-metric recovery harness,
synthetic shift/noise benchmarks, and a vector-scaling baseline.
"""

from ._version import __version__
from .baselines import VectorScaler, clean_eval, nll_and_grad
from .elicitation import ElicitationReport, elicit, required_search_margin
from .generators import (
    Benchmark,
    NoiseSpec,
    ShiftSpec,
    SoftmaxGroundTruth,
    apply_label_noise,
    apply_label_shift,
    distort_predictions,
    make_shift_benchmark,
    softmax_rows,
)
from .metrics import (
    CountingMetric,
    FunctionMetric,
    LinearDiagonalMetric,
    LinearFractionalMetric,
    Metric,
    accuracy,
    available_metrics,
    f_measure_binary,
    f_measure_macro,
    fowlkes_mallows_macro,
    g_mean_macro,
    get_metric,
    mcc,
    mcc_raw,
)
from .oracle import GridSpec, ResourceLimitError, brute_force_fit, compare_to_oracle
from .plugin import (
    ClassWeightPlugin,
    FitReport,
    WeightVector,
    alpha_grid,
    alpha_line_search,
    alpha_unimodal_search,
    apply_weights,
    fit_weights,
    restrict_sample,
    restricted_predict,
    unimodal_budget,
)
from .samples import (
    AssumptionReport,
    SampleSet,
    check_probability_matrix,
    check_probability_vector,
    confusion_from_labels,
    confusion_from_weights,
    validate_assumption,
    weighted_argmax,
)

__all__ = [
    "__version__",
    "AssumptionReport",
    "Benchmark",
    "ClassWeightPlugin",
    "CountingMetric",
    "ElicitationReport",
    "FitReport",
    "FunctionMetric",
    "GridSpec",
    "LinearDiagonalMetric",
    "LinearFractionalMetric",
    "Metric",
    "NoiseSpec",
    "ResourceLimitError",
    "SampleSet",
    "ShiftSpec",
    "SoftmaxGroundTruth",
    "VectorScaler",
    "WeightVector",
    "accuracy",
    "alpha_grid",
    "alpha_line_search",
    "alpha_unimodal_search",
    "apply_label_noise",
    "apply_label_shift",
    "apply_weights",
    "available_metrics",
    "brute_force_fit",
    "check_probability_matrix",
    "check_probability_vector",
    "clean_eval",
    "compare_to_oracle",
    "confusion_from_labels",
    "confusion_from_weights",
    "distort_predictions",
    "elicit",
    "f_measure_binary",
    "f_measure_macro",
    "fit_weights",
    "fowlkes_mallows_macro",
    "g_mean_macro",
    "get_metric",
    "make_shift_benchmark",
    "mcc",
    "mcc_raw",
    "nll_and_grad",
    "required_search_margin",
    "restrict_sample",
    "restricted_predict",
    "softmax_rows",
    "unimodal_budget",
    "validate_assumption",
    "weighted_argmax",
]
