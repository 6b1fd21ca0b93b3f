"""Rare-event analysis of timestamped transaction streams.

Event sequences carry times in minutes, marks 1..M (1 = normal, 2 = rare
class) and categorical covariates 1..Z. The central model scores each event's
mark from the excitation its history injects, normalized into a probability;
supporting modules cover ingestion, MLE fitting with confidence intervals,
simulation, class rebalancing, a logistic baseline, and evaluation metrics.
"""

from .baseline import (
    LogisticConfig,
    LogisticModel,
    fit_logistic,
    fuse,
    logistic_loss_grad,
    predict_logistic,
)
from .errors import ConfigError, DataError, EmptyInputError, SchemaError
from .estimation import (
    FitResult,
    HawkesParamTransform,
    MarkParamTransform,
    OptimizerConfig,
    PoissonFit,
    confidence_intervals,
    empirical_mark_model,
    fit_mark_model,
    fit_poisson,
    fit_unmarked_hawkes,
    mark_log_likelihood,
    numerical_gradient,
    unmarked_hawkes_log_likelihood,
)
from .events import (
    Event,
    EventSequence,
    MarkModelParams,
    UnmarkedHawkesParams,
    normalize_times,
)
from .imbalance import ResampleResult, random_oversample, random_undersample, smote
from .ingest import (
    CsvSchema,
    FeatureMatrix,
    FeatureStats,
    SplitSpec,
    TransactionRecord,
    build_event_sequence,
    build_feature_matrix,
    build_sequence_features,
    eda_class_balance,
    eda_contingency,
    eda_grouped_log_histogram,
    eda_interarrival_series,
    eda_window_counts,
    mi_difference_matrix,
    parse_csv,
    time_split,
)
from .markmodel import (
    ExcitationState,
    MarkDistribution,
    mark_probability_bruteforce,
    mark_probability_stream,
    score_sequence,
    stream_update,
)
from .metrics import (
    Confusion,
    CurvePoints,
    ScoredEvent,
    confusion,
    curve_points,
    f_beta,
    metric_advisor,
    pr_auc,
    roc_auc,
    scores_labels,
)
from .simulation import (
    CdfComparison,
    EmpiricalCdf,
    SimConfig,
    cdf_comparison,
    empirical_cdf,
    simulate_hawkes_unmarked,
    simulate_marked_hawkes,
    simulate_poisson,
)

__version__ = "0.1.0"
