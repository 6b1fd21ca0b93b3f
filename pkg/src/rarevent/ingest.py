"""Transaction CSV ingestion, event-sequence construction, splits, features, EDA.

Input files are UTF-8 CSVs with a header row; column names are configurable
through CsvSchema (defaults match the common fraud-detection layout:
TransactionDT in seconds, isFraud, TransactionAmt, ProductCD). Timestamps are
converted to minutes. Rows whose required fields do not parse are skipped and
counted rather than aborting the run, since real exports contain gaps.

Missing handling: a present-but-corrupt or non-positive amount invalidates
the row; an empty amount, product, days-since-last or extra categorical is
recorded as missing and resolved later by the feature builder (train-median
for numerics, a dedicated "__missing__" level for categoricals).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EmptyInputError, SchemaError
from .events import EventSequence, normalize_times

MISSING_LEVEL = "__missing__"
MINUTES_PER_DAY = 1440.0


@dataclass(frozen=True)
class CsvSchema:
    """Column names of the input CSV. Optional columns may be None/absent."""

    time: str = "TransactionDT"
    label: str = "isFraud"
    amount: str = "TransactionAmt"
    product: str = "ProductCD"
    days_since_last: str | None = None
    extra_categoricals: tuple = ()
    time_unit: str = "seconds"

    def __post_init__(self):
        if self.time_unit not in ("seconds", "minutes"):
            raise ValueError("time_unit must be 'seconds' or 'minutes'")

    def required_columns(self) -> tuple:
        return (self.time, self.label, self.amount, self.product)

    def optional_columns(self) -> tuple:
        cols = tuple(self.extra_categoricals)
        if self.days_since_last:
            cols = (self.days_since_last,) + cols
        return cols


@dataclass(frozen=True)
class TransactionRecord:
    time_seconds: float
    is_fraud: int
    product: str | None
    amount: float | None
    days_since_last: float | None = None
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ParseResult:
    records: tuple
    skipped: int


def _parse_float(text):
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def parse_csv(path, schema: CsvSchema | None = None) -> ParseResult:
    """Read transactions, skipping (and counting) rows with bad required fields."""
    schema = schema or CsvSchema()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise EmptyInputError(f"{path} has no header row")
        for col in schema.required_columns() + schema.optional_columns():
            if col not in reader.fieldnames:
                raise SchemaError(f"column {col!r} not found in {path}")
        records = []
        skipped = 0
        for row in reader:
            rec = _row_to_record(row, schema)
            if rec is None:
                skipped += 1
            else:
                records.append(rec)
    return ParseResult(tuple(records), skipped)


def _row_to_record(row, schema) -> TransactionRecord | None:
    raw_time = (row.get(schema.time) or "").strip()
    raw_label = (row.get(schema.label) or "").strip()
    raw_amount = (row.get(schema.amount) or "").strip()
    time_value = _parse_float(raw_time)
    if time_value is None or time_value < 0:
        return None
    label_value = _parse_float(raw_label)
    if label_value is None or label_value not in (0.0, 1.0):
        return None
    if raw_amount == "":
        amount = None
    else:
        amount = _parse_float(raw_amount)
        if amount is None or amount <= 0:
            return None
    if schema.time_unit == "minutes":
        time_value *= 60.0
    product = (row.get(schema.product) or "").strip() or None
    days = None
    if schema.days_since_last:
        raw_days = (row.get(schema.days_since_last) or "").strip()
        if raw_days:
            days = _parse_float(raw_days)
            if days is not None and days < 0:
                days = None
    extras = {}
    for col in schema.extra_categoricals:
        extras[col] = (row.get(col) or "").strip() or None
    return TransactionRecord(time_value, int(label_value), product, amount, days, extras)


def build_event_sequence(records, covariate_mapping: dict | None = None):
    """Event stream from records: minutes, marks 1/2 (normal/fraud), covariates.

    Products map to covariates 1..Z in first appearance order over the
    time-sorted records (missing products become their own level). Passing a
    previously returned mapping reuses the training encoding; an unseen
    product then raises. Returns (sequence, mapping).
    """
    records = list(records)
    if not records:
        raise DataError("no records to build an event sequence from")
    records.sort(key=lambda r: r.time_seconds)
    times = normalize_times([r.time_seconds / 60.0 for r in records])
    marks = np.array([2 if r.is_fraud else 1 for r in records], dtype=np.int64)

    if covariate_mapping is None:
        mapping = {}
        for rec in records:
            key = rec.product if rec.product is not None else MISSING_LEVEL
            if key not in mapping:
                mapping[key] = len(mapping) + 1
    else:
        mapping = dict(covariate_mapping)
    covs = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        key = rec.product if rec.product is not None else MISSING_LEVEL
        if key not in mapping:
            raise DataError(f"product {key!r} not present in the covariate mapping")
        covs[i] = mapping[key]
    sequence = EventSequence(
        times=times,
        marks=marks,
        covariates=covs,
        horizon=float(times[-1]),
        mark_count=2,
        covariate_count=max(mapping.values()),
    )
    return sequence, mapping


@dataclass(frozen=True)
class SplitSpec:
    train_days: int = 14
    test_days: int = 14

    def __post_init__(self):
        if self.train_days <= 0 or self.test_days <= 0:
            raise ValueError("both split lengths must be positive")


def time_split(sequence: EventSequence, spec: SplitSpec | None = None):
    """Time-ordered (train, test) partition; events past the test window drop."""
    spec = spec or SplitSpec()
    cut = spec.train_days * MINUTES_PER_DAY
    end = cut + spec.test_days * MINUTES_PER_DAY
    train = sequence.window(0.0, cut, horizon=cut)
    test = sequence.window(cut, end, horizon=end)
    if len(train) == 0:
        warnings.warn("train partition is empty", stacklevel=2)
    if len(test) == 0:
        warnings.warn("test partition is empty", stacklevel=2)
    return train, test


# ---------------------------------------------------------------------------
# feature construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureMatrix:
    """Numeric design matrix with named columns and 0/1 labels."""

    values: np.ndarray
    names: tuple
    labels: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if self.values.shape[1] != len(self.names):
            raise ValueError("column names do not match matrix width")
        if self.values.shape[0] != len(self.labels):
            raise ValueError("one label required per row")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix has non-finite entries")


@dataclass(frozen=True)
class FeatureStats:
    """Training-derived statistics reused when transforming test data.

    medians: per numeric column, the raw-scale train median; missing values
    impute to it before the log(1+x) transform. levels: per categorical
    column, the retained levels in first appearance order; the first is the
    dropped reference, so a one-hot block has len(levels)-1 columns and
    unseen test levels encode as all zeros.
    """

    medians: dict
    levels: dict
    names: tuple

    def to_dict(self) -> dict:
        return {
            "medians": {k: float(v) for k, v in self.medians.items()},
            "levels": {k: list(v) for k, v in self.levels.items()},
            "names": list(self.names),
        }

    @staticmethod
    def from_dict(d: dict) -> "FeatureStats":
        return FeatureStats(
            medians={k: float(v) for k, v in d["medians"].items()},
            levels={k: tuple(v) for k, v in d["levels"].items()},
            names=tuple(d["names"]),
        )


def _numeric_getters(schema):
    getters = {"amount": lambda r: r.amount}
    if schema.days_since_last:
        getters["days_since_last"] = lambda r: r.days_since_last
    return getters


def _categorical_getters(schema):
    getters = {"product": lambda r: r.product}
    for col in schema.extra_categoricals:
        getters[col] = lambda r, c=col: r.extras.get(c)
    return getters


def build_feature_matrix(records, schema: CsvSchema | None = None,
                         stats: FeatureStats | None = None):
    """log(1+x) numerics plus reference-dropped one-hots plus an intercept.

    Without stats, imputation medians and categorical levels are derived from
    these records (the training partition) and returned for reuse. Returns
    (FeatureMatrix, FeatureStats).
    """
    schema = schema or CsvSchema()
    records = list(records)
    if not records:
        raise DataError("no records to featurize")
    numeric = _numeric_getters(schema)
    categorical = _categorical_getters(schema)

    if stats is None:
        medians = {}
        for name, get in numeric.items():
            present = [get(r) for r in records if get(r) is not None]
            if not present:
                raise DataError(f"column {name!r} has no usable values to impute from")
            medians[name] = float(np.median(present))
        levels = {}
        for name, get in categorical.items():
            seen = []
            for r in records:
                value = get(r)
                key = MISSING_LEVEL if value is None else value
                if key not in seen:
                    seen.append(key)
            levels[name] = tuple(seen)
        names = list(numeric)
        for cat, lvls in levels.items():
            names += [f"{cat}={lvl}" for lvl in lvls[1:]]
        names.append("intercept")
        stats = FeatureStats(medians=medians, levels=levels, names=tuple(names))

    n = len(records)
    columns = []
    for name, get in numeric.items():
        col = np.empty(n)
        for i, r in enumerate(records):
            value = get(r)
            col[i] = math.log1p(stats.medians[name] if value is None else value)
        columns.append(col)
    for cat, get in categorical.items():
        lvls = stats.levels[cat]
        index = {lvl: j for j, lvl in enumerate(lvls)}
        block = np.zeros((n, len(lvls) - 1))
        for i, r in enumerate(records):
            value = get(r)
            key = MISSING_LEVEL if value is None else value
            j = index.get(key)  # unseen level or unseen-missing: all zeros
            if j is not None and j > 0:
                block[i, j - 1] = 1.0
        columns.append(block)
    columns.append(np.ones((n, 1)))
    values = np.column_stack(columns)
    labels = np.array([r.is_fraud for r in records], dtype=np.int64)
    return FeatureMatrix(values, stats.names, labels), stats


def build_sequence_features(sequence: EventSequence) -> FeatureMatrix:
    """Time-of-day fraction plus covariate one-hots for sequence-only baselines."""
    n = len(sequence)
    Z = sequence.covariate_count
    values = np.zeros((n, 1 + max(Z - 1, 0) + 1))
    values[:, 0] = (sequence.times % MINUTES_PER_DAY) / MINUTES_PER_DAY
    for z in range(2, Z + 1):
        values[:, z - 1] = (sequence.covariates == z).astype(float)
    values[:, -1] = 1.0
    names = ["time_of_day"] + [f"covariate={z}" for z in range(2, Z + 1)] + ["intercept"]
    labels = (sequence.marks == 2).astype(np.int64)
    return FeatureMatrix(values, tuple(names), labels)


# ---------------------------------------------------------------------------
# EDA aggregations
# ---------------------------------------------------------------------------

def eda_class_balance(records) -> dict:
    """Normal/fraud counts and the fraud share."""
    n_fraud = sum(r.is_fraud for r in records)
    n_total = len(records)
    return {
        "normal": n_total - n_fraud,
        "fraud": n_fraud,
        "fraud_share": n_fraud / n_total if n_total else 0.0,
    }


def eda_interarrival_series(sequence: EventSequence, start: float | None = None,
                            stop: float | None = None):
    """(arrival time of the later event, gap) pairs inside [start, stop)."""
    times = sequence.times
    if start is not None or stop is not None:
        lo = 0.0 if start is None else start
        hi = sequence.horizon if stop is None else stop
        times = times[(times >= lo) & (times < hi)]
    if len(times) < 2:
        return []
    gaps = np.diff(times)
    return list(zip(times[1:].tolist(), gaps.tolist()))


@dataclass(frozen=True)
class WindowCounts:
    """Per-day intraday window counts plus five-number summaries over days."""

    counts: np.ndarray  # days x windows
    window_minutes: float
    summaries: np.ndarray  # windows x 5: min, q1, median, q3, max


def eda_window_counts(sequence: EventSequence, window_minutes: float = 30.0) -> WindowCounts:
    if window_minutes <= 0 or MINUTES_PER_DAY % window_minutes != 0:
        raise ValueError("window_minutes must evenly divide a day")
    per_day = int(MINUTES_PER_DAY / window_minutes)
    n_days = max(int(math.ceil(sequence.horizon / MINUTES_PER_DAY)), 1)
    counts = np.zeros((n_days, per_day), dtype=np.int64)
    if len(sequence) > 0:
        day = (sequence.times // MINUTES_PER_DAY).astype(np.int64)
        win = ((sequence.times % MINUTES_PER_DAY) // window_minutes).astype(np.int64)
        np.add.at(counts, (day, win), 1)
    summaries = np.percentile(counts, [0, 25, 50, 75, 100], axis=0).T
    return WindowCounts(counts, float(window_minutes), summaries)


def eda_contingency(records, column: str):
    """Per-category (label, normal, fraud, fraud proportion), ascending by proportion."""
    get = _column_getter(column)
    tallies = {}
    for rec in records:
        value = get(rec)
        key = MISSING_LEVEL if value is None else str(value)
        normal, fraud = tallies.get(key, (0, 0))
        if rec.is_fraud:
            fraud += 1
        else:
            normal += 1
        tallies[key] = (normal, fraud)
    rows = [
        (key, normal, fraud, fraud / (normal + fraud))
        for key, (normal, fraud) in tallies.items()
    ]
    rows.sort(key=lambda r: (r[3], r[0]))
    return rows


def _column_getter(column):
    if column == "product":
        return lambda r: r.product
    if column == "amount":
        return lambda r: r.amount
    if column == "days_since_last":
        return lambda r: r.days_since_last

    def get(rec):
        if column not in rec.extras:
            raise ValueError(f"column {column!r} was not parsed from the input")
        return rec.extras[column]

    return get


@dataclass(frozen=True)
class GroupedHistogram:
    """Per-class densities of log(1+x) over shared bin edges."""

    edges: np.ndarray
    density_normal: np.ndarray
    density_fraud: np.ndarray


def eda_grouped_log_histogram(records, column: str, bins: int = 30) -> GroupedHistogram:
    if bins < 2:
        raise ValueError("need at least 2 bins")
    get = _column_getter(column)
    by_class = {0: [], 1: []}
    for rec in records:
        value = get(rec)
        if value is not None:
            by_class[rec.is_fraud].append(math.log1p(value))
    if not by_class[0] or not by_class[1]:
        raise DataError(f"column {column!r} has no usable values in one of the classes")
    pooled = np.array(by_class[0] + by_class[1])
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:  # degenerate range: widen so the single value sits mid-bin
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    d0, _ = np.histogram(by_class[0], bins=edges, density=True)
    d1, _ = np.histogram(by_class[1], bins=edges, density=True)
    return GroupedHistogram(edges, d0, d1)


def _equal_frequency_bins(column: np.ndarray, bins: int) -> np.ndarray:
    """Discretize by interior quantile cut points; degenerate columns give one bin."""
    inner = np.quantile(column, np.linspace(0, 1, bins + 1)[1:-1])
    return np.searchsorted(inner, column, side="right")


def _plugin_mi(x_binned, y_binned, bins: int) -> float:
    """Plug-in mutual information in nats of a binned pair."""
    joint = np.zeros((bins, bins))
    np.add.at(joint, (x_binned, y_binned), 1.0)
    joint /= joint.sum()
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    outer = np.outer(px, py)
    return float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))


def mi_difference_matrix(features_class0, features_class1, bins: int = 10) -> np.ndarray:
    """|MI_0(i,j) - MI_1(i,j)| over feature pairs, equal-frequency binned.

    Symmetric, non-negative, diagonal zero by convention.
    """
    a = np.asarray(features_class0, dtype=float)
    b = np.asarray(features_class1, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("both classes must share one feature set")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    p = a.shape[1]
    binned_a = [_equal_frequency_bins(a[:, j], bins) for j in range(p)]
    binned_b = [_equal_frequency_bins(b[:, j], bins) for j in range(p)]
    out = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            mi0 = _plugin_mi(binned_a[i], binned_a[j], bins)
            mi1 = _plugin_mi(binned_b[i], binned_b[j], bins)
            out[i, j] = out[j, i] = abs(mi0 - mi1)
    return out
