"""Evaluation metrics for imbalanced binary scoring.

Scores are probabilities of the rare (positive) class. PR-AUC is average
precision with step integration over tie-grouped thresholds; ROC-AUC is the
Mann-Whitney rank statistic, which equals the trapezoidal area under the ROC
curve. Both curve exporters emit one point per distinct score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ScoredEvent:
    """A scored observation: predicted rare-class probability and true label."""

    score: float
    label: int
    index: int | None = None
    time: float | None = None
    covariate: int | None = None
    mark: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def scores_labels(scored) -> tuple[np.ndarray, np.ndarray]:
    """Split an iterable of ScoredEvent into (scores, labels) arrays."""
    scored = list(scored)
    return (
        np.array([s.score for s in scored], dtype=float),
        np.array([s.label for s in scored], dtype=np.int64),
    )


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    #: True when no positives were predicted and precision defaulted to 1.0
    precision_undefined: bool


def _as_arrays(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d arrays of equal length")
    if len(scores) == 0:
        raise ValueError("no scored events given")
    if np.any(scores < 0.0) or np.any(scores > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    if np.any((labels != 0) & (labels != 1)):
        raise ValueError("labels must be 0 or 1")
    return scores, labels


def confusion(scores, labels, threshold: float) -> Confusion:
    """Confusion counts and threshold metrics; predicts 1 iff score >= threshold."""
    scores, labels = _as_arrays(scores, labels)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    n = tp + fp + tn + fn
    undefined = (tp + fp) == 0
    precision = 1.0 if undefined else tp / (tp + fp)
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    return Confusion(tp, fp, tn, fn, (tp + tn) / n, precision, recall, undefined)


def f_beta(precision: float, recall: float, beta: float) -> float:
    """F(beta) = (1 + beta^2) * p * r / (beta^2 * p + r); 0 when p = r = 0."""
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise ValueError("precision and recall must lie in [0, 1]")
    if beta <= 0.0:
        raise ValueError("beta must be > 0")
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * precision * recall / (b2 * precision + recall)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney ROC-AUC with average ranks for tied scores."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC undefined: need at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _threshold_sweep(scores, labels):
    """Cumulative TP/FP at each distinct score, swept from high to low."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # last index of each tie group marks a threshold boundary
    boundary = np.nonzero(np.diff(s))[0]
    ends = np.append(boundary, len(s) - 1)
    cum_tp = np.cumsum(y)[ends].astype(float)
    cum_fp = (ends + 1) - cum_tp
    return s[ends], cum_tp, cum_fp


def pr_auc(scores, labels) -> float:
    """Average precision: sum of (R_k - R_{k-1}) * P_k over tie-grouped thresholds."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise ValueError("PR-AUC undefined without positive examples")
    _, cum_tp, cum_fp = _threshold_sweep(scores, labels)
    recall = cum_tp / n_pos
    precision = cum_tp / (cum_tp + cum_fp)
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * precision))


@dataclass(frozen=True)
class CurvePoints:
    """Operating points of a ROC or PR curve, one per distinct threshold."""

    kind: str  # "roc" or "pr"
    xs: np.ndarray
    ys: np.ndarray
    thresholds: np.ndarray

    def area(self) -> float:
        if self.kind == "roc":
            return float(np.trapezoid(self.ys, self.xs))
        prev = np.concatenate(([0.0], self.xs[:-1]))
        return float(np.sum((self.xs - prev) * self.ys))


def curve_points(scores, labels, kind: str) -> CurvePoints:
    """ROC points (FPR, TPR) from (0,0) to (1,1), or PR points (recall, precision)."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if kind == "roc":
        if n_pos == 0 or n_neg == 0:
            raise ValueError("ROC curve undefined: need both classes")
        thr, cum_tp, cum_fp = _threshold_sweep(scores, labels)
        xs = np.concatenate(([0.0], cum_fp / n_neg))
        ys = np.concatenate(([0.0], cum_tp / n_pos))
        thresholds = np.concatenate(([np.inf], thr))
        return CurvePoints("roc", xs, ys, thresholds)
    if kind == "pr":
        if n_pos == 0:
            raise ValueError("PR curve undefined without positive examples")
        thr, cum_tp, cum_fp = _threshold_sweep(scores, labels)
        return CurvePoints("pr", cum_tp / n_pos, cum_tp / (cum_tp + cum_fp), thr)
    raise ValueError(f"kind must be 'roc' or 'pr', got {kind!r}")


def metric_advisor(positive_class_more_important: bool, cost_profile: str) -> str:
    """Recommend an evaluation metric for the task at hand.

    cost_profile is one of "balanced", "fn_costly", "fp_costly".
    """
    if cost_profile not in ("balanced", "fn_costly", "fp_costly"):
        raise ValueError(f"unknown cost profile {cost_profile!r}")
    if not positive_class_more_important:
        return "ROC_AUC"
    if cost_profile == "fn_costly":
        return "F(2)"
    if cost_profile == "fp_costly":
        return "F(0.5)"
    return "PR_AUC"
