import numpy as np
import pytest

from rarevent import (
    ScoredEvent,
    confusion,
    curve_points,
    f_beta,
    metric_advisor,
    pr_auc,
    roc_auc,
    scores_labels,
)


def pairwise_roc_auc(scores, labels):
    """O(n^2) reference: P(pos > neg) + 0.5 P(pos == neg)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def test_scored_event_validation():
    event = ScoredEvent(score=0.7, label=1, index=3)
    assert event.score == 0.7 and event.index == 3
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        ScoredEvent(score=1.5, label=0)
    with pytest.raises(ValueError, match="label"):
        ScoredEvent(score=0.5, label=2)


def test_scores_labels_splits():
    scored = [ScoredEvent(0.2, 0), ScoredEvent(0.9, 1)]
    scores, labels = scores_labels(scored)
    assert np.array_equal(scores, [0.2, 0.9])
    assert np.array_equal(labels, [0, 1])


# ---------------------------------------------------------------------------
# confusion and F-beta
# ---------------------------------------------------------------------------

def test_confusion_hand_case():
    scores = [0.9, 0.8, 0.3, 0.1]
    labels = [1, 0, 1, 0]
    c = confusion(scores, labels, threshold=0.5)
    assert (c.tp, c.fp, c.tn, c.fn) == (1, 1, 1, 1)
    assert c.accuracy == 0.5 and c.precision == 0.5 and c.recall == 0.5
    assert not c.precision_undefined


def test_confusion_threshold_is_inclusive():
    c = confusion([0.5], [1], threshold=0.5)
    assert c.tp == 1 and c.fn == 0


def test_confusion_no_predicted_positives():
    c = confusion([0.1, 0.2], [1, 0], threshold=0.9)
    assert c.tp == 0 and c.fp == 0
    assert c.precision == 1.0 and c.precision_undefined
    assert c.recall == 0.0


def test_confusion_matches_direct_tally():
    rng = np.random.default_rng(0)
    scores = rng.random(500)
    labels = rng.integers(0, 2, size=500)
    c = confusion(scores, labels, threshold=0.35)
    pred = scores >= 0.35
    assert c.tp == int(np.sum(pred & (labels == 1)))
    assert c.fp == int(np.sum(pred & (labels == 0)))
    assert c.tn == int(np.sum(~pred & (labels == 0)))
    assert c.fn == int(np.sum(~pred & (labels == 1)))
    assert c.tp + c.fp + c.tn + c.fn == 500


def test_confusion_validation():
    with pytest.raises(ValueError, match="threshold"):
        confusion([0.5], [1], threshold=1.5)
    with pytest.raises(ValueError, match="no scored events"):
        confusion([], [], threshold=0.5)
    with pytest.raises(ValueError, match="labels"):
        confusion([0.5], [3], threshold=0.5)


def test_f_beta_values():
    assert f_beta(0.5, 0.5, 1.0) == 0.5
    assert f_beta(1.0, 0.5, 2.0) == pytest.approx(5.0 / 9.0, abs=1e-12)
    assert f_beta(1.0, 0.5, 2.0) == pytest.approx(0.5556, abs=1e-4)
    assert f_beta(0.7, 0.7, 3.7) == pytest.approx(0.7)
    assert f_beta(0.0, 0.0, 1.0) == 0.0
    assert f_beta(0.0, 1.0, 1.0) == 0.0


def test_f_beta_validation():
    with pytest.raises(ValueError, match="beta"):
        f_beta(0.5, 0.5, 0.0)
    with pytest.raises(ValueError, match="precision and recall"):
        f_beta(1.5, 0.5, 1.0)


# ---------------------------------------------------------------------------
# ROC-AUC
# ---------------------------------------------------------------------------

def test_roc_auc_perfect_and_uninformative():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.4, 0.4, 0.4, 0.4], [1, 0, 1, 0]) == 0.5


def test_roc_auc_needs_both_classes():
    with pytest.raises(ValueError, match="positive and one negative"):
        roc_auc([0.3, 0.6], [1, 1])


def test_roc_auc_matches_pairwise_oracle_with_ties():
    rng = np.random.default_rng(3)
    # coarse grid forces many ties
    scores = rng.integers(0, 10, size=200) / 10.0
    labels = rng.integers(0, 2, size=200)
    assert roc_auc(scores, labels) == pytest.approx(
        pairwise_roc_auc(scores, labels), abs=1e-12
    )


def test_roc_auc_rank_invariance_and_flip():
    rng = np.random.default_rng(4)
    scores = rng.random(150)
    labels = rng.integers(0, 2, size=150)
    squashed = scores**3  # strictly increasing transform keeps ranks
    assert roc_auc(squashed, labels) == pytest.approx(roc_auc(scores, labels), abs=1e-12)
    assert roc_auc(scores, 1 - labels) == pytest.approx(
        1.0 - roc_auc(scores, labels), abs=1e-12
    )


# ---------------------------------------------------------------------------
# PR-AUC
# ---------------------------------------------------------------------------

def test_pr_auc_three_event_hand_value():
    # labels [1, 0, 1] in descending-score order:
    # P=1 at R=1/2, then P=2/3 at R=1 -> 1/2 + 1/2 * 2/3
    assert pr_auc([0.9, 0.5, 0.1], [1, 0, 1]) == pytest.approx(
        0.8333333333333333, abs=1e-12
    )


def test_pr_auc_perfect_ranking():
    assert pr_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_pr_auc_constant_scores_equal_prevalence():
    labels = np.array([1, 0, 0, 0, 1, 0, 0, 0, 0, 0])
    scores = np.full(10, 0.5)
    assert pr_auc(scores, labels) == labels.mean()


def test_pr_auc_needs_positives():
    with pytest.raises(ValueError, match="positive"):
        pr_auc([0.2, 0.4], [0, 0])


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def test_curve_areas_match_scalar_metrics():
    rng = np.random.default_rng(5)
    scores = np.round(rng.random(300), 2)  # ties included
    labels = rng.integers(0, 2, size=300)
    roc = curve_points(scores, labels, "roc")
    pr = curve_points(scores, labels, "pr")
    assert roc.area() == pytest.approx(roc_auc(scores, labels), abs=1e-12)
    assert pr.area() == pytest.approx(pr_auc(scores, labels), abs=1e-12)


def test_roc_curve_shape():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [1, 0, 1, 0]
    roc = curve_points(scores, labels, "roc")
    assert roc.xs[0] == 0.0 and roc.ys[0] == 0.0
    assert roc.xs[-1] == 1.0 and roc.ys[-1] == 1.0
    assert np.all(np.diff(roc.xs) >= 0) and np.all(np.diff(roc.ys) >= 0)
    assert roc.thresholds[0] == np.inf
    assert len(roc.xs) == len(np.unique(scores)) + 1


def test_pr_curve_shape_and_perfect_point():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [1, 1, 0, 0]
    pr = curve_points(scores, labels, "pr")
    assert np.all(np.diff(pr.xs) >= 0)
    assert pr.xs[-1] == 1.0
    assert np.all(pr.ys[pr.xs <= 1.0] >= 0.0)
    # a perfect ranker passes through recall=1 at precision=1
    assert pr.ys[pr.xs == 1.0][0] == 1.0


def test_curve_single_distinct_score():
    pr = curve_points([0.5, 0.5, 0.5], [1, 0, 1], "pr")
    assert np.array_equal(pr.xs, [1.0])
    assert pr.ys[0] == pytest.approx(2.0 / 3.0)


def test_curve_kind_validation():
    with pytest.raises(ValueError, match="kind"):
        curve_points([0.5], [1], "lift")


# ---------------------------------------------------------------------------
# metric advisor
# ---------------------------------------------------------------------------

def test_metric_advisor_mapping():
    assert metric_advisor(False, "balanced") == "ROC_AUC"
    assert metric_advisor(False, "fn_costly") == "ROC_AUC"
    assert metric_advisor(True, "balanced") == "PR_AUC"
    assert metric_advisor(True, "fn_costly") == "F(2)"
    assert metric_advisor(True, "fp_costly") == "F(0.5)"


def test_metric_advisor_rejects_unknown_profile():
    with pytest.raises(ValueError, match="cost profile"):
        metric_advisor(True, "mystery")
