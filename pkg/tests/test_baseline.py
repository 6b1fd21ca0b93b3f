import math

import numpy as np
import pytest
from scipy.special import expit, logit

from rarevent import (
    LogisticConfig,
    LogisticModel,
    fit_logistic,
    fuse,
    logistic_loss_grad,
    numerical_gradient,
    predict_logistic,
)
from rarevent.errors import DataError


def labeled_blob(n=400, p=3, seed=0, signal=1.5):
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, p))
    scores = signal * features[:, 0] - 0.5
    labels = (rng.random(n) < expit(scores)).astype(int)
    return features, labels


def test_loss_grad_matches_finite_differences():
    rng = np.random.default_rng(1)
    design = rng.normal(size=(60, 4))
    labels = rng.integers(0, 2, size=60).astype(float)
    penalized = np.array([False, True, True, True])
    for _ in range(5):
        w = rng.normal(size=4)
        _, analytic = logistic_loss_grad(w, design, labels, l2=0.3, penalized=penalized)
        numeric = numerical_gradient(
            lambda v: logistic_loss_grad(v, design, labels, 0.3, penalized)[0], w
        )
        scale = np.maximum(np.abs(numeric), 1.0)
        assert np.max(np.abs(analytic - numeric) / scale) < 1e-5


def test_loss_at_zero_weights_is_log_two():
    design = np.ones((10, 1))
    labels = np.array([0.0, 1.0] * 5)
    loss, _ = logistic_loss_grad(np.zeros(1), design, labels)
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)


def test_intercept_recovers_prevalence_on_noise_features():
    rng = np.random.default_rng(2)
    n = 10_000
    features = rng.normal(size=(n, 2))
    labels = (rng.random(n) < 0.2).astype(int)
    model = fit_logistic(features, labels, LogisticConfig(l2=1e-4, max_iter=2000))
    prevalence = labels.mean()
    assert abs(model.weights[0] - logit(prevalence)) < 1e-2
    # noise features carry only sampling-level weight (SE ~ 0.025 here)
    assert np.max(np.abs(model.weights[1:])) < 0.1


def test_informative_feature_gets_positive_weight():
    features, labels = labeled_blob(seed=3)
    model = fit_logistic(features, labels)
    assert model.weights[1] > 0.5
    assert abs(model.weights[2]) < abs(model.weights[1])


def test_loss_history_non_increasing_and_converges():
    features, labels = labeled_blob(n=300, seed=4)
    model = fit_logistic(features, labels, LogisticConfig(max_iter=5000))
    history = np.asarray(model.loss_history)
    assert np.all(np.diff(history) <= 0)
    assert model.converged
    assert model.final_loss == history[-1]
    assert model.iterations == len(history) - 1


def test_constant_column_is_left_alone():
    features, labels = labeled_blob(n=200, seed=5)
    with_const = np.column_stack([features, np.full(len(labels), 7.0)])
    model = fit_logistic(with_const, labels)
    assert model.mean[-1] == 0.0 and model.scale[-1] == 1.0
    probs = predict_logistic(model, with_const)
    assert np.all((probs > 0) & (probs < 1))


def test_fit_input_validation():
    features, labels = labeled_blob(n=50, seed=6)
    with pytest.raises(DataError, match="each class"):
        fit_logistic(features, np.ones(50, dtype=int))
    bad = features.copy()
    bad[0, 0] = np.inf
    with pytest.raises(DataError, match="non-finite"):
        fit_logistic(bad, labels)
    with pytest.raises(ValueError, match="feature_names"):
        fit_logistic(features, labels, feature_names=("a",))
    with pytest.raises(ValueError, match="one label per row"):
        fit_logistic(features[:10], labels)


def test_predictions_behave():
    features, labels = labeled_blob(seed=7)
    model = fit_logistic(features, labels, feature_names=("x0", "x1", "x2"))
    zero_model = LogisticModel(
        weights=np.zeros(4),
        mean=model.mean,
        scale=model.scale,
        feature_names=model.feature_names,
        iterations=0,
        final_loss=math.log(2.0),
        converged=False,
    )
    assert np.all(predict_logistic(zero_model, features) == 0.5)
    # monotone in the informative feature
    grid = np.zeros((5, 3))
    grid[:, 0] = np.linspace(-3, 3, 5)
    probs = predict_logistic(model, grid)
    assert np.all(np.diff(probs) > 0)
    with pytest.raises(ValueError, match="width"):
        predict_logistic(model, features[:, :2])


def test_extreme_scores_saturate_safely():
    model = LogisticModel(
        weights=np.array([0.0, 50.0]),
        mean=np.zeros(1),
        scale=np.ones(1),
        feature_names=("x",),
        iterations=1,
        final_loss=0.0,
        converged=True,
    )
    probs = predict_logistic(model, np.array([[5.0], [-5.0]]))
    assert probs[0] >= 1.0 - 1e-6
    assert probs[1] <= 1e-6


def test_model_round_trips_through_dict():
    features, labels = labeled_blob(n=250, seed=8)
    model = fit_logistic(features, labels, feature_names=("a", "b", "c"))
    clone = LogisticModel.from_dict(model.to_dict())
    assert clone.feature_names == model.feature_names
    assert clone.converged == model.converged
    assert np.array_equal(
        predict_logistic(clone, features), predict_logistic(model, features)
    )


def test_fuse_examples_and_validation():
    assert fuse([0.2], [0.8])[0] == pytest.approx(0.5)
    combined = fuse([0.0, 1.0, 0.4], [0.0, 1.0, 0.6])
    assert np.allclose(combined, [0.0, 1.0, 0.5])
    with pytest.raises(ValueError, match="shape"):
        fuse([0.1, 0.2], [0.1])
    with pytest.raises(ValueError, match="outside"):
        fuse([1.2], [0.5])
    with pytest.raises(ValueError, match="second"):
        fuse([0.5], [-0.1])
