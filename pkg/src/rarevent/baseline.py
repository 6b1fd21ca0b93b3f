"""Logistic-regression baseline and probability fusion.

Training minimizes mean log-loss plus an L2 penalty by gradient descent with
Armijo backtracking, which makes the recorded loss sequence non-increasing.
Columns are standardized to train mean/variance before fitting (constant
columns, including any intercept column a caller passes, are left alone and
excluded from the penalty); the statistics live in the model so test-time
transforms reuse them. An intercept weight is always added internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DataError

ARMIJO_C1 = 1e-4
MIN_STEP = 1e-20


@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1e-4
    max_iter: int = 1000
    gradient_tol: float = 1e-6


@dataclass(frozen=True)
class LogisticModel:
    """Fitted weights on the standardized scale plus the scaling statistics.

    weights[0] is the internal intercept; weights[1:] align with feature
    columns. predict applies (x - mean) / scale before the dot product.
    """

    weights: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    feature_names: tuple
    iterations: int
    final_loss: float
    converged: bool
    loss_history: tuple = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "mean": [float(v) for v in self.mean],
            "scale": [float(v) for v in self.scale],
            "feature_names": list(self.feature_names),
            "iterations": self.iterations,
            "final_loss": self.final_loss,
            "converged": self.converged,
        }

    @staticmethod
    def from_dict(d: dict) -> "LogisticModel":
        return LogisticModel(
            weights=np.asarray(d["weights"], dtype=float),
            mean=np.asarray(d["mean"], dtype=float),
            scale=np.asarray(d["scale"], dtype=float),
            feature_names=tuple(d["feature_names"]),
            iterations=int(d["iterations"]),
            final_loss=float(d["final_loss"]),
            converged=bool(d["converged"]),
        )


def logistic_loss_grad(weights, design, labels, l2: float = 0.0, penalized=None):
    """Mean log-loss plus 0.5*l2*sum of penalized squared weights, with gradient.

    design already includes whatever intercept column the caller wants;
    penalized is a boolean mask over weights (default: all penalized).
    """
    weights = np.asarray(weights, dtype=float)
    scores = design @ weights
    # softplus(s) - y*s is the stable per-row log-loss
    loss = float(np.mean(np.logaddexp(0.0, scores) - labels * scores))
    grad = design.T @ (expit(scores) - labels) / len(labels)
    if l2:
        mask = np.ones_like(weights, dtype=bool) if penalized is None else penalized
        loss += 0.5 * l2 * float(np.sum(weights[mask] ** 2))
        grad = grad + l2 * np.where(mask, weights, 0.0)
    return loss, grad


def _standardize_stats(features):
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    constant = std == 0.0
    scale = np.where(constant, 1.0, std)
    mean = np.where(constant, 0.0, mean)
    return mean, scale, constant


def fit_logistic(
    features, labels, config: LogisticConfig | None = None, feature_names=()
) -> LogisticModel:
    """Gradient descent with backtracking line search on the penalized log-loss."""
    config = config or LogisticConfig()
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ValueError("features must be n x p with one label per row")
    if not np.all(np.isfinite(features)):
        raise DataError("features contain non-finite entries")
    if labels.min() == labels.max():
        raise DataError("need at least one example of each class")
    if feature_names and len(feature_names) != features.shape[1]:
        raise ValueError("feature_names length does not match feature width")

    mean, scale, constant = _standardize_stats(features)
    design = np.empty((features.shape[0], features.shape[1] + 1))
    design[:, 0] = 1.0
    design[:, 1:] = (features - mean) / scale
    penalized = np.concatenate([[False], ~constant])  # intercept-like columns free

    w = np.zeros(design.shape[1])
    loss, grad = logistic_loss_grad(w, design, labels, config.l2, penalized)
    history = [loss]
    step = 1.0
    iterations = 0
    converged = float(np.max(np.abs(grad))) < config.gradient_tol
    while not converged and iterations < config.max_iter:
        descent = float(grad @ grad)
        step = min(step * 2.0, 1e8)  # warm start from the last accepted step
        while step >= MIN_STEP:
            trial = w - step * grad
            trial_loss, trial_grad = logistic_loss_grad(
                trial, design, labels, config.l2, penalized
            )
            if trial_loss <= loss - ARMIJO_C1 * step * descent:
                break
            step *= 0.5
        if step < MIN_STEP:
            break  # no descent step representable; stop where we are
        w, loss, grad = trial, trial_loss, trial_grad
        history.append(loss)
        iterations += 1
        converged = float(np.max(np.abs(grad))) < config.gradient_tol
    return LogisticModel(
        weights=w,
        mean=mean,
        scale=scale,
        feature_names=tuple(feature_names),
        iterations=iterations,
        final_loss=loss,
        converged=converged,
        loss_history=tuple(history),
    )


def predict_logistic(model: LogisticModel, features) -> np.ndarray:
    """Fraud probabilities sigmoid(w . standardized x) per row."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != len(model.weights) - 1:
        raise ValueError(
            f"feature width {features.shape[1] if features.ndim == 2 else 'n/a'} "
            f"does not match model width {len(model.weights) - 1}"
        )
    z = (features - model.mean) / model.scale
    return expit(model.weights[0] + z @ model.weights[1:])


def fuse(prob_a, prob_b) -> np.ndarray:
    """Elementwise mean of two probability vectors."""
    a = np.asarray(prob_a, dtype=float)
    b = np.asarray(prob_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("probability vectors differ in shape")
    for name, v in (("first", a), ("second", b)):
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError(f"{name} input has entries outside [0, 1]")
    return 0.5 * (a + b)
