"""Class rebalancing: SMOTE, random over-sampling, random under-sampling.

All three operate on a numeric feature matrix with 0/1 labels and never
modify original rows. Synthetic rows carry provenance triples
(base index, neighbor index, interpolation coefficient u) referring to rows
of the input matrix, so base + u * (neighbor - base) reconstructs each
synthetic row exactly. The minority class is the less frequent label
(ties go to label 1).

target_ratio is the requested minority/majority count ratio. Required
synthetic counts are rounded up (ceiling); a target at or below the current
ratio makes the over-samplers a no-op.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ResampleResult:
    """Rebalanced matrix. synthetic marks appended rows; provenance has one
    (base, neighbor, u) triple per synthetic row in output order, indices
    referring to rows of the input matrix."""

    features: np.ndarray
    labels: np.ndarray
    synthetic: np.ndarray
    provenance: tuple
    minority_label: int

    def __post_init__(self):
        n = len(self.labels)
        if self.features.shape[0] != n or self.synthetic.shape[0] != n:
            raise ValueError("features, labels and synthetic flags disagree on length")
        if int(self.synthetic.sum()) != len(self.provenance):
            raise ValueError("one provenance triple required per synthetic row")

    def class_counts(self) -> tuple[int, int]:
        """(minority count, majority count) after resampling."""
        n_min = int(np.sum(self.labels == self.minority_label))
        return n_min, len(self.labels) - n_min


def _validate(features, labels):
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if features.shape[0] != labels.shape[0]:
        raise ValueError("features and labels disagree on length")
    if not np.all(np.isfinite(features)):
        raise DataError("features contain non-finite entries")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0/1")
    return features, labels.astype(np.int64)


def _split_classes(labels):
    n1 = int(labels.sum())
    n0 = len(labels) - n1
    minority = 1 if n1 <= n0 else 0
    min_idx = np.flatnonzero(labels == minority)
    maj_idx = np.flatnonzero(labels != minority)
    return minority, min_idx, maj_idx


def _synthetic_count(n_min, n_maj, target_ratio) -> int:
    if target_ratio <= 0:
        raise ValueError("target_ratio must be > 0")
    return max(int(math.ceil(target_ratio * n_maj)) - n_min, 0)


def smote(features, labels, k: int = 5, target_ratio: float = 1.0, seed: int = 0) -> ResampleResult:
    """Oversample the minority class by interpolating toward nearest neighbors.

    Each synthetic row picks a random minority base row, one of its k nearest
    minority neighbors (Euclidean; distance ties broken by lower row index),
    and a coefficient u ~ Uniform[0, 1).
    """
    features, labels = _validate(features, labels)
    minority, min_idx, maj_idx = _split_classes(labels)
    if len(min_idx) <= k:
        raise DataError(
            f"SMOTE with k={k} needs more than {k} minority rows, got {len(min_idx)}; "
            "reduce k"
        )
    n_syn = _synthetic_count(len(min_idx), len(maj_idx), target_ratio)
    minority_rows = features[min_idx]
    diffs = minority_rows[:, None, :] - minority_rows[None, :, :]
    dist = np.sqrt(np.sum(diffs * diffs, axis=2))
    np.fill_diagonal(dist, np.inf)
    # stable argsort keeps equal distances in row-index order
    neighbor_table = np.argsort(dist, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    new_rows = np.empty((n_syn, features.shape[1]))
    provenance = []
    for s in range(n_syn):
        b = int(rng.integers(len(min_idx)))
        nb = int(neighbor_table[b, int(rng.integers(k))])
        u = float(rng.random())
        new_rows[s] = minority_rows[b] + u * (minority_rows[nb] - minority_rows[b])
        provenance.append((int(min_idx[b]), int(min_idx[nb]), u))
    return _append_synthetic(features, labels, minority, new_rows, provenance)


def random_oversample(features, labels, target_ratio: float = 1.0, seed: int = 0) -> ResampleResult:
    """Duplicate minority rows uniformly with replacement."""
    features, labels = _validate(features, labels)
    minority, min_idx, maj_idx = _split_classes(labels)
    if len(min_idx) == 0:
        raise DataError("no minority rows to oversample")
    n_syn = _synthetic_count(len(min_idx), len(maj_idx), target_ratio)
    rng = np.random.default_rng(seed)
    picks = min_idx[rng.integers(len(min_idx), size=n_syn)]
    new_rows = features[picks].copy()
    provenance = [(int(p), int(p), 0.0) for p in picks]
    return _append_synthetic(features, labels, minority, new_rows, provenance)


def random_undersample(features, labels, target_ratio: float = 1.0, seed: int = 0) -> ResampleResult:
    """Keep a uniform without-replacement sample of majority rows."""
    features, labels = _validate(features, labels)
    minority, min_idx, maj_idx = _split_classes(labels)
    if len(min_idx) == 0:
        raise DataError("no minority rows present")
    if target_ratio <= 0:
        raise ValueError("target_ratio must be > 0")
    n_keep = int(math.ceil(len(min_idx) / target_ratio))
    if n_keep > len(maj_idx):
        raise DataError(
            f"ratio {target_ratio} needs {n_keep} majority rows, only {len(maj_idx)} available"
        )
    rng = np.random.default_rng(seed)
    kept_maj = rng.choice(maj_idx, size=n_keep, replace=False)
    kept = np.sort(np.concatenate([min_idx, kept_maj]))
    return ResampleResult(
        features=features[kept],
        labels=labels[kept],
        synthetic=np.zeros(len(kept), dtype=bool),
        provenance=(),
        minority_label=minority,
    )


def _append_synthetic(features, labels, minority, new_rows, provenance) -> ResampleResult:
    n = len(labels)
    out_features = np.vstack([features, new_rows]) if len(new_rows) else features.copy()
    out_labels = np.concatenate([labels, np.full(len(new_rows), minority, dtype=np.int64)])
    flags = np.zeros(n + len(new_rows), dtype=bool)
    flags[n:] = True
    return ResampleResult(
        features=out_features,
        labels=out_labels,
        synthetic=flags,
        provenance=tuple(provenance),
        minority_label=minority,
    )
