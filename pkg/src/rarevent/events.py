"""Domain types for marked event streams and model parameters.

Conventions used throughout the package:

- time is measured in minutes from the stream origin,
- marks are integers 1..M with mark 1 = normal and mark 2 = rare,
- covariates are integers 1..Z,
- probability arrays are indexed 0-based, so ``delta[z-1, m-1]`` is the
  background probability of mark ``m`` under covariate ``z`` and
  ``gamma[z-1, r-1, c-1]`` the probability that excitation from a mark-``r``
  event produces a mark-``c`` event under covariate ``z``.

All types validate on construction and are immutable afterwards, so they can
be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: row sums of probability tables must match 1 this closely
SIMPLEX_TOL = 1e-9


def _check_simplex_rows(name, arr):
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    sums = arr.sum(axis=-1)
    bad = np.abs(sums - 1.0) > SIMPLEX_TOL
    if np.any(bad):
        idx = tuple(int(v) for v in np.argwhere(bad)[0])
        raise ValueError(
            f"{name} rows must sum to 1 within {SIMPLEX_TOL:g}; "
            f"row {idx} sums to {float(sums[idx]):.12g}"
        )


@dataclass(frozen=True)
class Event:
    """One point of the stream: occurrence time, mark and covariate."""

    time: float
    mark: int
    covariate: int = 1

    def __post_init__(self):
        if not math.isfinite(self.time) or self.time < 0.0:
            raise ValueError(f"event time must be finite and >= 0, got {self.time}")
        if self.mark < 1:
            raise ValueError(f"mark must be a positive integer, got {self.mark}")
        if self.covariate < 1:
            raise ValueError(f"covariate must be a positive integer, got {self.covariate}")


@dataclass(frozen=True)
class EventSequence:
    """An ordered realization of a marked point process over [0, horizon).

    Construct directly from arrays, or via :func:`from_events`. Times must be
    strictly increasing; raw data with tied timestamps should be passed
    through :func:`normalize_times` first.
    """

    times: np.ndarray
    marks: np.ndarray
    covariates: np.ndarray
    horizon: float
    mark_count: int = 2
    covariate_count: int = 1

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        marks = np.asarray(self.marks, dtype=np.int64)
        covs = np.asarray(self.covariates, dtype=np.int64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "covariates", covs)
        if not (len(times) == len(marks) == len(covs)):
            raise ValueError("times, marks and covariates must have equal length")
        if len(times) and (not np.all(np.isfinite(times)) or times[0] < 0.0):
            raise ValueError("event times must be finite and >= 0")
        if len(times) > 1:
            gaps = np.diff(times)
            if np.any(gaps <= 0.0):
                i = int(np.argmax(gaps <= 0.0)) + 1
                raise ValueError(
                    f"times must be strictly increasing; violation at index {i} "
                    f"({times[i]} after {times[i - 1]})"
                )
        if self.mark_count < 2:
            raise ValueError("mark_count must be >= 2")
        if self.covariate_count < 1:
            raise ValueError("covariate_count must be >= 1")
        if len(marks) and (marks.min() < 1 or marks.max() > self.mark_count):
            raise ValueError(f"marks must lie in 1..{self.mark_count}")
        if len(covs) and (covs.min() < 1 or covs.max() > self.covariate_count):
            raise ValueError(f"covariates must lie in 1..{self.covariate_count}")
        if not math.isfinite(self.horizon):
            raise ValueError("horizon must be finite")
        if len(times) and self.horizon < times[-1]:
            raise ValueError(
                f"horizon {self.horizon} is before the last event at {times[-1]}"
            )

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for t, m, z in zip(self.times, self.marks, self.covariates):
            yield Event(float(t), int(m), int(z))

    def window(self, start: float, stop: float, horizon: float | None = None) -> "EventSequence":
        """Events with start <= time < stop, keeping absolute times."""
        keep = (self.times >= start) & (self.times < stop)
        if horizon is None:
            horizon = min(self.horizon, stop)
        return EventSequence(
            times=self.times[keep],
            marks=self.marks[keep],
            covariates=self.covariates[keep],
            horizon=horizon,
            mark_count=self.mark_count,
            covariate_count=self.covariate_count,
        )


def from_events(events, horizon=None, mark_count=None, covariate_count=None) -> EventSequence:
    """Build an EventSequence from an iterable of Event objects."""
    events = list(events)
    times = np.array([e.time for e in events], dtype=float)
    marks = np.array([e.mark for e in events], dtype=np.int64)
    covs = np.array([e.covariate for e in events], dtype=np.int64)
    if horizon is None:
        horizon = float(times[-1]) if len(times) else 0.0
    if mark_count is None:
        mark_count = max(2, int(marks.max())) if len(marks) else 2
    if covariate_count is None:
        covariate_count = int(covs.max()) if len(covs) else 1
    return EventSequence(times, marks, covs, float(horizon), mark_count, covariate_count)


@dataclass(frozen=True)
class MarkModelParams:
    """Parameters of the history-dependent mark classifier.

    ``alpha_star`` is the identifiable scaled excitation factor; the
    underlying background rate and branching ratio of the generating process
    are deliberately not part of this object because the sequence of marks
    alone cannot identify them.
    """

    alpha_star: float
    beta: float
    delta: np.ndarray  # (Z, M) background mark probabilities
    gamma: np.ndarray  # (Z, M, M) triggering probabilities, [z, source, target]

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma", gamma)
        if not (math.isfinite(self.alpha_star) and self.alpha_star >= 0.0):
            raise ValueError(f"alpha_star must be >= 0, got {self.alpha_star}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if delta.ndim != 2:
            raise ValueError("delta must have shape (Z, M)")
        z, m = delta.shape
        if m < 2:
            raise ValueError("delta needs at least two mark columns")
        if gamma.shape != (z, m, m):
            raise ValueError(
                f"gamma must have shape (Z, M, M) = {(z, m, m)}, got {gamma.shape}"
            )
        _check_simplex_rows("delta", delta)
        _check_simplex_rows("gamma", gamma)

    @property
    def mark_count(self) -> int:
        return self.delta.shape[1]

    @property
    def covariate_count(self) -> int:
        return self.delta.shape[0]


@dataclass(frozen=True)
class UnmarkedHawkesParams:
    """Ground-process parameters: background rate, branching ratio, decay."""

    mu: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"beta must be > 0, got {self.beta}")


def normalize_times(raw_times, tie_epsilon: float = 1e-6) -> np.ndarray:
    """Break timestamp ties so times become strictly increasing.

    Repeated timestamps get a deterministic cumulative offset: the k-th
    member of a tie group is shifted by at most k * tie_epsilon. Input must
    already be sorted non-decreasing.
    """
    if tie_epsilon <= 0.0:
        raise ValueError("tie_epsilon must be > 0")
    raw = np.asarray(raw_times, dtype=float)
    if len(raw) and (not np.all(np.isfinite(raw)) or raw[0] < 0.0):
        raise ValueError("times must be finite and >= 0")
    if len(raw) > 1:
        drops = np.diff(raw) < 0.0
        if np.any(drops):
            i = int(np.argmax(drops)) + 1
            raise ValueError(
                f"times must be sorted non-decreasing; index {i} "
                f"({raw[i]}) is before its predecessor ({raw[i - 1]})"
            )
    out = raw.copy()
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + tie_epsilon
    return out
