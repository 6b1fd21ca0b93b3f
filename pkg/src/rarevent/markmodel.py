"""History-dependent mark probabilities for self-exciting event streams.

The probability that the event at time t carries mark m, given covariate z
and the history of earlier events, is

    P(m) = (delta[z, m] + alpha_star * sum_j exp(-beta (t - t_j)) gamma[z, m_j, m])
           ------------------------------------------------------------------
                      sum over m' of the same numerator

Every past event contributes excitation that decays exponentially at rate
beta and is routed to candidate marks through the triggering table gamma.
Two evaluation routes are provided: a direct double loop over the history
(`mark_probability_bruteforce`, the test oracle) and an O(n) streaming
recursion over per-source-mark decayed sums (`ExcitationState`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import EventSequence, MarkModelParams
from .metrics import ScoredEvent


@dataclass(frozen=True)
class MarkDistribution:
    """Probabilities over marks 1..M for a single event slot."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("mark probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise ValueError(f"mark probabilities must sum to 1, got {probs.sum()!r}")

    def prob(self, mark: int) -> float:
        return float(self.probs[mark - 1])


@dataclass(frozen=True)
class ExcitationState:
    """Per-source-mark decayed excitation sums R_r = sum exp(-beta (t - t_j)).

    A fresh state has last_time = -inf so that any first event is accepted;
    decaying zero sums leaves them zero, which reproduces the empty history.
    """

    decayed_sums: np.ndarray
    last_time: float

    def __post_init__(self):
        sums = np.asarray(self.decayed_sums, dtype=float)
        object.__setattr__(self, "decayed_sums", sums)
        if np.any(sums < 0.0):
            raise ValueError("decayed sums must be >= 0")

    @classmethod
    def fresh(cls, mark_count: int) -> "ExcitationState":
        return cls(np.zeros(mark_count), -math.inf)


def stream_update(state: ExcitationState, time: float, mark: int, beta: float) -> ExcitationState:
    """Fold one observed event into the excitation state.

    Decays every per-mark sum to the new time, then adds the unit
    contribution of the new event to its source mark's sum.
    """
    if time <= state.last_time:
        raise ValueError(f"event time {time} is not after state time {state.last_time}")
    decay = math.exp(-beta * (time - state.last_time)) if math.isfinite(state.last_time) else 0.0
    sums = state.decayed_sums * decay
    sums[mark - 1] += 1.0
    return ExcitationState(sums, time)


def mark_probability_bruteforce(
    prefix_times, prefix_marks, time: float, covariate: int, params: MarkModelParams
) -> MarkDistribution:
    """Evaluate the mark distribution by direct summation over the history.

    O(history length) per call; this is the reference implementation the
    streaming route is tested against.
    """
    prefix_times = np.asarray(prefix_times, dtype=float)
    prefix_marks = np.asarray(prefix_marks, dtype=np.int64)
    if len(prefix_times) and time <= prefix_times[-1]:
        raise ValueError(f"time {time} is not after the last history event {prefix_times[-1]}")
    z = covariate - 1
    numer = params.delta[z].copy()
    for t_j, m_j in zip(prefix_times, prefix_marks):
        w = params.alpha_star * math.exp(-params.beta * (time - t_j))
        numer = numer + w * params.gamma[z, m_j - 1]
    return MarkDistribution(numer / numer.sum())


def mark_probability_stream(
    state: ExcitationState, time: float, covariate: int, params: MarkModelParams
) -> MarkDistribution:
    """Evaluate the mark distribution from the streaming excitation state."""
    if time <= state.last_time:
        raise ValueError(f"time {time} is not after state time {state.last_time}")
    decay = math.exp(-params.beta * (time - state.last_time)) if math.isfinite(state.last_time) else 0.0
    decayed = state.decayed_sums * decay
    z = covariate - 1
    numer = params.delta[z] + params.alpha_star * (decayed @ params.gamma[z])
    return MarkDistribution(numer / numer.sum())


def score_sequence(
    sequence: EventSequence, params: MarkModelParams, history: str = "ground-truth-feedback"
) -> list[ScoredEvent]:
    """Score every event with its predicted rare-class (mark 2) probability.

    Event i is scored using the true marks of all earlier events; this is the
    only supported history mode (predicted-feedback scoring is deliberately
    not implemented). Deterministic, one O(M) state update per event.
    """
    if history != "ground-truth-feedback":
        raise ValueError(f"unsupported history mode {history!r}")
    if params.mark_count != sequence.mark_count:
        raise ValueError("params and sequence disagree on the number of marks")
    if params.covariate_count < sequence.covariate_count:
        raise ValueError("params cover fewer covariates than the sequence uses")
    state = ExcitationState.fresh(params.mark_count)
    scored = []
    for i in range(len(sequence)):
        t = float(sequence.times[i])
        m = int(sequence.marks[i])
        z = int(sequence.covariates[i])
        dist = mark_probability_stream(state, t, z, params)
        scored.append(
            ScoredEvent(
                score=dist.prob(2),
                label=1 if m == 2 else 0,
                index=i,
                time=t,
                covariate=z,
                mark=m,
            )
        )
        state = stream_update(state, t, m, params.beta)
    return scored
