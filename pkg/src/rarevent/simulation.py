"""Point-process simulators and the inter-arrival CDF diagnostic.

Poisson draws use iid exponential gaps. Self-exciting draws use Ogata-style
thinning: between accepted events the intensity only decays, so the intensity
evaluated at the current location is a valid upper bound for proposing the
next candidate. All simulators are deterministic per seed.

The marked simulator draws event times from the ground intensity
mu + sum alpha beta e^{-beta (t - t_j)}, then a covariate (iid categorical),
then a mark from the history-dependent mark distribution with
alpha_star = alpha beta / mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import FitResult, PoissonFit
from .events import EventSequence, MarkModelParams, UnmarkedHawkesParams
from .markmodel import ExcitationState, mark_probability_stream, stream_update

MAX_EVENTS = 10_000_000


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate_poisson(rate: float, horizon: float, seed) -> np.ndarray:
    """Homogeneous Poisson event times on [0, horizon)."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    rng = _as_rng(seed)
    if rate == 0.0:
        return np.empty(0)
    pieces = []
    t = 0.0
    block = max(int(rate * horizon * 1.1) + 16, 64)
    while True:
        cum = t + np.cumsum(rng.exponential(1.0 / rate, size=block))
        inside = cum < horizon
        pieces.append(cum[inside])
        if not bool(inside.all()):
            return np.concatenate(pieces)
        t = cum[-1]
        block = 64


def simulate_hawkes_unmarked(
    params: UnmarkedHawkesParams, horizon: float, seed, max_events: int = MAX_EVENTS
) -> np.ndarray:
    """Exponential-kernel self-exciting event times on [0, horizon) by thinning."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    rng = _as_rng(seed)
    mu, alpha, beta = params.mu, params.alpha, params.beta
    excite = 0.0  # alpha beta sum e^{-beta (t - t_j)} at the current location
    t = 0.0
    times = []
    while True:
        lam_bar = mu + excite
        gap = rng.exponential(1.0 / lam_bar)
        if t + gap >= horizon:
            return np.asarray(times)
        t += gap
        excite *= math.exp(-beta * gap)
        if rng.random() * lam_bar <= mu + excite:
            times.append(t)
            excite += alpha * beta
            if len(times) > max_events:
                raise RuntimeError(
                    f"simulation exceeded {max_events} events; intensity runaway"
                )


@dataclass(frozen=True)
class SimConfig:
    """Generator settings for the marked simulator.

    covariate_probs is the iid categorical distribution of covariates 1..Z;
    its length must match the rows of delta/gamma.
    """

    horizon: float
    seed: int
    mu: float
    alpha: float
    beta: float
    delta: np.ndarray
    gamma: np.ndarray
    covariate_probs: np.ndarray | None = None
    max_events: int = MAX_EVENTS

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        UnmarkedHawkesParams(self.mu, self.alpha, self.beta)  # validates ranges
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        probs = self.covariate_probs
        if probs is None:
            probs = np.full(self.delta.shape[0], 1.0 / self.delta.shape[0])
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (self.delta.shape[0],):
            raise ValueError("covariate_probs length must match delta rows")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("covariate_probs must be a probability vector")
        object.__setattr__(self, "covariate_probs", probs)
        self.mark_params()  # validates delta/gamma as simplex rows

    def mark_params(self) -> MarkModelParams:
        """Mark-side parameters implied by the generator: alpha* = alpha beta / mu."""
        return MarkModelParams(
            self.alpha * self.beta / self.mu, self.beta, self.delta, self.gamma
        )


def _draw_categorical(rng, cum_probs) -> int:
    """Inverse-CDF draw returning a 1-based category index."""
    return int(np.searchsorted(cum_probs, rng.random(), side="right")) + 1


def simulate_marked_hawkes(config: SimConfig) -> EventSequence:
    """Marked self-exciting stream: thinned times, then covariate, then mark."""
    rng = _as_rng(config.seed)
    mark_params = config.mark_params()
    M = mark_params.mark_count
    mu, alpha, beta = config.mu, config.alpha, config.beta
    cov_cum = np.cumsum(config.covariate_probs)
    state = ExcitationState.fresh(M)
    excite = 0.0
    t = 0.0
    times, marks, covs = [], [], []
    while True:
        lam_bar = mu + excite
        gap = rng.exponential(1.0 / lam_bar)
        if t + gap >= config.horizon:
            break
        t += gap
        excite *= math.exp(-beta * gap)
        if rng.random() * lam_bar <= mu + excite:
            z = _draw_categorical(rng, cov_cum)
            dist = mark_probability_stream(state, t, z, mark_params)
            m = _draw_categorical(rng, np.cumsum(dist.probs))
            state = stream_update(state, t, m, beta)
            excite += alpha * beta
            times.append(t)
            marks.append(m)
            covs.append(z)
            if len(times) > config.max_events:
                raise RuntimeError(
                    f"simulation exceeded {config.max_events} events; intensity runaway"
                )
    return EventSequence(
        times=np.asarray(times),
        marks=np.asarray(marks, dtype=np.int64),
        covariates=np.asarray(covs, dtype=np.int64),
        horizon=float(config.horizon),
        mark_count=M,
        covariate_count=len(config.covariate_probs),
    )


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step CDF of a sample; callable at scalar or array points."""

    sample: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.sample, dtype=float)
        if values.size == 0:
            raise ValueError("empirical CDF needs a non-empty sample")
        object.__setattr__(self, "sample", np.sort(values))

    def __call__(self, q):
        frac = np.searchsorted(self.sample, q, side="right") / len(self.sample)
        return float(frac) if np.isscalar(q) else frac

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted unique support values with their cumulative fractions."""
        xs = np.unique(self.sample)
        return xs, self(xs)


def empirical_cdf(values) -> EmpiricalCdf:
    return EmpiricalCdf(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class CdfComparison:
    """Inter-arrival CDFs of observed data vs fitted Poisson and Hawkes models.

    All three are evaluated on the shared grid of observed inter-arrivals.
    The Hawkes column is Monte Carlo: the pooled inter-arrivals of n_sim
    simulated horizons of the fitted model.
    """

    grid: np.ndarray
    observed: np.ndarray
    poisson: np.ndarray
    hawkes: np.ndarray
    n_sim: int

    def sup_distances(self) -> dict:
        return {
            "poisson": float(np.max(np.abs(self.observed - self.poisson))),
            "hawkes": float(np.max(np.abs(self.observed - self.hawkes))),
        }


def cdf_comparison(
    times,
    poisson_fit: PoissonFit,
    hawkes_fit: FitResult,
    n_sim: int = 100,
    seed: int = 0,
) -> CdfComparison:
    """Fig-style goodness-of-fit table for the two fitted time models."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise ValueError("need at least 2 events to form inter-arrivals")
    gaps = np.diff(times)
    grid = np.sort(gaps)
    observed = empirical_cdf(gaps)(grid)
    poisson = 1.0 - np.exp(-poisson_fit.rate * grid)
    rng = np.random.default_rng(seed)
    pooled = []
    for _ in range(n_sim):
        sim = simulate_hawkes_unmarked(hawkes_fit.params, poisson_fit.horizon, rng)
        if len(sim) >= 2:
            pooled.append(np.diff(sim))
    if not pooled:
        raise ValueError("fitted model produced no inter-arrivals in n_sim runs")
    hawkes = empirical_cdf(np.concatenate(pooled))(grid)
    return CdfComparison(grid, observed, poisson, hawkes, n_sim)
