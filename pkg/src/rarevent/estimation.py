"""Maximum-likelihood fitting with observed-information confidence intervals.

Three fitters live here:

- `fit_mark_model`: the history-dependent mark classifier. The likelihood is
  the sum of log mark probabilities of the observed marks; event times are
  conditioned on, not modelled.
- `fit_unmarked_hawkes`: exact exponential-kernel likelihood of the ground
  process (times only).
- `fit_poisson`: closed form.

Optimization runs on a fully unconstrained vector (log for positive
parameters, multinomial logit with the last category as reference for each
probability row), which avoids constrained solvers and makes Wald intervals
well defined. Standard errors come from the observed information (negative
Hessian of the log-likelihood at the MLE, computed by central finite
differences of the analytic gradient) and are mapped back to the natural
scale through each parameter's own log or logit transform, so intervals
respect positivity and [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .errors import DataError
from .events import EventSequence, MarkModelParams, UnmarkedHawkesParams

Z95 = 1.959963984540054  # two-sided 95% normal quantile
BOUNDARY_EPS = 1e-8  # simplex entries this close to 0/1 get degenerate CIs
HESSIAN_STEP = 1e-4


# ---------------------------------------------------------------------------
# likelihood kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _mark_loglik_grad(times, marks0, covs0, alpha_star, beta, delta, gamma):
    """Log-likelihood of observed marks plus its natural-parameter gradient.

    Streams over events once, carrying per-source-mark decayed sums R and
    their time-weighted counterparts Q (needed for d/d beta). Returns
    (ll, d_alpha_star, d_beta, d_delta, d_gamma); ll is -inf when some
    observed mark has zero probability, in which case the gradient slots
    are meaningless.
    """
    n = times.shape[0]
    Z, M = delta.shape
    R = np.zeros(M)
    Q = np.zeros(M)
    d_delta = np.zeros((Z, M))
    d_gamma = np.zeros((Z, M, M))
    ll = 0.0
    d_alpha = 0.0
    d_beta = 0.0
    last_t = 0.0
    for i in range(n):
        t = times[i]
        m = marks0[i]
        z = covs0[i]
        if i > 0:
            dt = t - last_t
            decay = np.exp(-beta * dt)
            for r in range(M):
                Q[r] = decay * (Q[r] + dt * R[r])
                R[r] = decay * R[r]
        s_m = 0.0   # excitation routed to the observed mark
        q_m = 0.0   # its time-weighted version
        e_tot = 0.0
        w_tot = 0.0
        for r in range(M):
            s_m += R[r] * gamma[z, r, m]
            q_m += Q[r] * gamma[z, r, m]
            e_tot += R[r]
            w_tot += Q[r]
        numer = delta[z, m] + alpha_star * s_m
        denom = 1.0 + alpha_star * e_tot
        if numer <= 0.0:
            return -np.inf, 0.0, 0.0, d_delta, d_gamma
        ll += np.log(numer) - np.log(denom)
        d_alpha += s_m / numer - e_tot / denom
        d_beta += alpha_star * (w_tot / denom - q_m / numer)
        d_delta[z, m] += 1.0 / numer
        for c in range(M):
            d_delta[z, c] -= 1.0 / denom
        for r in range(M):
            ar = alpha_star * R[r]
            if ar != 0.0:
                d_gamma[z, r, m] += ar / numer
                for c in range(M):
                    d_gamma[z, r, c] -= ar / denom
        R[m] += 1.0
        last_t = t
    return ll, d_alpha, d_beta, d_delta, d_gamma


@njit(cache=True)
def _hawkes_loglik_grad(times, horizon, mu, alpha, beta):
    """Exact exponential-kernel Hawkes log-likelihood and gradient.

    ll = sum_i log(mu + alpha beta A_i) - mu T - alpha sum_i (1 - e^{-beta (T - t_i)})
    with A_i = e^{-beta dt_i} (1 + A_{i-1}), A_1 = 0.
    """
    n = times.shape[0]
    ll = -mu * horizon
    d_mu = -horizon
    d_alpha = 0.0
    d_beta = 0.0
    a_prev = 0.0  # decayed event count just before t_i
    b_prev = 0.0  # its time-weighted version
    for i in range(n):
        if i > 0:
            dt = times[i] - times[i - 1]
            decay = np.exp(-beta * dt)
            b_prev = decay * (b_prev + dt * (1.0 + a_prev))
            a_prev = decay * (1.0 + a_prev)
        lam = mu + alpha * beta * a_prev
        ll += np.log(lam)
        d_mu += 1.0 / lam
        d_alpha += beta * a_prev / lam
        d_beta += alpha * (a_prev - beta * b_prev) / lam
        tail = horizon - times[i]
        e_tail = np.exp(-beta * tail)
        ll -= alpha * (1.0 - e_tail)
        d_alpha -= 1.0 - e_tail
        d_beta -= alpha * tail * e_tail
    return ll, d_mu, d_alpha, d_beta


def mark_log_likelihood(sequence: EventSequence, params: MarkModelParams) -> float:
    """Sum of log probabilities of the observed marks; -inf if any is zero."""
    if params.mark_count != sequence.mark_count:
        raise ValueError("params and sequence disagree on the number of marks")
    if params.covariate_count < sequence.covariate_count:
        raise ValueError("params cover fewer covariates than the sequence uses")
    ll, *_ = _mark_loglik_grad(
        sequence.times,
        (sequence.marks - 1).astype(np.int64),
        (sequence.covariates - 1).astype(np.int64),
        float(params.alpha_star),
        float(params.beta),
        params.delta,
        params.gamma,
    )
    return float(ll)


def unmarked_hawkes_log_likelihood(times, horizon: float, params: UnmarkedHawkesParams) -> float:
    times = np.asarray(times, dtype=float)
    ll, *_ = _hawkes_loglik_grad(times, float(horizon), params.mu, params.alpha, params.beta)
    return float(ll)


# ---------------------------------------------------------------------------
# reparametrization
# ---------------------------------------------------------------------------

def simplex_to_logits(row) -> np.ndarray:
    """Map a probability row to M-1 logits against the last category."""
    row = np.asarray(row, dtype=float)
    return np.log(row[:-1]) - math.log(row[-1])


def logits_to_simplex(logits) -> np.ndarray:
    """Inverse of simplex_to_logits (softmax with the reference logit at 0)."""
    u = np.concatenate([np.asarray(logits, dtype=float), [0.0]])
    u = u - u.max()  # shift-invariant, avoids overflow
    e = np.exp(u)
    return e / e.sum()


def _row_logit_gradient(row_grad, probs) -> np.ndarray:
    """Chain natural-scale gradients of one probability row onto its logits."""
    avg = float(np.dot(probs, row_grad))
    return (probs * (row_grad - avg))[:-1]


class MarkParamTransform:
    """Bijection between MarkModelParams and an unconstrained vector.

    Layout: [log alpha_star, log beta, delta logits (Z rows), gamma logits
    (Z*M rows)], each probability row contributing M-1 entries.
    """

    def __init__(self, covariate_count: int, mark_count: int):
        self.Z = covariate_count
        self.M = mark_count
        self.n_free = 2 + covariate_count * (mark_count - 1) * (1 + mark_count)

    def to_vector(self, params: MarkModelParams) -> np.ndarray:
        Z, M = self.Z, self.M
        x = np.empty(self.n_free)
        x[0] = math.log(params.alpha_star)
        x[1] = math.log(params.beta)
        w = M - 1
        pos = 2
        for z in range(Z):
            x[pos : pos + w] = simplex_to_logits(params.delta[z])
            pos += w
        for z in range(Z):
            for r in range(M):
                x[pos : pos + w] = simplex_to_logits(params.gamma[z, r])
                pos += w
        return x

    def from_vector(self, x) -> MarkModelParams:
        Z, M = self.Z, self.M
        x = np.asarray(x, dtype=float)
        w = M - 1
        delta = np.empty((Z, M))
        gamma = np.empty((Z, M, M))
        pos = 2
        for z in range(Z):
            delta[z] = logits_to_simplex(x[pos : pos + w])
            pos += w
        for z in range(Z):
            for r in range(M):
                gamma[z, r] = logits_to_simplex(x[pos : pos + w])
                pos += w
        return MarkModelParams(math.exp(x[0]), math.exp(x[1]), delta, gamma)

    def chain_gradient(self, params, d_alpha, d_beta, d_delta, d_gamma) -> np.ndarray:
        """Map a natural-parameter gradient to the unconstrained vector."""
        Z, M = self.Z, self.M
        g = np.empty(self.n_free)
        g[0] = params.alpha_star * d_alpha
        g[1] = params.beta * d_beta
        w = M - 1
        pos = 2
        for z in range(Z):
            g[pos : pos + w] = _row_logit_gradient(d_delta[z], params.delta[z])
            pos += w
        for z in range(Z):
            for r in range(M):
                g[pos : pos + w] = _row_logit_gradient(d_gamma[z, r], params.gamma[z, r])
                pos += w
        return g

    def parameter_names(self) -> list[str]:
        Z, M = self.Z, self.M
        names = ["alpha_star", "beta"]
        names += [f"delta[{m}|{z}]" for z in range(1, Z + 1) for m in range(1, M + 1)]
        names += [
            f"gamma[{r}->{c}|{z}]"
            for z in range(1, Z + 1)
            for r in range(1, M + 1)
            for c in range(1, M + 1)
        ]
        return names

    def natural_values(self, params: MarkModelParams) -> np.ndarray:
        return np.concatenate(
            [[params.alpha_star, params.beta], params.delta.ravel(), params.gamma.ravel()]
        )

    def interval_specs(self, x):
        """Per natural parameter: (value, eta, d eta/dx, inverse scale map).

        eta is the parameter's own unconstrained scale: log for positive
        parameters, logit for probabilities. The jacobian row is over the
        full free vector.
        """
        params = self.from_vector(x)
        Z, M = self.Z, self.M
        w = M - 1
        specs = []
        for k, value in ((0, params.alpha_star), (1, params.beta)):
            jac = np.zeros(self.n_free)
            jac[k] = 1.0
            specs.append((value, math.log(value), jac, _safe_exp))
        rows = [(2 + z * w, params.delta[z]) for z in range(Z)]
        rows += [
            (2 + Z * w + (z * M + r) * w, params.gamma[z, r])
            for z in range(Z)
            for r in range(M)
        ]
        for offset, probs in rows:
            for c in range(M):
                p = float(probs[c])
                jac = np.zeros(self.n_free)
                if BOUNDARY_EPS < p < 1.0 - BOUNDARY_EPS:
                    # d logit(p_c) / d u_k = (1{c=k} - p_k) / (1 - p_c)
                    row_jac = -probs[:-1] / (1.0 - p)
                    if c < w:
                        row_jac[c] += 1.0 / (1.0 - p)
                    jac[offset : offset + w] = row_jac
                    eta = math.log(p / (1.0 - p))
                else:
                    eta = math.nan  # boundary: degenerate interval
                specs.append((p, eta, jac, _sigmoid))
        return specs


class HawkesParamTransform:
    """(mu, alpha, beta) <-> [log mu, logit alpha, log beta]."""

    n_free = 3

    def to_vector(self, params: UnmarkedHawkesParams) -> np.ndarray:
        return np.array(
            [
                math.log(params.mu),
                math.log(params.alpha / (1.0 - params.alpha)),
                math.log(params.beta),
            ]
        )

    def from_vector(self, x) -> UnmarkedHawkesParams:
        return UnmarkedHawkesParams(math.exp(x[0]), _sigmoid(x[1]), math.exp(x[2]))

    def chain_gradient(self, params, d_mu, d_alpha, d_beta) -> np.ndarray:
        return np.array(
            [
                params.mu * d_mu,
                params.alpha * (1.0 - params.alpha) * d_alpha,
                params.beta * d_beta,
            ]
        )

    def parameter_names(self) -> list[str]:
        return ["mu", "alpha", "beta"]

    def natural_values(self, params) -> np.ndarray:
        return np.array([params.mu, params.alpha, params.beta])

    def interval_specs(self, x):
        params = self.from_vector(x)
        e0, e1, e2 = np.eye(3)
        a = params.alpha
        if BOUNDARY_EPS < a < 1.0 - BOUNDARY_EPS:
            alpha_spec = (a, math.log(a / (1.0 - a)), e1, _sigmoid)
        else:
            alpha_spec = (a, math.nan, e1, _sigmoid)
        return [
            (params.mu, math.log(params.mu), e0, _safe_exp),
            alpha_spec,
            (params.beta, math.log(params.beta), e2, _safe_exp),
        ]


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _safe_exp(x: float) -> float:
    """exp that saturates instead of raising; huge SEs give an infinite bound."""
    return math.exp(x) if x < 709.0 else math.inf


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 500
    gradient_tol: float = 1e-6
    ll_rel_tol: float = 1e-10
    restarts: int = 3
    jitter: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class FitResult:
    """MLE output: point estimates, covariance, per-parameter 95% intervals."""

    params: object
    log_likelihood: float
    free_vector: np.ndarray
    covariance: np.ndarray
    ci95: dict
    boundary_parameters: tuple
    converged: bool
    iterations: int
    covariance_is_pseudo_inverse: bool
    n_events: int
    seed: int


def numerical_gradient(objective, point, rel_step: float = 1e-5) -> np.ndarray:
    """Central finite differences with per-coordinate step rel_step*max(1, |x_k|)."""
    point = np.asarray(point, dtype=float)
    grad = np.empty_like(point)
    for k in range(len(point)):
        h = rel_step * max(1.0, abs(point[k]))
        up = point.copy()
        up[k] += h
        down = point.copy()
        down[k] -= h
        f_up, f_down = objective(up), objective(down)
        if not (math.isfinite(f_up) and math.isfinite(f_down)):
            raise ValueError(f"objective is not finite near coordinate {k}")
        grad[k] = (f_up - f_down) / (2.0 * h)
    return grad


def _wald_intervals(transform, x, covariance):
    """Map unconstrained Wald intervals to the natural scale, flagging boundaries."""
    names = transform.parameter_names()
    ci = {}
    boundary = []
    for name, (value, eta, jac, inv) in zip(names, transform.interval_specs(x)):
        if math.isnan(eta):
            ci[name] = (value, value)
            boundary.append(name)
            continue
        var = float(jac @ covariance @ jac)
        se = math.sqrt(max(var, 0.0))
        ci[name] = (inv(eta - Z95 * se), inv(eta + Z95 * se))
    return ci, tuple(boundary)


def confidence_intervals(fit: FitResult, transform) -> dict:
    """Recompute the per-parameter 95% intervals of a fit."""
    ci, _ = _wald_intervals(transform, fit.free_vector, fit.covariance)
    return ci


def _fd_hessian(grad_fn, x, step: float = HESSIAN_STEP) -> np.ndarray:
    """Central finite differences of a gradient; symmetrized."""
    n = len(x)
    H = np.empty((n, n))
    for k in range(n):
        up = x.copy()
        up[k] += step
        down = x.copy()
        down[k] -= step
        H[:, k] = (grad_fn(up) - grad_fn(down)) / (2.0 * step)
    return 0.5 * (H + H.T)


def _invert_information(H):
    """Invert the observed information; fall back to pseudo-inverse."""
    try:
        cov = np.linalg.inv(H)
        if np.all(np.isfinite(cov)):
            return cov, False
    except np.linalg.LinAlgError:
        pass
    return np.linalg.pinv(H), True


def _maximize(value_and_grad, starts, config):
    """L-BFGS-B ascent from several starting points; keep the best optimum.

    Line searches may probe coordinates so extreme that the parameter
    transform overflows or lands on a range boundary; those points get a
    huge objective value so the search backtracks.
    """

    def objective(x):
        try:
            ll, grad = value_and_grad(x)
        except (ValueError, OverflowError):
            return 1e15, np.zeros_like(x)
        if not math.isfinite(ll):
            return 1e15, np.zeros_like(x)
        return -ll, -grad

    best = None
    for x0 in starts:
        res = minimize(
            objective,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": config.max_iter,
                "ftol": config.ll_rel_tol,
                "gtol": config.gradient_tol,
            },
        )
        if best is None or res.fun < best.fun:
            best = res
    return best


def _jittered_starts(x0, config):
    rng = np.random.default_rng(config.seed)
    starts = [x0]
    for _ in range(max(config.restarts, 1) - 1):
        starts.append(x0 + rng.normal(0.0, config.jitter, size=len(x0)))
    return starts


def empirical_mark_model(sequence: EventSequence) -> MarkModelParams:
    """History-free benchmark: per-covariate empirical mark frequencies, no excitation."""
    Z, M = sequence.covariate_count, sequence.mark_count
    delta = np.empty((Z, M))
    for z in range(Z):
        sel = sequence.covariates == z + 1
        n_z = int(np.sum(sel))
        if n_z == 0:
            delta[z] = 1.0 / M
        else:
            counts = np.bincount(sequence.marks[sel] - 1, minlength=M)
            delta[z] = counts / n_z
    gamma = np.broadcast_to(delta[:, None, :], (Z, M, M)).copy()
    return MarkModelParams(0.0, 1.0, delta, gamma)


def _initial_mark_params(sequence) -> MarkModelParams:
    """Interior starting point: clipped empirical frequencies, alpha*=1, beta=0.1."""
    Z, M = sequence.covariate_count, sequence.mark_count
    emp = empirical_mark_model(sequence)
    delta = np.clip(emp.delta, 1e-3, None)
    delta /= delta.sum(axis=1, keepdims=True)
    overall = np.bincount(sequence.marks - 1, minlength=M) / len(sequence)
    row = np.clip(overall, 1e-3, None)
    row /= row.sum()
    gamma = np.broadcast_to(row, (Z, M, M)).copy()
    return MarkModelParams(1.0, 0.1, delta, gamma)


def fit_mark_model(sequence: EventSequence, config: OptimizerConfig | None = None) -> FitResult:
    """Maximum-likelihood fit of the mark classifier on a training sequence."""
    config = config or OptimizerConfig()
    M = sequence.mark_count
    counts = np.bincount(sequence.marks - 1, minlength=M)
    if np.any(counts < 2):
        short = int(np.argmin(counts)) + 1
        raise DataError(
            f"need at least 2 events of every mark to fit; mark {short} has {counts[short - 1]}"
        )
    transform = MarkParamTransform(sequence.covariate_count, M)
    times = sequence.times
    marks0 = (sequence.marks - 1).astype(np.int64)
    covs0 = (sequence.covariates - 1).astype(np.int64)

    def value_and_grad(x):
        params = transform.from_vector(x)
        ll, d_a, d_b, d_d, d_g = _mark_loglik_grad(
            times, marks0, covs0, params.alpha_star, params.beta, params.delta, params.gamma
        )
        if not math.isfinite(ll):
            return ll, np.zeros_like(x)
        return ll, transform.chain_gradient(params, d_a, d_b, d_d, d_g)

    x0 = transform.to_vector(_initial_mark_params(sequence))
    res = _maximize(value_and_grad, _jittered_starts(x0, config), config)
    x_hat = res.x
    H = _fd_hessian(lambda x: -value_and_grad(x)[1], x_hat)
    cov, pseudo = _invert_information(H)
    ci, boundary = _wald_intervals(transform, x_hat, cov)
    return FitResult(
        params=transform.from_vector(x_hat),
        log_likelihood=-float(res.fun),
        free_vector=x_hat,
        covariance=cov,
        ci95=ci,
        boundary_parameters=boundary,
        converged=bool(res.success),
        iterations=int(res.nit),
        covariance_is_pseudo_inverse=pseudo,
        n_events=len(sequence),
        seed=config.seed,
    )


def fit_unmarked_hawkes(times, horizon: float, config: OptimizerConfig | None = None) -> FitResult:
    """Maximum-likelihood fit of (mu, alpha, beta) from event times alone."""
    config = config or OptimizerConfig(jitter=0.3)
    times = np.asarray(times, dtype=float)
    n = len(times)
    if n < 10:
        raise DataError(f"need at least 10 events to fit a self-exciting model, got {n}")
    if horizon < times[-1]:
        raise ValueError("horizon is before the last event")
    transform = HawkesParamTransform()

    def value_and_grad(x):
        params = transform.from_vector(x)
        ll, d_mu, d_alpha, d_beta = _hawkes_loglik_grad(
            times, float(horizon), params.mu, params.alpha, params.beta
        )
        if not math.isfinite(ll):
            return ll, np.zeros_like(x)
        return ll, transform.chain_gradient(params, d_mu, d_alpha, d_beta)

    mean_gap = (times[-1] - times[0]) / max(n - 1, 1)
    start = UnmarkedHawkesParams(mu=0.5 * n / horizon, alpha=0.5, beta=1.0 / mean_gap)
    x0 = transform.to_vector(start)
    res = _maximize(value_and_grad, _jittered_starts(x0, config), config)
    x_hat = res.x
    H = _fd_hessian(lambda x: -value_and_grad(x)[1], x_hat)
    cov, pseudo = _invert_information(H)
    ci, boundary = _wald_intervals(transform, x_hat, cov)
    return FitResult(
        params=transform.from_vector(x_hat),
        log_likelihood=-float(res.fun),
        free_vector=x_hat,
        covariance=cov,
        ci95=ci,
        boundary_parameters=boundary,
        converged=bool(res.success),
        iterations=int(res.nit),
        covariance_is_pseudo_inverse=pseudo,
        n_events=n,
        seed=config.seed,
    )


@dataclass(frozen=True)
class PoissonFit:
    rate: float
    ci95: tuple
    n_events: int
    horizon: float


def fit_poisson(times, horizon: float) -> PoissonFit:
    """Closed-form homogeneous Poisson MLE: rate n/T with a normal interval."""
    if horizon <= 0.0:
        raise ValueError("horizon must be > 0")
    n = len(times)
    rate = n / horizon
    se = math.sqrt(n) / horizon
    return PoissonFit(rate, (rate - Z95 * se, rate + Z95 * se), n, float(horizon))
