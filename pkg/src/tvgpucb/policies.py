"""Sequential UCB policies for time-varying objectives.

Seven variants share one stepping surface: the plain heteroscedastic GP-UCB,
the sparse re-query policy (fresh expert data every step), its windowed
version (expert bursts only at window starts), and four configured baselines
(restart, sliding-window, time-forgetting kernel, weighted kernel). A step
runs at the start of a round: it folds in the previous round's observation,
optionally refreshes expert data at the current time, and returns the point
to play now.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from tvgpucb import dpp
from tvgpucb.environments import expert_query
from tvgpucb.gp import (
    Dataset,
    KernelSpec,
    Posterior,
    as_points,
    cross_kernel_matrix,
    fit_posterior,
    kernel_matrix,
    logdet_ratio,
    posterior_eval_batch,
)


class Variant(str, Enum):
    GP_UCB = "GP_UCB"
    SPARQ = "SPARQ"
    W_SPARQ = "W_SPARQ"
    R_GP_UCB = "R_GP_UCB"
    SW_GP_UCB = "SW_GP_UCB"
    TV_GP_UCB = "TV_GP_UCB"
    W_GP_UCB = "W_GP_UCB"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    variant: Variant
    delta: float = 0.1
    rkhs_bound: float = 5.0
    sigma_sq: float = 0.1
    alpha: float = 1.0
    alpha_tilde: float = 0.25
    budget_c: float = 1.0
    variant_params: dict = field(default_factory=dict)
    dpp_mcmc_steps: Optional[int] = None  # None -> default_mcmc_steps(n)
    dpp_exact_max: int = dpp.EXACT_MAX_N

    def __post_init__(self) -> None:
        if not 0 < self.delta <= 1:
            raise ConfigError("delta must lie in (0, 1]")
        if self.rkhs_bound <= 0 or self.sigma_sq <= 0 or self.budget_c <= 0:
            raise ConfigError("rkhs_bound, sigma_sq and budget_c must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.variant == Variant.W_SPARQ and not 0 <= self.alpha_tilde < 1 / 3:
            raise ConfigError("alpha_tilde must lie in [0, 1/3) for the windowed variant")
        if self.variant in (Variant.R_GP_UCB, Variant.SW_GP_UCB):
            if int(self.variant_params.get("window", 0)) < 1:
                raise ConfigError(f"{self.variant.value} needs a positive window length")
        if self.variant == Variant.TV_GP_UCB:
            if not 0 <= float(self.variant_params.get("forgetting", 0.0)) <= 1:
                raise ConfigError("forgetting must lie in [0, 1]")
        if self.variant == Variant.W_GP_UCB:
            if not 0 < float(self.variant_params.get("weight_decay", 1.0)) <= 1:
                raise ConfigError("weight_decay must lie in (0, 1]")


@dataclass(frozen=True)
class WindowPlan:
    starts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("window starts must be strictly increasing")


def plan_windows(alpha: float, alpha_tilde: float, t_start: int, horizon: int) -> WindowPlan:
    """Greedy window construction: length_j = floor(t_j^(alpha_tilde/alpha)) + 1."""
    if alpha <= 0:
        raise ConfigError("alpha must be positive to plan windows")
    if not 0 <= alpha_tilde <= alpha:
        raise ConfigError("need 0 <= alpha_tilde <= alpha")
    if t_start < 1:
        raise ConfigError("t_start must be >= 1")
    ratio = alpha_tilde / alpha
    starts: list[int] = []
    t = t_start
    while t <= horizon:
        starts.append(t)
        t += math.floor(t**ratio) + 1
    return WindowPlan(tuple(starts))


@dataclass
class PolicyState:
    """Per-run bookkeeping; one instance per run, never shared."""

    t: int
    regression_data: Dataset
    sparse_data: Dataset
    all_inputs: np.ndarray  # (n, d), every algorithm-chosen input so far
    window_start: int
    window_end: int  # exclusive
    beta_history: list[float]
    queries_spent: int
    plan: Optional[WindowPlan] = None
    last_posterior: Optional[Posterior] = None


def initial_state(spec: KernelSpec, config: PolicyConfig, horizon: Optional[int] = None) -> PolicyState:
    plan = None
    window_start = 1
    window_end = 2
    if config.variant == Variant.W_SPARQ:
        if horizon is None:
            raise ConfigError("the windowed variant needs a horizon to plan windows")
        plan = plan_windows(config.alpha, config.alpha_tilde, 1, horizon)
    return PolicyState(
        t=0,
        regression_data=Dataset.empty(spec.dim),
        sparse_data=Dataset.empty(spec.dim),
        all_inputs=np.empty((0, spec.dim)),
        window_start=window_start,
        window_end=window_end,
        beta_history=[],
        queries_spent=0,
        plan=plan,
    )


def beta_schedule(post: Posterior, delta: float, B: float) -> float:
    """Confidence width sqrt(2 (log(2/delta) + logdet_ratio/2)) + B."""
    if not 0 < delta <= 1:
        raise ConfigError("delta must lie in (0, 1]")
    return math.sqrt(2.0 * (math.log(2.0 / delta) + 0.5 * logdet_ratio(post))) + B


def ucb_select(post: Posterior, beta: float, candidates) -> tuple[np.ndarray, int]:
    """Argmax of mean + beta * std over the candidates; lowest index on ties."""
    P = as_points(candidates, post.kernel.dim)
    if P.shape[0] == 0:
        raise ValueError("candidates must be non-empty")
    means, variances = posterior_eval_batch(post, P)
    scores = means + beta * np.sqrt(variances)
    idx = int(np.argmax(scores))
    return P[idx], idx


def assign_noise_vars(timestamps, now: int, alpha: float, sigma_sq: float) -> np.ndarray:
    """Drift-inflated variances sigma^2 (1 + gap^alpha); exactly sigma^2 at gap 0."""
    ts = np.asarray(timestamps, dtype=int)
    if ts.size and int(ts.max()) > now:
        raise ValueError("timestamps must not exceed the current step")
    gaps = (now - ts).astype(float)
    inflation = np.zeros_like(gaps)
    np.power(gaps, alpha, out=inflation, where=gaps > 0)
    return sigma_sq * (1.0 + inflation)


def _append_input(state: PolicyState, x: np.ndarray) -> np.ndarray:
    p = as_points(x, state.all_inputs.shape[1])
    return np.vstack([state.all_inputs, p]) if state.all_inputs.size else p


def _finish(
    state: PolicyState,
    post: Posterior,
    config: PolicyConfig,
    candidates,
) -> tuple[np.ndarray, PolicyState]:
    beta = beta_schedule(post, config.delta, config.rkhs_bound)
    x_next, _ = ucb_select(post, beta, candidates)
    state.beta_history.append(beta)
    state.last_posterior = post
    return x_next, state


def select_first(spec: KernelSpec, config: PolicyConfig, candidates) -> np.ndarray:
    """First action before any data: UCB on the prior (tie-break index 0)."""
    prior = fit_posterior(Dataset.empty(spec.dim), spec)
    beta = beta_schedule(prior, config.delta, config.rkhs_bound)
    x, _ = ucb_select(prior, beta, candidates)
    return x


def sample_sparse_subset(
    K: np.ndarray, M: int, config: PolicyConfig, rng: np.random.Generator
) -> dpp.DppSample:
    """Exact for small candidate sets, swap-chain otherwise, greedy on degeneracy."""
    n = K.shape[0]
    try:
        if n <= config.dpp_exact_max:
            return dpp.dpp_exact_sample(K, M, rng)
        steps = config.dpp_mcmc_steps or dpp.default_mcmc_steps(n)
        return dpp.dpp_mcmc_sample(K, M, steps, rng)
    except dpp.DegenerateKernelError:
        idx = dpp.greedy_max_residual(K, M)
        sign, logdet = np.linalg.slogdet(K[np.ix_(idx, idx)])
        return dpp.DppSample(tuple(idx), logdet if sign > 0 else -math.inf, 0)


def step_gp_ucb(
    state: PolicyState,
    x_prev,
    y_prev,
    spec: KernelSpec,
    config: PolicyConfig,
    candidates,
) -> tuple[np.ndarray, PolicyState]:
    """Heteroscedastic GP-UCB: refit full history with drift-inflated noise."""
    t = state.t + 1
    if x_prev is not None:
        state.regression_data = state.regression_data.extended(
            x_prev, y_prev, config.sigma_sq, t - 1
        )
        state.all_inputs = _append_input(state, x_prev)
    data = state.regression_data.with_noise_vars(
        assign_noise_vars(
            state.regression_data.timestamps, t, config.alpha, config.sigma_sq
        )
    ) if len(state.regression_data) else state.regression_data
    post = fit_posterior(data, spec)
    state.t = t
    state.regression_data = data
    return _finish(state, post, config, candidates)


def _expert_refresh(
    state: PolicyState,
    t: int,
    env,
    spec: KernelSpec,
    config: PolicyConfig,
    rng: np.random.Generator,
) -> Dataset:
    """DPP-select past inputs and re-query them at the current time."""
    n = state.all_inputs.shape[0]
    budget = dpp.query_budget(t, spec.dim, config.budget_c, available=n)
    K = kernel_matrix(state.all_inputs, spec)
    sample = sample_sparse_subset(K, budget, config, rng)
    Xs = state.all_inputs[list(sample.indices)]
    Ys = expert_query(env, Xs, t, rng)
    state.queries_spent += budget
    return Dataset(
        Xs, Ys, np.full(budget, config.sigma_sq), np.full(budget, t, dtype=int)
    )


def step_sparq(
    state: PolicyState,
    x_prev,
    y_prev,
    env,
    spec: KernelSpec,
    config: PolicyConfig,
    candidates,
    rng: np.random.Generator,
) -> tuple[np.ndarray, PolicyState]:
    """Sparse re-query policy: DPP subset of past inputs, fresh expert values."""
    t = state.t + 1
    if x_prev is not None:
        state.all_inputs = _append_input(state, x_prev)
    if state.all_inputs.shape[0] == 0:
        sparse = Dataset.empty(spec.dim)
    else:
        sparse = _expert_refresh(state, t, env, spec, config, rng)
    post = fit_posterior(sparse, spec)
    state.t = t
    state.sparse_data = sparse
    state.regression_data = sparse
    return _finish(state, post, config, candidates)


def step_w_sparq(
    state: PolicyState,
    x_prev,
    y_prev,
    env,
    spec: KernelSpec,
    config: PolicyConfig,
    candidates,
    rng: np.random.Generator,
) -> tuple[np.ndarray, PolicyState]:
    """Windowed sparse re-query: expert burst at window starts, bandit data inside."""
    t = state.t + 1
    if state.plan is None:
        raise ConfigError("windowed stepping requires a window plan")
    if x_prev is not None:
        state.all_inputs = _append_input(state, x_prev)
    if t in state.plan.starts:
        j = state.plan.starts.index(t)
        state.window_start = t
        state.window_end = (
            state.plan.starts[j + 1] if j + 1 < len(state.plan.starts) else t + 10**9
        )
        if state.all_inputs.shape[0] == 0:
            sparse = Dataset.empty(spec.dim)
        else:
            sparse = _expert_refresh(state, t, env, spec, config, rng)
        state.sparse_data = sparse
        state.regression_data = sparse
    elif x_prev is not None:
        state.regression_data = state.regression_data.extended(
            x_prev, y_prev, config.sigma_sq, t - 1
        )
    data = state.regression_data
    if len(data):
        data = data.with_noise_vars(
            assign_noise_vars(data.timestamps, t, config.alpha, config.sigma_sq)
        )
    state.regression_data = data
    post = fit_posterior(data, spec)
    state.t = t
    return _finish(state, post, config, candidates)


def _baseline_posterior(
    data: Dataset, spec: KernelSpec, config: PolicyConfig, now: int
) -> Posterior:
    """Fit the variant-specific transformed system; homoscedastic sigma^2 noise."""
    variant = config.variant
    if variant in (Variant.GP_UCB, Variant.R_GP_UCB, Variant.SW_GP_UCB):
        return fit_posterior(data, spec)
    if variant == Variant.TV_GP_UCB:
        eps = float(config.variant_params.get("forgetting", 0.0))
        if not 0 <= eps <= 1:
            raise ConfigError("forgetting must lie in [0, 1]")
        ts = data.timestamps.astype(float)
        K = kernel_matrix(data.inputs, spec)
        gram = K * np.power(1.0 - eps, np.abs(ts[:, None] - ts[None, :]) / 2.0)
        decay = np.power(1.0 - eps, (now - ts) / 2.0)

        def cross(P, _d=data, _decay=decay):
            return _decay[:, None] * cross_kernel_matrix(_d.inputs, P, spec)

        return fit_posterior(data, spec, gram=gram, cross_fn=cross,
                             prior_var_fn=lambda P: np.full(P.shape[0], spec.amplitude_sq))
    if variant == Variant.W_GP_UCB:
        w = float(config.variant_params.get("weight_decay", 1.0))
        if not 0 < w <= 1:
            raise ConfigError("weight_decay must lie in (0, 1]")
        ts = data.timestamps.astype(float)
        weights = np.power(w, (now - ts) / 2.0)
        K = kernel_matrix(data.inputs, spec)
        gram = np.outer(weights, weights) * K

        def cross(P, _d=data, _w=weights):
            return _w[:, None] * cross_kernel_matrix(_d.inputs, P, spec)

        return fit_posterior(data, spec, gram=gram, cross_fn=cross,
                             prior_var_fn=lambda P: np.full(P.shape[0], spec.amplitude_sq))
    raise ConfigError(f"not a baseline variant: {variant}")


def step_baseline(
    state: PolicyState,
    x_prev,
    y_prev,
    spec: KernelSpec,
    config: PolicyConfig,
    candidates,
) -> tuple[np.ndarray, PolicyState]:
    """Restart / sliding-window / forgetting-kernel / weighted-kernel baselines."""
    t = state.t + 1
    variant = config.variant
    if variant == Variant.R_GP_UCB:
        window = int(config.variant_params.get("window", 0))
        if window < 1:
            raise ConfigError("restart baseline needs a positive window length")
        if (t - 1) % window == 0:
            state.regression_data = Dataset.empty(spec.dim)
    data = state.regression_data
    if x_prev is not None:
        data = data.extended(x_prev, y_prev, config.sigma_sq, t - 1)
        state.all_inputs = _append_input(state, x_prev)
    if variant == Variant.SW_GP_UCB:
        window = int(config.variant_params.get("window", 0))
        if window < 1:
            raise ConfigError("sliding-window baseline needs a positive window length")
        data = data.tail(window)
    post = _baseline_posterior(data, spec, config, now=t)
    state.t = t
    state.regression_data = data
    return _finish(state, post, config, candidates)


def step(
    state: PolicyState,
    x_prev,
    y_prev,
    env,
    spec: KernelSpec,
    config: PolicyConfig,
    candidates,
    rng: np.random.Generator,
) -> tuple[np.ndarray, PolicyState]:
    """Select the point to play this round.

    Called at the start of round t = state.t + 1 with the previous round's
    bandit pull (both None on the first round). Expert re-queries, when the
    variant makes them, are issued against the current round's function, so
    the returned point is chosen with that fresh information.
    """
    if config.variant == Variant.GP_UCB:
        return step_gp_ucb(state, x_prev, y_prev, spec, config, candidates)
    if config.variant == Variant.SPARQ:
        return step_sparq(state, x_prev, y_prev, env, spec, config, candidates, rng)
    if config.variant == Variant.W_SPARQ:
        return step_w_sparq(state, x_prev, y_prev, env, spec, config, candidates, rng)
    return step_baseline(state, x_prev, y_prev, spec, config, candidates)
