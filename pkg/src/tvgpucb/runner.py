"""Single-run driver: one environment, one policy, one seed."""

from __future__ import annotations

import time

import numpy as np

from tvgpucb import policies
from tvgpucb.environments import env_observe, env_optimum, env_true_value
from tvgpucb.gp import KernelSpec, as_points
from tvgpucb.traces import RunTrace


def rng_streams(seed: int) -> tuple[int, np.random.Generator, np.random.Generator]:
    """Deterministic (env seed, observation rng, policy rng) for one run."""
    root = np.random.SeedSequence(seed)
    env_ss, obs_ss, pol_ss = root.spawn(3)
    env_seed = int(env_ss.generate_state(1)[0])
    return env_seed, np.random.default_rng(obs_ss), np.random.default_rng(pol_ss)


def run_policy(
    env,
    spec: KernelSpec,
    config: policies.PolicyConfig,
    horizon: int,
    candidates,
    seed: int,
    rng_obs: np.random.Generator,
    rng_policy: np.random.Generator,
    config_snapshot: dict | None = None,
) -> RunTrace:
    """Play `horizon` rounds and record the full trace."""
    cand = as_points(candidates, spec.dim)
    state = policies.initial_state(spec, config, horizon=horizon)

    steps = np.arange(1, horizon + 1)
    points = np.empty((horizon, spec.dim))
    observations = np.empty(horizon)
    true_values = np.empty(horizon)
    opt_values = np.empty(horizon)
    queries = np.zeros(horizon, dtype=int)
    betas = np.empty(horizon)
    walls = np.empty(horizon)

    x_prev = None
    y_prev = None
    for i, t in enumerate(steps):
        tic = time.perf_counter()
        spent_before = state.queries_spent
        x, state = policies.step(
            state, x_prev, y_prev, env, spec, config, cand, rng_policy
        )
        f_x = env_true_value(env, x, int(t))
        _, f_opt = env_optimum(env, int(t), cand)
        y = env_observe(env, x, int(t), rng_obs)
        points[i] = np.asarray(x, dtype=float).ravel()
        observations[i] = y
        true_values[i] = f_x
        opt_values[i] = f_opt
        queries[i] = state.queries_spent - spent_before
        betas[i] = state.beta_history[-1]
        walls[i] = time.perf_counter() - tic
        x_prev, y_prev = x, y

    regrets = opt_values - true_values
    return RunTrace(
        variant=config.variant.value,
        seed=seed,
        steps=steps,
        points=points,
        observations=observations,
        true_values=true_values,
        opt_values=opt_values,
        regrets=regrets,
        queries=queries,
        betas=betas,
        wall_times=walls,
        config_snapshot=config_snapshot or {},
    )
