"""Policy stepping tests: window plans, noise schedules, variant behaviors."""

import math

import numpy as np
import pytest

from tvgpucb import policies, runner
from tvgpucb.environments import SyntheticRkhsEnv
from tvgpucb.gp import Dataset, KernelSpec, fit_posterior, logdet_ratio
from tvgpucb.policies import (
    ConfigError,
    PolicyConfig,
    Variant,
    assign_noise_vars,
    beta_schedule,
    initial_state,
    plan_windows,
    select_first,
    step,
    ucb_select,
)

SPEC = KernelSpec(amplitude_sq=0.5, lengthscale=3.0, dim=1)
GRID = np.linspace(-50, 50, 41).reshape(-1, 1)


def make_env(seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-50, 50, size=(8, 1))
    return SyntheticRkhsEnv(centers, SPEC, sigma_sq=0.1, seed=seed)


def config(variant, **kw):
    return PolicyConfig(variant=Variant(variant), **kw)


def play(variant, horizon, seed=0, **kw):
    cfg = config(variant, **kw)
    env = make_env(seed)
    _, rng_obs, rng_pol = runner.rng_streams(seed)
    return runner.run_policy(env, SPEC, cfg, horizon, GRID, seed, rng_obs, rng_pol)


class TestWindowPlan:
    def test_growth_rule_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            alpha = rng.uniform(1.0, 3.0)
            alpha_tilde = rng.uniform(0.0, 1.0 / 3.0 - 1e-9)
            plan = plan_windows(alpha, alpha_tilde, 1, 500)
            r = alpha_tilde / alpha
            for a, b in zip(plan.starts, plan.starts[1:]):
                gap = b - a
                assert a**r < gap <= a**r + 1

    def test_zero_ratio_gives_length_two_windows(self):
        # t^0 = 1, so every gap must be the only integer in (1, 2].
        plan = plan_windows(1.0, 0.0, 1, 10)
        assert plan.starts == (1, 3, 5, 7, 9)

    def test_alpha_zero_rejected(self):
        with pytest.raises(ConfigError):
            plan_windows(0.0, 0.0, 1, 10)

    def test_ratio_above_one_rejected(self):
        with pytest.raises(ConfigError):
            plan_windows(1.0, 2.0, 1, 10)


class TestConfig:
    def test_delta_bounds(self):
        with pytest.raises(ConfigError):
            config("GP_UCB", delta=0.0)
        with pytest.raises(ConfigError):
            config("GP_UCB", delta=1.5)

    def test_windowed_alpha_tilde_guard(self):
        with pytest.raises(ConfigError):
            config("W_SPARQ", alpha_tilde=0.4)
        config("W_SPARQ", alpha_tilde=0.25)  # fine

    def test_positive_params(self):
        with pytest.raises(ConfigError):
            config("GP_UCB", sigma_sq=0.0)
        with pytest.raises(ConfigError):
            config("GP_UCB", budget_c=-1.0)


class TestNoiseSchedule:
    def test_zero_gap_is_base_noise(self):
        nv = assign_noise_vars([5], now=5, alpha=1.0, sigma_sq=0.1)
        assert nv[0] == pytest.approx(0.1)

    def test_inflation_formula(self):
        nv = assign_noise_vars([1, 3, 5], now=5, alpha=2.0, sigma_sq=0.1)
        np.testing.assert_allclose(nv, [0.1 * (1 + 16), 0.1 * (1 + 4), 0.1])

    def test_alpha_zero_doubles(self):
        nv = assign_noise_vars([1], now=4, alpha=0.0, sigma_sq=0.1)
        assert nv[0] == pytest.approx(0.2)

    def test_future_timestamp_rejected(self):
        with pytest.raises(ValueError):
            assign_noise_vars([6], now=5, alpha=1.0, sigma_sq=0.1)

    def test_monotone_in_gap(self):
        nv = assign_noise_vars(np.arange(1, 10), now=10, alpha=1.3, sigma_sq=0.2)
        assert np.all(np.diff(nv) < 0)


class TestSelection:
    def test_beta_formula(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(-10, 10, size=(6, 1))
        data = Dataset(X, rng.normal(size=6), np.full(6, 0.1), np.arange(6))
        post = fit_posterior(data, SPEC)
        delta, B = 0.1, 5.0
        ref = math.sqrt(2 * (math.log(2 / delta) + 0.5 * logdet_ratio(post))) + B
        assert beta_schedule(post, delta, B) == pytest.approx(ref, rel=1e-12)

    def test_prior_beta_is_b_plus_width(self):
        post = fit_posterior(Dataset.empty(1), SPEC)
        assert beta_schedule(post, 0.1, 5.0) == pytest.approx(
            math.sqrt(2 * math.log(20.0)) + 5.0
        )

    def test_tie_break_lowest_index(self):
        post = fit_posterior(Dataset.empty(1), SPEC)
        x, idx = ucb_select(post, 1.0, GRID)
        assert idx == 0 and x[0] == GRID[0, 0]

    def test_select_first_matches_prior_ucb(self):
        x = select_first(SPEC, config("GP_UCB"), GRID)
        assert x[0] == GRID[0, 0]


class TestStepping:
    def test_gp_ucb_accumulates_history(self):
        tr = play("GP_UCB", 8)
        assert tr.total_queries == 0
        assert len(tr) == 8
        assert np.all(np.isfinite(tr.betas))

    def test_sparq_queries_match_budget(self):
        # Round t has t-1 past inputs available; the first round has none.
        tr = play("SPARQ", 10, budget_c=1.0)
        expected = sum(
            min(max(1, math.ceil(math.log(t))), t - 1) for t in range(2, 11)
        )
        assert tr.total_queries == expected
        assert tr.queries[0] == 0

    def test_w_sparq_queries_only_at_window_starts(self):
        plan = policies.plan_windows(1.0, 0.25, 1, 20)
        tr = play("W_SPARQ", 20, alpha=1.0, alpha_tilde=0.25, budget_c=1.0)
        spent_steps = set(int(t) for t, q in zip(tr.steps, tr.queries) if q > 0)
        assert spent_steps == set(s for s in plan.starts if 1 < s <= 20)

    def test_w_sparq_needs_horizon(self):
        with pytest.raises(ConfigError):
            initial_state(SPEC, config("W_SPARQ"), horizon=None)

    def test_restart_clears_history(self):
        cfg = config("R_GP_UCB", variant_params={"window": 3})
        state = initial_state(SPEC, cfg)
        env = make_env()
        rng = np.random.default_rng(0)
        x, y = None, None
        # Resets fire at rounds 1, 4, 7; each later round folds in one point.
        expected = [0, 1, 2, 1, 2, 3, 1]
        for t in range(1, 8):
            x, state = step(state, x, y, env, SPEC, cfg, GRID, rng)
            y = 0.0
            assert len(state.regression_data) == expected[t - 1]

    def test_sliding_window_keeps_tail(self):
        cfg = config("SW_GP_UCB", variant_params={"window": 4})
        state = initial_state(SPEC, cfg)
        env = make_env()
        rng = np.random.default_rng(0)
        x, y = None, None
        for t in range(1, 10):
            x, state = step(state, x, y, env, SPEC, cfg, GRID, rng)
            y = 0.0
            assert len(state.regression_data) == min(t - 1, 4)
        assert state.regression_data.timestamps[0] == 5

    def test_baselines_need_window(self):
        for variant in ("R_GP_UCB", "SW_GP_UCB"):
            with pytest.raises(ConfigError):
                play(variant, 3)

    def test_tv_zero_forgetting_equals_plain(self):
        a = play("GP_UCB", 6, alpha=0.0)
        b = play("TV_GP_UCB", 6, variant_params={"forgetting": 0.0})
        np.testing.assert_allclose(a.points, b.points)

    def test_w_unit_decay_equals_plain(self):
        a = play("GP_UCB", 6, alpha=0.0)
        b = play("W_GP_UCB", 6, variant_params={"weight_decay": 1.0})
        np.testing.assert_allclose(a.points, b.points)

    def test_tv_full_forgetting_keeps_running(self):
        tr = play("TV_GP_UCB", 5, variant_params={"forgetting": 1.0})
        assert np.all(np.isfinite(tr.betas))

    def test_bad_variant_params(self):
        with pytest.raises(ConfigError):
            play("TV_GP_UCB", 3, variant_params={"forgetting": 2.0})
        with pytest.raises(ConfigError):
            play("W_GP_UCB", 3, variant_params={"weight_decay": 0.0})

    def test_determinism_across_runs(self):
        for variant, kw in [
            ("SPARQ", {}),
            ("W_SPARQ", {"alpha_tilde": 0.25}),
            ("GP_UCB", {}),
        ]:
            a = play(variant, 7, seed=3, **kw)
            b = play(variant, 7, seed=3, **kw)
            np.testing.assert_array_equal(a.points, b.points)
            np.testing.assert_array_equal(a.observations, b.observations)
            assert a.total_queries == b.total_queries
