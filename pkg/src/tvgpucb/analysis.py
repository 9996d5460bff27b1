"""Regret accounting, theoretical-rate overlays, and information diagnostics.

The overlay curves are shape references (user-supplied constant times the
stated asymptotic rate), not certified bounds. The Fano-style helpers mirror
the lower-bound machinery: drift-discounted information sums, pairwise-KL
caps, and the critical sliding-window length.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from tvgpucb.traces import RunTrace


class BoundKind(str, Enum):
    BANDIT_UPPER = "BANDIT_UPPER"
    WSPARQ_UPPER = "WSPARQ_UPPER"
    BANDIT_LOWER_SMALL = "BANDIT_LOWER_SMALL"
    BANDIT_LOWER_LARGE = "BANDIT_LOWER_LARGE"


def cumulative_regret(trace: RunTrace) -> np.ndarray:
    """Prefix sums of the instantaneous regrets."""
    if len(trace) == 0:
        raise ValueError("trace must be non-empty")
    return np.cumsum(trace.regrets)


def bound_overlay(kind: BoundKind, params: dict, T_grid) -> np.ndarray:
    """Evaluate c times the named asymptotic rate on a horizon grid."""
    kind = BoundKind(kind)
    T = np.asarray(T_grid, dtype=float)
    if np.any(T < 1):
        raise ValueError("horizons must be >= 1")
    c = float(params.get("c", 1.0))
    d = int(params.get("d", 1))
    logT = np.log(np.maximum(T, 1.0))
    if kind == BoundKind.BANDIT_UPPER:
        alpha = float(params["alpha"])
        return c * np.sqrt(d**2 * T ** (3 * alpha + 1) * logT ** (2 * (d + 1)))
    if kind == BoundKind.WSPARQ_UPPER:
        at = float(params["alpha_tilde"])
        delta = float(params.get("delta", 0.1))
        inner = math.log(1.0 / delta) + d * T**at * logT ** (d + 1)
        return c * T ** (2 * at + 1) * d * logT ** (d + 1) * inner
    if kind == BoundKind.BANDIT_LOWER_SMALL:
        alpha = float(params["alpha"])
        return c * np.sqrt(T ** (alpha + 1))
    return c * T


def calibrate_overlay(kind: BoundKind, params: dict, trace: RunTrace) -> float:
    """Constant c that matches the overlay to the measured regret at T/2."""
    cum = cumulative_regret(trace)
    mid = len(cum) // 2
    if mid == 0:
        raise ValueError("trace too short to calibrate")
    shape = bound_overlay(kind, {**params, "c": 1.0}, [trace.steps[mid]])[0]
    if shape <= 0:
        return 0.0
    return float(cum[mid] / shape)


def info_sum(n, tau: int, alpha: float, sigma_sq: float) -> float:
    """Drift-discounted side-query count S_tau = sum_t n_t / (s^2 (1 + (tau-t)^a))."""
    counts = np.asarray(n, dtype=float)
    if len(counts) < tau:
        raise ValueError("need at least tau per-step query counts")
    if np.any(counts < 0):
        raise ValueError("query counts must be non-negative")
    t = np.arange(1, tau + 1, dtype=float)
    gaps = tau - t
    inflation = np.zeros_like(gaps)
    np.power(gaps, alpha, out=inflation, where=gaps > 0)
    return float(np.sum(counts[:tau] / (sigma_sq * (1.0 + inflation))))


def fano_error_bound(M: int, kl_sum: float) -> float:
    """max(0, 1 - (kl_sum / M^2 + ln 2) / ln M)."""
    if M < 2:
        raise ValueError("M must be >= 2")
    if kl_sum < 0:
        raise ValueError("kl_sum must be non-negative")
    return max(0.0, 1.0 - (kl_sum / M**2 + math.log(2.0)) / math.log(M))


def kl_sum_bound(gamma: float, M: int, inv_var_sum: float, C1: float = 1.0) -> float:
    """Cap on the pairwise-KL sum: C1 * M * gamma^2 * sum of inverse variances."""
    if gamma < 0 or M < 1 or inv_var_sum < 0 or C1 <= 0:
        raise ValueError("inputs must be non-negative (C1 positive)")
    return C1 * M * gamma**2 * inv_var_sum


def critical_window(alpha: float, T: int) -> tuple[float, float]:
    """Critical window length L* = (alpha/8)^(1/(alpha+1)) T^(1/(alpha+1)) and F(L*).

    F(L) = L^-alpha + 4 L / T. The returned L* is the closed form used in the
    rate analysis; the exact continuous minimizer of F differs by the constant
    2^(1/(alpha+1)), so a scan asserts the best integer L in [1, T/2] achieves
    at least F(L*)/2 (same order), not exact optimality.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if T < 1:
        raise ValueError("T must be >= 1")
    L_star = (alpha / 8.0) ** (1.0 / (alpha + 1.0)) * T ** (1.0 / (alpha + 1.0))
    F = lambda L: L ** (-alpha) + 4.0 * L / T
    F_star = F(L_star)
    top = max(1, T // 2)
    Ls = np.arange(1, top + 1, dtype=float)
    scanned = Ls ** (-alpha) + 4.0 * Ls / T
    if float(np.min(scanned)) < F_star / 2.0 - 1e-12:
        raise AssertionError("integer scan beat the critical window by more than 2x")
    return float(L_star), float(F_star)


def bandit_inverse_variance_sum(alpha: float, T: int, sigma_sq: float) -> float:
    """Sum over the main evaluations of 1 / Var at horizon T."""
    gaps = np.arange(T, dtype=float)
    inflation = np.zeros_like(gaps)
    np.power(gaps, alpha, out=inflation, where=gaps > 0)
    return float(np.sum(1.0 / (sigma_sq * (1.0 + inflation))))


def necessity_check(
    alpha: float, T: int, N_T: int, sigma_sq: float, C3: float = 1.0
) -> dict:
    """Diagnostic report on whether N_T clears the sublinear-regret threshold.

    Valid in the fast-variation regime alpha > 1, where the bandit
    inverse-variance sum stays bounded in T.
    """
    if alpha <= 1:
        raise ValueError("the necessity diagnostic applies to alpha > 1 only")
    if T < 1 or N_T < 0:
        raise ValueError("need T >= 1 and N_T >= 0")
    bandit_sum = bandit_inverse_variance_sum(alpha, T, sigma_sq)
    L_star, F_star = critical_window(alpha, T)
    threshold = T ** (alpha / (alpha + 1.0))
    info_cap = C3 * N_T * T ** (-alpha / (alpha + 1.0))
    verdict = "above threshold" if N_T > threshold else "below threshold"
    report = {
        "alpha": alpha,
        "T": T,
        "N_T": N_T,
        "bandit_inverse_variance_sum": bandit_sum,
        "critical_window_length": L_star,
        "critical_window_value": F_star,
        "query_threshold": threshold,
        "per_window_information_cap": info_cap,
        "verdict": verdict,
        "notes": [],
    }
    if alpha < 1.1:
        report["notes"].append(
            "alpha is close to the regime boundary 1; the diagnostic degrades there"
        )
    return report


def mean_regret_curves(traces: list[RunTrace]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-variant mean and std of the cumulative regret across seeds."""
    by_variant: dict[str, list[np.ndarray]] = {}
    for tr in traces:
        by_variant.setdefault(tr.variant, []).append(cumulative_regret(tr))
    out = {}
    for variant, curves in sorted(by_variant.items()):
        stack = np.vstack(curves)
        out[variant] = (stack.mean(axis=0), stack.std(axis=0))
    return out


def loglog_slope(cum_regret: np.ndarray, steps: np.ndarray, t_lo: int, t_hi: int) -> float:
    """Least-squares slope of log R_T against log T over a horizon range."""
    mask = (steps >= t_lo) & (steps <= t_hi) & (cum_regret > 0)
    if mask.sum() < 2:
        raise ValueError("not enough points in the requested range")
    x = np.log(steps[mask].astype(float))
    y = np.log(cum_regret[mask])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def grid_squared_errors(post_means: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-grid-point squared prediction error (post-processing helper)."""
    return (np.asarray(post_means, dtype=float) - np.asarray(truth, dtype=float)) ** 2
