"""Determinantal subset selection over past inputs, plus the query-budget schedule.

Exact sampling enumerates all size-M subsets (small n only); larger candidate
sets use a swap-proposal Markov chain whose acceptance ratio is computed from
Schur complements rather than two full determinants.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky

EXACT_MAX_N = 15


class SubsetSizeError(ValueError):
    """Candidate set too large for exhaustive enumeration."""


class DegenerateKernelError(RuntimeError):
    """Every size-M principal submatrix is singular."""


@dataclass(frozen=True)
class DppSample:
    indices: tuple[int, ...]  # sorted, strictly increasing
    log_det: float
    chain_steps: int

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")


def _subset_logdet(K: np.ndarray, idx) -> float:
    sub = K[np.ix_(idx, idx)]
    with np.errstate(divide="ignore"):
        sign, logdet = np.linalg.slogdet(sub)
    return logdet if sign > 0 else -math.inf


def dpp_exact_sample(K: np.ndarray, M: int, rng: np.random.Generator) -> DppSample:
    """Draw a size-M subset with probability proportional to det(K_{Z,Z})."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= n, got M={M}, n={n}")
    if n > EXACT_MAX_N:
        raise SubsetSizeError(
            f"n={n} exceeds the enumeration guard ({EXACT_MAX_N}); use dpp_mcmc_sample"
        )
    subsets = np.array(list(itertools.combinations(range(n), M)))
    stacked = K[subsets[:, :, None], subsets[:, None, :]]
    dets = np.maximum(np.linalg.det(stacked), 0.0)
    total = dets.sum()
    if total <= 0.0:
        raise DegenerateKernelError("all size-M principal submatrices are singular")
    choice = rng.choice(len(subsets), p=dets / total)
    idx = [int(i) for i in subsets[choice]]
    return DppSample(tuple(idx), _subset_logdet(K, idx), 0)


def _swap_ratio(K: np.ndarray, subset: list[int], pos: int, j: int) -> float:
    """det(K_{Z'}) / det(K_Z) where Z' replaces subset[pos] with j.

    Both determinants share the base Z \\ {subset[pos]}; the ratio is the
    ratio of the two Schur complements with respect to that base.
    """
    i = subset[pos]
    base = subset[:pos] + subset[pos + 1 :]
    if not base:
        kii = K[i, i]
        return math.inf if kii <= 0 else K[j, j] / kii
    Kb = K[np.ix_(base, base)]
    vi = K[base, i]
    vj = K[base, j]
    try:
        L = cholesky(Kb, lower=True)
    except np.linalg.LinAlgError:
        # Current state (and base) singular: compare full determinants directly.
        d_old = float(np.linalg.det(K[np.ix_(subset, subset)]))
        new = base + [j]
        d_new = float(np.linalg.det(K[np.ix_(new, new)]))
        if d_old <= 0.0:
            return math.inf if d_new > 0.0 else 0.0
        return d_new / d_old
    si = K[i, i] - vi @ cho_solve((L, True), vi)
    sj = K[j, j] - vj @ cho_solve((L, True), vj)
    if si <= 0.0:
        return math.inf if sj > 0.0 else 0.0
    return max(sj, 0.0) / si


def default_mcmc_steps(n: int) -> int:
    """Default chain length: ~10 n ln n (heuristic, no verified mixing constant)."""
    return max(1, math.ceil(10.0 * n * math.log(max(n, 2))))


def dpp_mcmc_sample(
    K: np.ndarray, M: int, steps: int, rng: np.random.Generator
) -> DppSample:
    """Swap-chain approximate M-DPP sample.

    Starts from the greedy max-residual subset (a high-probability state, so
    short chains already produce diverse subsets); each step proposes
    exchanging one in-element for one out-element (both uniform) and accepts
    with probability min(1, det ratio).
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= n, got M={M}, n={n}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if np.min(np.diag(K)) < 0:
        raise ValueError("kernel matrix has a negative diagonal entry")
    subset = greedy_max_residual(K, M)
    if M == n:
        return DppSample(tuple(subset), _subset_logdet(K, subset), 0)
    in_set = np.zeros(n, dtype=bool)
    in_set[subset] = True
    out = [i for i in range(n) if not in_set[i]]
    for _ in range(steps):
        pos = int(rng.integers(M))
        opos = int(rng.integers(len(out)))
        j = out[opos]
        ratio = _swap_ratio(K, subset, pos, j)
        if ratio >= 1.0 or rng.random() < ratio:
            out[opos] = subset[pos]
            subset[pos] = j
    subset.sort()
    return DppSample(tuple(subset), _subset_logdet(K, subset), steps)


def greedy_max_residual(K: np.ndarray, M: int) -> list[int]:
    """Pick M indices one at a time, each maximizing the Nystrom residual.

    Fallback for degenerate kernels where every M-subset is singular; also a
    deterministic selector in its own right.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= n, got M={M}, n={n}")
    residual = np.diag(K).astype(float).copy()
    chosen: list[int] = []
    # Incremental Gram-Schmidt on the kernel feature vectors.
    V = np.zeros((M, n))
    for step in range(M):
        masked = residual.copy()
        masked[chosen] = -np.inf
        i = int(np.argmax(masked))
        chosen.append(i)
        r = max(residual[i], 0.0)
        if r <= 1e-12:
            # Remaining points are numerically in the span; fill arbitrarily.
            continue
        v = (K[i, :] - V[:step].T @ V[:step, i]) / math.sqrt(r)
        V[step] = v
        residual = residual - v**2
    return sorted(chosen)


def query_budget(t: int, d: int, c: float, available: int | None = None) -> int:
    """Expert-query budget max(1, ceil(c * ln(t)^d)), optionally capped."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    if c <= 0:
        raise ValueError("c must be positive")
    q = max(1, math.ceil(c * math.log(t) ** d))
    if available is not None:
        q = min(q, available)
    return q
