"""Time-varying objective simulators and the expert oracle.

Every environment exposes the same surface: noiseless truth for the regret
evaluator, noisy single observations for policies, batched fresh re-queries
("expert"), and the argmax over a candidate grid. Each run owns its
environment instance and rng streams.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from tvgpucb.gp import KernelSpec, as_points, cross_kernel_matrix, kernel_matrix

log = logging.getLogger(__name__)


class GridFormatError(ValueError):
    """Malformed gridded-series input file."""


class SyntheticRkhsEnv:
    """Smoothly rotating RKHS function f_t(x) = sum_i a_i(t) k(x, c_i).

    Coefficients a(t) = (B / lambda_max) u(t) / ||u(t)|| with
    u_i(t) = sin(time_freq * t + i), recomputed exactly per step.
    """

    def __init__(
        self,
        centers,
        kernel: KernelSpec,
        norm_bound: float = 5.0,
        time_freq: float = 0.3,
        sigma_sq: float = 0.1,
        seed: int = 0,
    ) -> None:
        self.centers = as_points(centers, kernel.dim)
        self.kernel = kernel
        self.norm_bound = float(norm_bound)
        self.time_freq = float(time_freq)
        self.sigma_sq = float(sigma_sq)
        self.seed = int(seed)
        self.query_count = 0
        self.K_C = kernel_matrix(self.centers, kernel)
        self.lambda_max = float(np.max(np.linalg.eigvalsh(self.K_C)))
        if self.lambda_max < 1.0:
            # a^T K_C a <= B^2 / lambda_max can exceed B^2 in this regime.
            log.warning(
                "largest center-kernel eigenvalue %.4f < 1; the RKHS norm may exceed "
                "the configured bound %.2f",
                self.lambda_max,
                self.norm_bound,
            )

    def coefficients(self, t: int) -> np.ndarray:
        i = np.arange(1, self.centers.shape[0] + 1)
        u = np.sin(self.time_freq * t + i)
        return (self.norm_bound / self.lambda_max) * u / np.linalg.norm(u)

    def rkhs_norm_sq(self, t: int) -> float:
        a = self.coefficients(t)
        return float(a @ self.K_C @ a)

    def true_values(self, X, t: int) -> np.ndarray:
        P = as_points(X, self.kernel.dim)
        Kxc = cross_kernel_matrix(P, self.centers, self.kernel)
        return Kxc @ self.coefficients(t)

    def true_value(self, x, t: int) -> float:
        return float(self.true_values(x, t)[0])


class BrownianDriftEnv:
    """Grid function drifting by i.i.d. Uniform(-sigma_sq, sigma_sq) increments.

    The drift path is part of the environment's identity (own seed); the path
    is extended lazily and cached, so replays are deterministic.
    """

    def __init__(self, grid, initial_values=None, sigma_sq: float = 0.1, seed: int = 0) -> None:
        self.grid = as_points(grid, np.atleast_2d(np.asarray(grid, dtype=float)).shape[-1]
                              if np.asarray(grid).ndim > 1 else 1)
        n = self.grid.shape[0]
        init = np.zeros(n) if initial_values is None else np.asarray(initial_values, dtype=float)
        if init.shape != (n,):
            raise ValueError("initial_values must match the grid length")
        self.sigma_sq = float(sigma_sq)
        self.seed = int(seed)
        self.query_count = 0
        self._drift_rng = np.random.default_rng(seed)
        self._path = [init.copy()]  # index = time step

    def _values_at(self, t: int) -> np.ndarray:
        if t < 0:
            raise ValueError("t must be non-negative")
        while len(self._path) <= t:
            step = self._drift_rng.uniform(
                -self.sigma_sq, self.sigma_sq, size=self.grid.shape[0]
            )
            self._path.append(self._path[-1] + step)
        return self._path[t]

    def _nearest(self, X) -> np.ndarray:
        P = as_points(X, self.grid.shape[1])
        d = P[:, None, :] - self.grid[None, :, :]
        return np.argmin(np.einsum("ijk,ijk->ij", d, d), axis=1)

    def true_values(self, X, t: int) -> np.ndarray:
        return self._values_at(t)[self._nearest(X)]

    def true_value(self, x, t: int) -> float:
        return float(self.true_values(x, t)[0])


class GridSeriesEnv:
    """Pre-tabulated objective values on a fixed spatial grid, one row per step.

    Off-grid evaluation snaps to the nearest grid point (no interpolation).
    Step t (1-based) reads row t-1 of the values matrix.
    """

    def __init__(self, grid, values, sigma_sq: float = 0.1) -> None:
        self.grid = as_points(grid, np.atleast_2d(np.asarray(grid, dtype=float)).shape[-1]
                              if np.asarray(grid).ndim > 1 else 1)
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.shape[0]:
            raise GridFormatError("values must be (n_steps, n_grid)")
        self.sigma_sq = float(sigma_sq)
        self.query_count = 0

    @classmethod
    def from_csv(cls, path, sigma_sq: float = 0.1) -> "GridSeriesEnv":
        """Load `t,x1..xd,value` rows; every timestep must cover the same grid."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "t" or header[-1] != "value":
                raise GridFormatError("expected header t,x1..xd,value")
            d = len(header) - 2
            if d < 1:
                raise GridFormatError("expected at least one coordinate column")
            per_t: dict[int, dict[tuple, float]] = {}
            for row in reader:
                if len(row) != d + 2:
                    raise GridFormatError(f"bad row width: {row}")
                t = int(row[0])
                point = tuple(float(v) for v in row[1 : 1 + d])
                per_t.setdefault(t, {})[point] = float(row[-1])
        if not per_t:
            raise GridFormatError("no data rows")
        times = sorted(per_t)
        grid_points = sorted(per_t[times[0]])
        for t in times:
            if sorted(per_t[t]) != grid_points:
                raise GridFormatError(f"timestep {t} does not cover the full grid")
        values = np.array([[per_t[t][p] for p in grid_points] for t in times])
        return cls(np.array(grid_points), values, sigma_sq=sigma_sq)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    def _nearest(self, X) -> np.ndarray:
        P = as_points(X, self.grid.shape[1])
        d = P[:, None, :] - self.grid[None, :, :]
        return np.argmin(np.einsum("ijk,ijk->ij", d, d), axis=1)

    def true_values(self, X, t: int) -> np.ndarray:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"t={t} outside the stored range 1..{self.horizon}")
        return self.values[t - 1][self._nearest(X)]

    def true_value(self, x, t: int) -> float:
        return float(self.true_values(x, t)[0])


# Module-level operation surface shared by all environments.


def env_true_value(env, x, t: int) -> float:
    """Noiseless f_t(x); regret evaluator only, never shown to policies."""
    return env.true_value(x, t)


def env_observe(env, x, t: int, rng: np.random.Generator) -> float:
    """One noisy evaluation y = f_t(x) + N(0, sigma_sq)."""
    noise = rng.normal(0.0, np.sqrt(env.sigma_sq)) if env.sigma_sq > 0 else 0.0
    return env.true_value(x, t) + noise


def expert_query(env, X, t: int, rng: np.random.Generator) -> np.ndarray:
    """Fresh noisy evaluations of f_t at every requested point; counts queries."""
    P = np.asarray(X, dtype=float)
    if P.size == 0:
        return np.empty(0)
    values = env.true_values(X, t)
    if env.sigma_sq > 0:
        values = values + rng.normal(0.0, np.sqrt(env.sigma_sq), size=len(values))
    env.query_count += len(values)
    return values


def env_optimum(env, t: int, candidates) -> tuple[np.ndarray, float]:
    """Argmax of the truth over the candidate grid (first index on ties)."""
    P = as_points(candidates, env.grid.shape[1] if hasattr(env, "grid") else env.kernel.dim)
    if P.shape[0] == 0:
        raise ValueError("candidates must be non-empty")
    values = env.true_values(P, t)
    idx = int(np.argmax(values))
    return P[idx], float(values[idx])


def drift_increment_check(
    env: BrownianDriftEnv, t1: int, t2: int, n_paths: int = 100_000, seed: int = 0
) -> float:
    """Monte-Carlo estimate of Var[f_t2(x) - f_t1(x)] over replicated drift paths."""
    if t2 < t1:
        raise ValueError("need t1 <= t2")
    gap = t2 - t1
    if gap == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    sums = rng.uniform(-env.sigma_sq, env.sigma_sq, size=(n_paths, gap)).sum(axis=1)
    return float(np.var(sums))
