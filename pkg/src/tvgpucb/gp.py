"""Squared-exponential kernel and heteroscedastic GP regression.

All policies and diagnostics go through the `Posterior` object built here.
The reference path refits from scratch; a fitted `Posterior` is immutable
and safe to share read-only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

log = logging.getLogger(__name__)

# Diagonal jitter ladder (relative to the kernel amplitude) tried when the
# plain Cholesky factorization fails; duplicated inputs are routine in
# re-query policies, so the first rung is tiny.
_JITTER_LADDER = (0.0, 1e-9, 1e-6)

# Negative posterior variances larger than this (in absolute value) are
# surfaced via a warning before clipping.
_CLIP_REPORT_LEVEL = 1e-8


class NumericalError(RuntimeError):
    """Linear-algebra failure (non-PSD system after jitter, singular covariance)."""


@dataclass(frozen=True)
class KernelSpec:
    """SE kernel parameters: k(x, x') = amplitude_sq * exp(-||x-x'||^2 / (2 l^2))."""

    amplitude_sq: float
    lengthscale: float
    dim: int = 1

    def __post_init__(self) -> None:
        if self.amplitude_sq <= 0:
            raise ValueError(f"amplitude_sq must be positive, got {self.amplitude_sq}")
        if self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


def as_points(x, dim: int) -> np.ndarray:
    """Coerce scalars / lists / arrays to a float array of shape (n, dim)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # A flat array is a batch of 1-d points, or a single d-dim point.
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def _sq_dists(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    d = X[:, None, :] - Z[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def se_kernel(x1, x2, spec: KernelSpec) -> float:
    """Evaluate the SE kernel at a single pair of points."""
    p1 = as_points(x1, spec.dim)
    p2 = as_points(x2, spec.dim)
    if p1.shape[0] != 1 or p2.shape[0] != 1:
        raise ValueError("se_kernel expects single points; use kernel_matrix for batches")
    sq = float(np.sum((p1[0] - p2[0]) ** 2))
    return spec.amplitude_sq * np.exp(-sq / (2.0 * spec.lengthscale**2))


def kernel_matrix(X, spec: KernelSpec) -> np.ndarray:
    """Kernel matrix over a point set, shape (n, n)."""
    P = as_points(X, spec.dim)
    K = spec.amplitude_sq * np.exp(-_sq_dists(P, P) / (2.0 * spec.lengthscale**2))
    return 0.5 * (K + K.T)


def cross_kernel_matrix(X, Z, spec: KernelSpec) -> np.ndarray:
    """Rectangular kernel matrix k(X, Z), shape (len(X), len(Z))."""
    P = as_points(X, spec.dim)
    Q = as_points(Z, spec.dim)
    return spec.amplitude_sq * np.exp(-_sq_dists(P, Q) / (2.0 * spec.lengthscale**2))


@dataclass(frozen=True)
class Dataset:
    """Observations with per-point noise variances and acquisition timestamps."""

    inputs: np.ndarray  # (n, d)
    outputs: np.ndarray  # (n,)
    noise_vars: np.ndarray  # (n,)
    timestamps: np.ndarray  # (n,) int

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", np.atleast_2d(np.asarray(self.inputs, dtype=float)))
        object.__setattr__(self, "outputs", np.asarray(self.outputs, dtype=float).ravel())
        object.__setattr__(self, "noise_vars", np.asarray(self.noise_vars, dtype=float).ravel())
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps, dtype=int).ravel())
        n = len(self.outputs)
        if self.inputs.shape[0] != n and not (n == 0 and self.inputs.size == 0):
            raise ValueError("inputs and outputs length mismatch")
        if len(self.noise_vars) != n or len(self.timestamps) != n:
            raise ValueError("all Dataset fields must share one length")
        if n and np.any(self.noise_vars <= 0):
            raise ValueError("noise variances must be positive")
        if n and np.any(self.timestamps < 0):
            raise ValueError("timestamps must be non-negative")

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.empty((0, dim)), np.empty(0), np.empty(0), np.empty(0, dtype=int))

    def __len__(self) -> int:
        return len(self.outputs)

    def extended(self, x, y: float, noise_var: float, timestamp: int) -> "Dataset":
        p = as_points(x, self.inputs.shape[1] if self.inputs.size else np.asarray(x).size)
        return Dataset(
            np.vstack([self.inputs, p]) if len(self) else p,
            np.append(self.outputs, y),
            np.append(self.noise_vars, noise_var),
            np.append(self.timestamps, timestamp),
        )

    def with_noise_vars(self, noise_vars) -> "Dataset":
        return Dataset(self.inputs, self.outputs, noise_vars, self.timestamps)

    def tail(self, m: int) -> "Dataset":
        return Dataset(
            self.inputs[-m:], self.outputs[-m:], self.noise_vars[-m:], self.timestamps[-m:]
        )


@dataclass
class Posterior:
    """Fitted GP state answering mean/variance queries.

    `cross_fn` / `prior_var_fn` override the SE cross-kernel for transformed
    kernels (time-forgetting, weighted rows); when unset the SE kernel over
    `basis` is used.
    """

    kernel: KernelSpec
    basis: np.ndarray  # (n, d)
    chol: Optional[np.ndarray]  # lower factor of K + Sigma, None when n == 0
    dual_weights: np.ndarray  # (K + Sigma)^{-1} Y
    logdet_K_plus_Sigma: float
    logdet_Sigma: float
    cross_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None  # (m,d) -> (n,m)
    prior_var_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None  # (m,d) -> (m,)
    max_variance_clip: float = field(default=0.0, compare=False)

    def __len__(self) -> int:
        return self.basis.shape[0]


def _factor_with_jitter(A: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky of A, retrying with scaled diagonal jitter."""
    last_exc: Exception | None = None
    for level in _JITTER_LADDER:
        try:
            L = cholesky(A + level * scale * np.eye(A.shape[0]), lower=True)
            if level > 0:
                log.debug("factorization needed jitter %.1e * amplitude", level)
            return L, level
        except np.linalg.LinAlgError as exc:
            last_exc = exc
    smallest = float(np.min(np.linalg.eigvalsh(A)))
    raise NumericalError(
        f"Cholesky failed after jitter ladder; smallest eigenvalue {smallest:.3e}"
    ) from last_exc


def fit_posterior(
    data: Dataset,
    spec: KernelSpec,
    *,
    gram: Optional[np.ndarray] = None,
    cross_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    prior_var_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Posterior:
    """Fit the heteroscedastic GP posterior on `data`.

    `gram` replaces the SE kernel matrix over the inputs when a transformed
    kernel is in play; `cross_fn`/`prior_var_fn` must then be given as well.
    """
    n = len(data)
    if n == 0:
        return Posterior(spec, np.empty((0, spec.dim)), None, np.empty(0), 0.0, 0.0,
                         cross_fn, prior_var_fn)
    K = kernel_matrix(data.inputs, spec) if gram is None else np.asarray(gram, dtype=float)
    A = K + np.diag(data.noise_vars)
    L, _ = _factor_with_jitter(A, spec.amplitude_sq)
    dual = cho_solve((L, True), data.outputs)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    logdet_sigma = float(np.sum(np.log(data.noise_vars)))
    return Posterior(spec, data.inputs.copy(), L, dual, logdet, logdet_sigma,
                     cross_fn, prior_var_fn)


def _cross(post: Posterior, P: np.ndarray) -> np.ndarray:
    if post.cross_fn is not None:
        return post.cross_fn(P)
    return cross_kernel_matrix(post.basis, P, post.kernel)


def _prior_var(post: Posterior, P: np.ndarray) -> np.ndarray:
    if post.prior_var_fn is not None:
        return post.prior_var_fn(P)
    return np.full(P.shape[0], post.kernel.amplitude_sq)


def posterior_eval_batch(post: Posterior, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at a batch of points, shapes (m,), (m,)."""
    P = as_points(X, post.kernel.dim)
    if len(post) == 0:
        return np.zeros(P.shape[0]), _prior_var(post, P)
    Kx = _cross(post, P)  # (n, m)
    mean = Kx.T @ post.dual_weights
    V = solve_triangular(post.chol, Kx, lower=True)
    var = _prior_var(post, P) - np.einsum("ij,ij->j", V, V)
    worst = float(-np.min(var, initial=0.0))
    if worst > _CLIP_REPORT_LEVEL:
        post.max_variance_clip = max(post.max_variance_clip, worst)
        log.warning("posterior variance clipped by %.3e", worst)
    return mean, np.maximum(var, 0.0)


def posterior_eval(post: Posterior, x) -> tuple[float, float]:
    """Posterior mean and variance at a single point."""
    mean, var = posterior_eval_batch(post, x)
    return float(mean[0]), float(var[0])


def posterior_joint(post: Posterior, grid) -> tuple[np.ndarray, np.ndarray]:
    """Joint posterior mean vector and covariance matrix on a grid.

    Only defined for the plain SE kernel (no cross_fn override).
    """
    if post.cross_fn is not None:
        raise ValueError("joint marginals are only defined for the plain SE posterior")
    P = as_points(grid, post.kernel.dim)
    prior_cov = kernel_matrix(P, post.kernel)
    if len(post) == 0:
        return np.zeros(P.shape[0]), prior_cov
    Kx = _cross(post, P)
    mean = Kx.T @ post.dual_weights
    V = solve_triangular(post.chol, Kx, lower=True)
    return mean, prior_cov - V.T @ V


def logdet_ratio(post: Posterior) -> float:
    """log(|K + Sigma| / |Sigma|) of the fitted system; 0 for an empty fit."""
    return post.logdet_K_plus_Sigma - post.logdet_Sigma


def nystrom_residual_trace(X, S, spec: KernelSpec) -> float:
    """Trace of K_XX - K_XS pinv(K_SS) K_SX, clipped to be non-negative.

    The pseudo-inverse is applied through the eigendecomposition of K_SS in
    its symmetric square-root form (sum of squared whitened cross-kernel
    rows), which keeps the truncation error far below the eigenvalue cutoff.
    """
    P = as_points(X, spec.dim)
    Q = as_points(S, spec.dim) if np.asarray(S).size else np.empty((0, spec.dim))
    total = spec.amplitude_sq * P.shape[0]
    if Q.shape[0] == 0:
        return float(total)
    K_xs = cross_kernel_matrix(P, Q, spec)
    K_ss = kernel_matrix(Q, spec)
    lam, V = np.linalg.eigh(K_ss)
    keep = lam > 1e-12 * lam[-1]
    if not np.any(keep):
        return float(total)
    W = (V[:, keep] / np.sqrt(lam[keep])).T @ K_xs.T
    return max(total - float(np.sum(W * W)), 0.0)


def finite_kl(postP: Posterior, postQ: Posterior, grid) -> float:
    """KL[P || Q] between the two posteriors' Gaussian marginals on a grid."""
    P = as_points(grid, postP.kernel.dim)
    if P.shape[0] == 0:
        raise ValueError("grid must be non-empty")
    if postP.kernel != postQ.kernel:
        raise ValueError("posteriors must share one kernel spec")
    mP, CP = posterior_joint(postP, P)
    mQ, CQ = posterior_joint(postQ, P)
    m = P.shape[0]
    jitter = 1e-9 * np.eye(m)
    CP = CP + jitter
    CQ = CQ + jitter
    try:
        LQ, _ = _factor_with_jitter(CQ, 0.0)
        LP, _ = _factor_with_jitter(CP, 0.0)
    except NumericalError as exc:
        raise NumericalError("singular marginal covariance after jitter") from exc
    diff = mQ - mP
    sol = cho_solve((LQ, True), CP)
    quad = diff @ cho_solve((LQ, True), diff)
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(LQ))))
    logdet_p = 2.0 * float(np.sum(np.log(np.diag(LP))))
    kl = 0.5 * (np.trace(sol) + quad - m + logdet_q - logdet_p)
    return max(float(kl), 0.0)
