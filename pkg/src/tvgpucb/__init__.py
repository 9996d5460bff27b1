"""Sequential optimization of time-varying objectives with heteroscedastic GP-UCB policies.

Subpackages:
  gp           -- SE kernel, heteroscedastic GP regression, Nystrom / KL utilities
  dpp          -- determinantal subset selection and query budgets
  policies     -- GP-UCB family policies (plain, sparse-requery, windowed, baselines)
  environments -- synthetic / drift / gridded-series simulators and the expert oracle
  analysis     -- regret accounting, rate overlays, information-theoretic diagnostics
  adversary    -- bump-function adversarial families for lower-bound diagnostics
  cli          -- experiment runner
"""

from tvgpucb.gp import (
    Dataset,
    KernelSpec,
    Posterior,
    finite_kl,
    fit_posterior,
    kernel_matrix,
    logdet_ratio,
    nystrom_residual_trace,
    posterior_eval,
    se_kernel,
)
from tvgpucb.dpp import DppSample, dpp_exact_sample, dpp_mcmc_sample, query_budget

__all__ = [
    "Dataset",
    "KernelSpec",
    "Posterior",
    "DppSample",
    "se_kernel",
    "kernel_matrix",
    "fit_posterior",
    "posterior_eval",
    "logdet_ratio",
    "nystrom_residual_trace",
    "finite_kl",
    "dpp_exact_sample",
    "dpp_mcmc_sample",
    "query_budget",
]

__version__ = "0.1.0"
