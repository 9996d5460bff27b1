"""YAML experiment configuration: schema, validation, and object builders.

Schema (see README for the full reference):

    name: demo
    horizon: 500
    seeds: 10                # count, or an explicit list of ints
    output_dir: results/demo
    parallelism: 1
    environment:
      kind: synthetic_rkhs   # synthetic_rkhs | brownian | grid_csv
      domain: [-50.0, 50.0]
      n_centers: 20
      sigma_sq: 0.1
      ...
    kernel:
      amplitude_sq: 0.5
      lengthscale: 3.0
      dim: 1
    candidates:
      grid_size: 300
    policy_defaults:         # merged into every policy entry
      delta: 0.1
      alpha: 1.0
    policies:
      - variant: SPARQ
        budget_c: 4.0
      - variant: R_GP_UCB
        params: {window: 50}
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from tvgpucb.environments import BrownianDriftEnv, GridSeriesEnv, SyntheticRkhsEnv
from tvgpucb.gp import KernelSpec
from tvgpucb.policies import ConfigError, PolicyConfig, Variant

_ENV_KINDS = ("synthetic_rkhs", "brownian", "grid_csv")

_POLICY_KEYS = (
    "delta",
    "rkhs_bound",
    "sigma_sq",
    "alpha",
    "alpha_tilde",
    "budget_c",
    "dpp_mcmc_steps",
    "dpp_exact_max",
)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    horizon: int
    seeds: tuple[int, ...]
    output_dir: str
    parallelism: int
    environment: dict
    kernel: dict
    candidates: dict
    policy_defaults: dict = field(default_factory=dict)
    policies: tuple[dict, ...] = ()

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if not self.policies:
            raise ConfigError("need at least one policy entry")


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing key '{key}' in {where}")
    return mapping[key]


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment file; raises ConfigError."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    seeds_raw = raw.get("seeds", 1)
    if isinstance(seeds_raw, int):
        if seeds_raw < 1:
            raise ConfigError("seeds count must be >= 1")
        seeds = tuple(range(seeds_raw))
    elif isinstance(seeds_raw, (list, tuple)):
        seeds = tuple(int(s) for s in seeds_raw)
    else:
        raise ConfigError("seeds must be an int count or a list of ints")

    env = dict(_require(raw, "environment", "config"))
    kind = _require(env, "kind", "environment")
    if kind not in _ENV_KINDS:
        raise ConfigError(f"unknown environment kind '{kind}' (choose from {_ENV_KINDS})")
    if kind == "grid_csv" and "csv_path" not in env:
        raise ConfigError("grid_csv environment needs csv_path")

    kernel = dict(_require(raw, "kernel", "config"))
    for key in ("amplitude_sq", "lengthscale"):
        _require(kernel, key, "kernel")

    policies = raw.get("policies") or []
    if not isinstance(policies, list):
        raise ConfigError("policies must be a list")
    norm_policies = []
    for i, entry in enumerate(policies):
        if not isinstance(entry, dict) or "variant" not in entry:
            raise ConfigError(f"policy entry {i} must be a mapping with a 'variant' key")
        try:
            Variant(entry["variant"])
        except ValueError as exc:
            raise ConfigError(f"policy entry {i}: {exc}") from exc
        norm_policies.append(dict(entry))

    cfg = ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        horizon=int(_require(raw, "horizon", "config")),
        seeds=seeds,
        output_dir=str(raw.get("output_dir", "results")),
        parallelism=int(raw.get("parallelism", 1)),
        environment=env,
        kernel=kernel,
        candidates=dict(raw.get("candidates", {"grid_size": 100})),
        policy_defaults=dict(raw.get("policy_defaults", {})),
        policies=tuple(norm_policies),
    )
    # Fail fast: construct every policy config once during validation.
    for entry in cfg.policies:
        build_policy_config(cfg, entry)
    build_kernel(cfg)
    candidate_grid(cfg)
    return cfg


def build_kernel(cfg: ExperimentConfig) -> KernelSpec:
    k = cfg.kernel
    try:
        return KernelSpec(
            amplitude_sq=float(k["amplitude_sq"]),
            lengthscale=float(k["lengthscale"]),
            dim=int(k.get("dim", 1)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad kernel: {exc}") from exc


def build_policy_config(cfg: ExperimentConfig, entry: dict) -> PolicyConfig:
    merged = {**cfg.policy_defaults, **entry}
    kwargs = {k: merged[k] for k in _POLICY_KEYS if merged.get(k) is not None}
    if "sigma_sq" not in kwargs and "sigma_sq" in cfg.environment:
        kwargs["sigma_sq"] = float(cfg.environment["sigma_sq"])
    try:
        return PolicyConfig(
            variant=Variant(merged["variant"]),
            variant_params=dict(merged.get("params", {})),
            **kwargs,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad policy entry {merged.get('variant')}: {exc}") from exc


def candidate_grid(cfg: ExperimentConfig) -> np.ndarray:
    """Uniform grid over the domain; cartesian product above one dimension."""
    dim = int(cfg.kernel.get("dim", 1))
    size = int(cfg.candidates.get("grid_size", 100))
    if size < 1:
        raise ConfigError("candidate grid_size must be >= 1")
    lo, hi = (float(v) for v in cfg.environment.get("domain", (-50.0, 50.0)))
    if hi <= lo:
        raise ConfigError("domain must have positive width")
    if dim == 1:
        return np.linspace(lo, hi, size).reshape(-1, 1)
    per_axis = max(2, int(round(size ** (1.0 / dim))))
    axes = [np.linspace(lo, hi, per_axis)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def build_env(cfg: ExperimentConfig, env_seed: int):
    """Environment instance for one run; grids/centers are drawn from env_seed."""
    env = cfg.environment
    kind = env["kind"]
    sigma_sq = float(env.get("sigma_sq", 0.1))
    if kind == "grid_csv":
        return GridSeriesEnv.from_csv(env["csv_path"], sigma_sq=sigma_sq)
    lo, hi = (float(v) for v in env.get("domain", (-50.0, 50.0)))
    dim = int(cfg.kernel.get("dim", 1))
    rng = np.random.default_rng(env_seed)
    if kind == "synthetic_rkhs":
        n_centers = int(env.get("n_centers", 20))
        centers = rng.uniform(lo, hi, size=(n_centers, dim))
        return SyntheticRkhsEnv(
            centers,
            build_kernel(cfg),
            norm_bound=float(env.get("norm_bound", 5.0)),
            time_freq=float(env.get("time_freq", 0.3)),
            sigma_sq=sigma_sq,
            seed=env_seed,
        )
    grid = candidate_grid(cfg)
    init = rng.uniform(-1.0, 1.0, size=grid.shape[0])
    return BrownianDriftEnv(grid, initial_values=init, sigma_sq=sigma_sq, seed=env_seed)


def snapshot(cfg: ExperimentConfig, entry: dict, seed: int) -> dict:
    """JSON-safe record of everything that determines one run."""
    return {
        "name": cfg.name,
        "horizon": cfg.horizon,
        "seed": seed,
        "environment": cfg.environment,
        "kernel": cfg.kernel,
        "candidates": cfg.candidates,
        "policy": {**cfg.policy_defaults, **entry},
    }
