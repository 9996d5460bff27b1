"""Experiment command line: run, sweep, analyze, adversary, validate.

Exit codes: 0 success, 1 partial failure (some runs failed), 2 bad config.
Set TVGPUCB_OUTPUT_ROOT to redirect all artifact directories.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from tvgpucb import analysis, config as cfgmod, runner
from tvgpucb.adversary import FamilyConfigError, build_adversary
from tvgpucb.policies import ConfigError
from tvgpucb.traces import RunTrace, read_trace_csv, write_trace_csv

log = logging.getLogger("tvgpucb.cli")


def _output_dir(cfg: cfgmod.ExperimentConfig) -> Path:
    root = os.environ.get("TVGPUCB_OUTPUT_ROOT")
    out = Path(cfg.output_dir)
    if root:
        out = Path(root) / out.name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _execute_run(job: tuple) -> tuple[str, int, RunTrace | None, str]:
    """One (policy, seed) run; returns (variant, seed, trace or None, error)."""
    cfg, entry, seed = job
    variant = entry["variant"]
    try:
        spec = cfgmod.build_kernel(cfg)
        pconf = cfgmod.build_policy_config(cfg, entry)
        env_seed, rng_obs, rng_pol = runner.rng_streams(seed)
        env = cfgmod.build_env(cfg, env_seed)
        cand = cfgmod.candidate_grid(cfg)
        trace = runner.run_policy(
            env, spec, pconf, cfg.horizon, cand, seed, rng_obs, rng_pol,
            config_snapshot=cfgmod.snapshot(cfg, entry, seed),
        )
        return variant, seed, trace, ""
    except Exception as exc:  # noqa: BLE001 - failed runs go in the summary
        return variant, seed, None, f"{type(exc).__name__}: {exc}"


def _trace_path(out: Path, variant: str, seed: int) -> Path:
    return out / f"trace_{variant}_{seed}.csv"


def run_experiment(cfg: cfgmod.ExperimentConfig) -> int:
    """All (policy, seed) runs in deterministic order; artifacts in output_dir."""
    out = _output_dir(cfg)
    jobs = [(cfg, entry, seed) for entry in cfg.policies for seed in cfg.seeds]
    tic = time.perf_counter()
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_execute_run, jobs))
    else:
        results = [_execute_run(job) for job in jobs]

    failures = 0
    summary_rows = []
    traces: list[RunTrace] = []
    for variant, seed, trace, err in results:
        if trace is None:
            failures += 1
            log.error("run failed: %s seed %d: %s", variant, seed, err)
            summary_rows.append((variant, seed, "failed", "", "", err))
            continue
        write_trace_csv(trace, _trace_path(out, variant, seed))
        traces.append(trace)
        summary_rows.append(
            (variant, seed, "ok",
             repr(trace.final_regret), str(trace.total_queries), "")
        )

    with open(out / "summary.csv", "w") as fh:
        fh.write("variant,seed,status,final_regret,total_queries,error\n")
        for row in summary_rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    if traces:
        _write_mean_regret(traces, out / "mean_regret.csv")
    log.info(
        "%d/%d runs ok in %.1fs -> %s",
        len(traces), len(jobs), time.perf_counter() - tic, out,
    )
    return 1 if failures else 0


def _write_mean_regret(traces: list[RunTrace], path: Path) -> None:
    curves = analysis.mean_regret_curves(traces)
    variants = sorted(curves)
    T = len(next(iter(curves.values()))[0])
    with open(path, "w") as fh:
        cols = ["t"] + [f"{v}_mean" for v in variants] + [f"{v}_std" for v in variants]
        fh.write(",".join(cols) + "\n")
        for i in range(T):
            row = [str(i + 1)]
            row += [repr(float(curves[v][0][i])) for v in variants]
            row += [repr(float(curves[v][1][i])) for v in variants]
            fh.write(",".join(row) + "\n")


def _cmd_run(args) -> int:
    cfg = cfgmod.load_config(args.config)
    return run_experiment(cfg)


def _set_nested(raw: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = raw
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into '{k}' in sweep key '{dotted}'")
    node[keys[-1]] = value


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _cmd_sweep(args) -> int:
    import yaml

    with open(args.config) as fh:
        raw = yaml.safe_load(fh)
    key, _, values = args.param.partition("=")
    if not values:
        raise ConfigError("--param must look like key=v1,v2,...")
    worst = 0
    for value in values.split(","):
        variant_raw = copy.deepcopy(raw)
        parsed = _parse_scalar(value)
        _set_nested(variant_raw, key, parsed)
        base = variant_raw.get("output_dir", "results")
        variant_raw["output_dir"] = str(
            Path(base) / f"{key.replace('.', '_')}_{value}"
        )
        cfg = cfgmod.config_from_dict(variant_raw)
        worst = max(worst, run_experiment(cfg))
    return worst


def _cmd_analyze(args) -> int:
    src = Path(args.dir)
    paths = sorted(src.glob("trace_*.csv"))
    if not paths:
        raise ConfigError(f"no trace files under {src}")
    traces = [read_trace_csv(p) for p in paths]
    out = src / "analysis"
    out.mkdir(exist_ok=True)
    _write_mean_regret(traces, out / "regret_curves.csv")

    with open(out / "query_rates.csv", "w") as fh:
        fh.write("variant,seed,T,total_queries,queries_per_step\n")
        for tr in traces:
            T = len(tr)
            fh.write(
                f"{tr.variant},{tr.seed},{T},{tr.total_queries},"
                f"{repr(tr.total_queries / T)}\n"
            )

    if args.overlay:
        kind = analysis.BoundKind(args.overlay)
        params = {"alpha": args.alpha, "alpha_tilde": args.alpha_tilde, "d": 1}
        with open(out / "overlays.csv", "w") as fh:
            fh.write("variant,seed,t,overlay\n")
            for tr in traces:
                c = analysis.calibrate_overlay(kind, params, tr)
                vals = analysis.bound_overlay(kind, {**params, "c": c}, tr.steps)
                for t, v in zip(tr.steps, vals):
                    fh.write(f"{tr.variant},{tr.seed},{t},{repr(float(v))}\n")

    if args.plot:
        _plot_regret(traces, out / "regret.png")
    return 0


def _plot_regret(traces: list[RunTrace], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = analysis.mean_regret_curves(traces)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for variant, (mean, std) in sorted(curves.items()):
        t = np.arange(1, len(mean) + 1)
        ax.plot(t, mean, label=variant)
        ax.fill_between(t, mean - std, mean + std, alpha=0.15)
    ax.set_xlabel("step")
    ax.set_ylabel("cumulative regret")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _cmd_adversary(args) -> int:
    try:
        fam = build_adversary(
            1, args.gamma, args.bound, args.lengthscale,
            domain=(args.domain[0], args.domain[1]),
        )
    except FamilyConfigError as exc:
        raise ConfigError(str(exc)) from exc
    report = {
        "member_count": fam.count,
        "gamma": fam.gamma,
        "rkhs_bound": fam.rkhs_bound,
        "lengthscale": fam.lengthscale,
        "half_height_radius": fam.zeta,
        "profile_peak": fam.h0,
        "cell_width": fam.cell_width,
        "peaks": [float(p) for p in fam.peaks],
        "member_norm_estimate": fam.rkhs_norm_estimate(0),
    }
    print(json.dumps(report, indent=2))
    if args.out:
        xs = np.linspace(fam.domain[0], fam.domain[1], args.samples)
        with open(args.out, "w") as fh:
            fh.write("x," + ",".join(f"member{m}" for m in range(fam.count)) + "\n")
            cols = [fam.member_values(m, xs) for m in range(fam.count)]
            for i, x in enumerate(xs):
                fh.write(repr(float(x)) + ","
                         + ",".join(repr(float(c[i])) for c in cols) + "\n")
    return 0


def _cmd_validate(args) -> int:
    cfgmod.load_config(args.config)
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvgpucb", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run every (policy, seed) in a config")
    run_p.add_argument("config")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run the config once per parameter value")
    sweep_p.add_argument("config")
    sweep_p.add_argument("--param", required=True, metavar="key=v1,v2,...")
    sweep_p.set_defaults(func=_cmd_sweep)

    an_p = sub.add_parser("analyze", help="derive reports from a results directory")
    an_p.add_argument("dir")
    an_p.add_argument("--overlay", choices=[k.value for k in analysis.BoundKind])
    an_p.add_argument("--alpha", type=float, default=1.0)
    an_p.add_argument("--alpha-tilde", type=float, default=0.25)
    an_p.add_argument("--plot", action="store_true")
    an_p.set_defaults(func=_cmd_analyze)

    adv_p = sub.add_parser("adversary", help="build a bump family and print diagnostics")
    adv_p.add_argument("--gamma", type=float, required=True)
    adv_p.add_argument("--bound", type=float, default=5.0)
    adv_p.add_argument("--lengthscale", type=float, required=True)
    adv_p.add_argument("--domain", type=float, nargs=2, default=(-50.0, 50.0))
    adv_p.add_argument("--out", help="optional CSV of member values")
    adv_p.add_argument("--samples", type=int, default=512)
    adv_p.set_defaults(func=_cmd_adversary)

    val_p = sub.add_parser("validate", help="check a config file and exit")
    val_p.add_argument("config")
    val_p.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
