"""Run traces and their CSV round-trip.

One row per step. Wall-clock timings are kept in memory for profiling but are
deliberately left out of the CSV so repeated runs with one seed produce
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RunTrace:
    """Per-step record of a single policy run."""

    variant: str
    seed: int
    steps: np.ndarray  # (T,) int
    points: np.ndarray  # (T, d)
    observations: np.ndarray  # (T,)
    true_values: np.ndarray  # (T,) f_t(x_t)
    opt_values: np.ndarray  # (T,) f_t(x*_t)
    regrets: np.ndarray  # (T,)
    queries: np.ndarray  # (T,) expert queries spent this step
    betas: np.ndarray  # (T,)
    wall_times: np.ndarray  # (T,) seconds, profiling only (not serialized)
    config_snapshot: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def total_queries(self) -> int:
        return int(self.queries.sum())

    @property
    def final_regret(self) -> float:
        return float(self.regrets.sum())


_COLUMNS = ("y", "f_value", "f_opt", "regret", "queries", "beta")


def write_trace_csv(trace: RunTrace, path) -> None:
    d = trace.points.shape[1]
    meta = {"variant": trace.variant, "seed": trace.seed, "config": trace.config_snapshot}
    with open(path, "w", newline="") as fh:
        fh.write("# meta: " + json.dumps(meta, sort_keys=True) + "\n")
        coords = [f"x{i}" for i in range(d)]
        fh.write(",".join(("t", *coords, *_COLUMNS)) + "\n")
        for i in range(len(trace)):
            row = [str(int(trace.steps[i]))]
            row += [repr(float(v)) for v in trace.points[i]]
            row += [
                repr(float(trace.observations[i])),
                repr(float(trace.true_values[i])),
                repr(float(trace.opt_values[i])),
                repr(float(trace.regrets[i])),
                str(int(trace.queries[i])),
                repr(float(trace.betas[i])),
            ]
            fh.write(",".join(row) + "\n")


def read_trace_csv(path) -> RunTrace:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# meta: "):
            raise ValueError(f"{path}: missing meta line")
        meta = json.loads(first[len("# meta: "):])
        header = fh.readline().strip().split(",")
        d = sum(1 for name in header if name.startswith("x"))
        rows = [line.strip().split(",") for line in fh if line.strip()]
    steps = np.array([int(r[0]) for r in rows], dtype=int)
    points = np.array([[float(v) for v in r[1 : 1 + d]] for r in rows]).reshape(len(rows), d)
    cols = np.array([[float(v) for v in r[1 + d :]] for r in rows]).reshape(len(rows), 6)
    return RunTrace(
        variant=meta["variant"],
        seed=int(meta["seed"]),
        steps=steps,
        points=points,
        observations=cols[:, 0],
        true_values=cols[:, 1],
        opt_values=cols[:, 2],
        regrets=cols[:, 3],
        queries=cols[:, 4].astype(int),
        betas=cols[:, 5],
        wall_times=np.zeros(len(rows)),
        config_snapshot=meta.get("config", {}),
    )
