"""Seeded Monte-Carlo sweeps over a scenario parameter, with CSV summaries."""

from __future__ import annotations

import csv
import hashlib
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sim import ScenarioConfig, TrialResult, run_trial

__all__ = [
    "CSV_HEADER",
    "PRESETS",
    "ExperimentPlan",
    "SummaryRow",
    "TrialFailure",
    "trial_seed",
    "run_plan",
    "summarize",
    "complexity_counters",
    "emit_csv",
]

CSV_HEADER = ("sweep_param", "sweep_value", "trials", "rmse_mean", "rmse_stderr",
              "time_mean_s", "kbar_mean", "prod_ops_mean")

# "paper" is the full reference network; "desk" halves it for laptop-sized sweeps
# while keeping the node density (and so the mean degree) close.
PRESETS = {
    "paper": dict(n_agents=100, n_anchors=20, arena=(100.0, 100.0), comm_range=12.0),
    "desk": dict(n_agents=50, n_anchors=10, arena=(70.0, 70.0), comm_range=12.0),
}


@dataclass(frozen=True)
class ExperimentPlan:
    """One parameter sweep: ``trials`` scenarios per value of ``sweep_param``."""

    base: ScenarioConfig
    sweep_param: str = "noise_factor"
    sweep_values: tuple = (0.0,)
    trials: int = 1
    out: str | None = None
    baseline: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.sweep_param not in ScenarioConfig.field_names() or self.sweep_param == "seed":
            raise ValueError(f"cannot sweep {self.sweep_param!r}")
        values = tuple(self.sweep_values)
        if not values:
            raise ValueError("sweep needs at least one value")
        if len(set(values)) != len(values) or list(values) != sorted(values):
            raise ValueError("sweep values must be distinct and sorted")
        object.__setattr__(self, "sweep_values", values)
        for v in values:
            self.config_for(v)  # validates every swept configuration up front

    def config_for(self, value) -> ScenarioConfig:
        return self.base.replace(**{self.sweep_param: value})

    def tasks(self):
        """``(value_index, trial_index, config, seed)`` in aggregation order."""
        for vi, v in enumerate(self.sweep_values):
            cfg = self.config_for(v)
            for k in range(self.trials):
                yield vi, k, cfg, trial_seed(self.base.seed, v, k)


@dataclass
class SummaryRow:
    sweep_param: str
    sweep_value: float
    trials: int
    rmse_mean: float
    rmse_stderr: float
    time_mean_s: float
    kbar_mean: float
    prod_ops_mean: float
    failed: int = 0

    def csv_fields(self) -> list[str]:
        return [self.sweep_param, _num(self.sweep_value), str(self.trials), _num(self.rmse_mean),
                _num(self.rmse_stderr), _num(self.time_mean_s), _num(self.kbar_mean),
                _num(self.prod_ops_mean)]


@dataclass(frozen=True)
class TrialFailure:
    sweep_value: float
    trial: int
    seed: int
    error: str


def trial_seed(base_seed: int, value, trial: int) -> int:
    """Stable 63-bit seed for one trial; independent of the other sweep values."""
    text = f"{int(base_seed)}|{_num(value)}|{int(trial)}".encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little") >> 1


def _num(v) -> str:
    # repr of a float is its shortest exact round trip; always locale-free
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _run_task(args):
    vi, k, cfg, seed, baseline = args
    try:
        return vi, k, seed, run_trial(cfg, seed, baseline=baseline), None
    except Exception as exc:  # recorded per trial, reported by the caller
        return vi, k, seed, None, f"{type(exc).__name__}: {exc}"


def run_plan(plan: ExperimentPlan, jobs: int = 1, failures: list | None = None,
             dump=None) -> list[SummaryRow]:
    """Run every (value, trial) of ``plan`` and aggregate one row per value.

    Failed trials are appended to ``failures`` as :class:`TrialFailure` and
    left out of the aggregates. ``dump``, if given, is a text stream that
    receives one JSON line per completed trial, in aggregation order.
    """
    tasks = [(*t, plan.baseline) for t in plan.tasks()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        done = [_run_task(t) for t in tasks]
    done.sort(key=lambda d: (d[0], d[1]))

    per_value: list[list[TrialResult]] = [[] for _ in plan.sweep_values]
    failed = [0] * len(plan.sweep_values)
    for vi, k, seed, result, err in done:
        value = plan.sweep_values[vi]
        if result is None:
            failed[vi] += 1
            if failures is not None:
                failures.append(TrialFailure(value, k, seed, err))
            continue
        per_value[vi].append(result)
        if dump is not None:
            dump.write(_dump_line(plan.sweep_param, value, k, seed, result) + "\n")
    return [summarize(plan.sweep_param, v, res, failed=f)
            for v, res, f in zip(plan.sweep_values, per_value, failed)]


def _dump_line(param, value, trial, seed, result: TrialResult) -> str:
    body = result.to_json()
    return f'{{"sweep_param":"{param}","sweep_value":{_num(value)},"trial":{trial},"seed":{seed},"result":{body}}}'


def summarize(sweep_param: str, value, results: Sequence[TrialResult], failed: int = 0) -> SummaryRow:
    n = len(results)
    if n == 0:
        nan = math.nan
        return SummaryRow(sweep_param, value, 0, nan, nan, nan, nan, nan, failed)
    rmse = np.array([r.rmse for r in results])
    stderr = float(rmse.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SummaryRow(
        sweep_param=sweep_param,
        sweep_value=value,
        trials=n,
        rmse_mean=float(rmse.mean()),
        rmse_stderr=stderr,
        time_mean_s=float(np.mean([r.wall_time for r in results])),
        kbar_mean=float(np.mean([r.kbar for r in results])),
        prod_ops_mean=float(np.mean([r.product_ops for r in results])),
        failed=failed,
    )


def complexity_counters(result: TrialResult) -> dict:
    """Operation counts of one trial, normalized per belief update.

    ``cost_ratio`` divides the product cost of an average update by
    ``K * (|N_i| + 1)``, with ``K`` the mean estimated message size and
    ``|N_i|`` the mean number of messages multiplied in; a bounded ratio
    means the product is linear in both.
    """
    c = result.counters
    updates = c.products
    return {
        "updates": updates,
        "product_ops": c.product_ops,
        "damping_ops": c.damping_ops,
        "kbar": c.kbar,
        "k_estimate": c.estimate_ids / c.estimates if c.estimates else 0.0,
        "neighbors_mean": (c.product_operands / updates - 1) if updates else 0.0,
        "product_ops_per_update": c.product_ops / updates if updates else 0.0,
        "cost_ratio": result.product_cost_ratio,
    }


def emit_csv(rows: Sequence[SummaryRow], path) -> None:
    """Write ``rows`` as CSV to ``path`` (``"-"`` or ``None`` for stdout)."""
    if path in (None, "-"):
        _write_rows(sys.stdout, rows)
        return
    with open(path, "w", newline="", encoding="ascii") as fh:
        _write_rows(fh, rows)


def _write_rows(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(r.csv_fields() for r in rows)
