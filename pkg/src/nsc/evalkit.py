"""Experiment drivers and statistics.

The data-efficiency sweep finetunes surrogates from each initialization
method on nested fractions of each program's training rows; the
training-time experiment measures the first epoch at which each method
reaches a random-initialization target loss.  Improvements are loss (or
finish-epoch) ratios versus random initialization, aggregated with
geometric means, linear-interpolated percentiles, and the minimum
percentile of improvement.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import random_init
from .rng import Rng
from .surrogate import (
    COVERING,
    CoveringTopology,
    FinetuneConfig,
    PaddingMode,
    Splits,
    finetune,
    pad_batch,
)
from .tasks import Task

RANDOM_METHOD = "rnd"


# ---------------------------------------------------------------------------
# statistics


def geomean(ratios) -> float:
    """exp(mean(log r)); rejects empty input and non-positive ratios."""
    arr = np.asarray(list(ratios), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("geometric mean of an empty sequence")
    if np.any(arr <= 0):
        raise ValueError("geometric mean requires positive ratios")
    return float(np.exp(np.mean(np.log(arr))))


def percentile(values, p: float) -> float:
    """Linear-interpolated percentile on the sorted values."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("percentile of an empty sequence")
    return float(np.percentile(arr, p, method="linear"))


def min_percentile_improvement(ratios) -> int:
    """Smallest integer percentile whose interpolated value exceeds 1.

    100 when no percentile improves over random initialization.
    """
    for p in range(101):
        if percentile(ratios, p) > 1.0:
            return p
    return 100


PERCENTILE_POINTS = (0, 25, 50, 75, 100)


def percentile_summary(ratios) -> dict:
    out = {f"p{p}": percentile(ratios, p) for p in PERCENTILE_POINTS}
    out["mpi"] = min_percentile_improvement(ratios)
    return out


# ---------------------------------------------------------------------------
# trial bookkeeping


@dataclass
class TrialResult:
    program: str
    method: str
    instance: int
    trial: int
    size: float
    reported_test_loss: float = math.nan
    best_val_epoch: int = 0
    finish_epoch: int | None = None
    timed_out: bool = False  # training-time runs that hit the epoch cap
    degenerate: str = ""  # "", "zero-loss", "nan"

    @property
    def usable(self) -> bool:
        return self.degenerate == ""


def _flag(loss: float) -> str:
    if math.isnan(loss):
        return "nan"
    if loss == 0.0:
        return "zero-loss"
    return ""


def cell_mean(values: list[float]) -> float:
    """Arithmetic mean, summed in sorted order so collection order is moot."""
    return float(np.mean(np.sort(values))) if values else math.nan


@dataclass
class ImprovementCell:
    program: str
    size: float
    method: str
    mean_metric: float
    baseline_mean: float
    n_used: int
    n_discarded: int

    @property
    def ratio(self) -> float:
        if self.mean_metric > 0 and self.baseline_mean > 0:
            return self.baseline_mean / self.mean_metric
        return math.nan


def improvement_table(results: list[TrialResult], metric: str = "loss"
                      ) -> list[ImprovementCell]:
    """Per (program, size, method) ratios vs random initialization.

    Trial metrics are averaged arithmetically over instances and trials
    before division; degenerate trials are excluded with counts kept.
    """
    def value(r: TrialResult) -> float:
        return r.reported_test_loss if metric == "loss" else float(r.finish_epoch)

    groups: dict[tuple, list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.program, r.size, r.method), []).append(r)

    cells = []
    for (program, size, method), trials in sorted(groups.items()):
        if method == RANDOM_METHOD:
            continue
        base = groups.get((program, size, RANDOM_METHOD), [])
        used = [value(r) for r in trials if r.usable]
        base_used = [value(r) for r in base if r.usable]
        cells.append(ImprovementCell(
            program=program, size=size, method=method,
            mean_metric=cell_mean(used), baseline_mean=cell_mean(base_used),
            n_used=len(used),
            n_discarded=(len(trials) - len(used)) + (len(base) - len(base_used)),
        ))
    return cells


def summarize(cells: list[ImprovementCell]) -> dict:
    """Groupings overall / by program / by dataset size, plus percentiles."""
    def gm_of(sub: list[ImprovementCell]):
        ratios = [c.ratio for c in sub if math.isfinite(c.ratio) and c.ratio > 0]
        return geomean(ratios) if ratios else None

    methods = sorted({c.method for c in cells})
    overall = {}
    for m in methods:
        sub = [c for c in cells if c.method == m]
        ratios = [c.ratio for c in sub if math.isfinite(c.ratio) and c.ratio > 0]
        entry = {"gm": geomean(ratios) if ratios else None,
                 "n_cells": len(sub),
                 "n_cells_excluded": len(sub) - len(ratios),
                 "n_trials_discarded": sum(c.n_discarded for c in sub)}
        if ratios:
            entry.update(percentile_summary(ratios))
        overall[m] = entry

    by_program: dict[str, dict] = {}
    for c in cells:
        by_program.setdefault(c.program, {})
    for program in by_program:
        by_program[program] = {
            m: gm_of([c for c in cells if c.method == m and c.program == program])
            for m in methods
        }
    by_size: dict[str, dict] = {}
    for size in sorted({c.size for c in cells}):
        by_size[_size_key(size)] = {
            m: gm_of([c for c in cells if c.method == m and c.size == size])
            for m in methods
        }
    return {"overall": overall, "by_program": by_program, "by_size": by_size}


def _size_key(size: float) -> str:
    return f"{size:g}"


# ---------------------------------------------------------------------------
# initializers


class RandomInitializer:
    name = RANDOM_METHOD

    def __init__(self, topology: CoveringTopology = COVERING):
        self.topology = topology

    def init_for(self, task: Task, rng: Rng) -> np.ndarray:
        return random_init(self.topology, rng)


class FixedInitializer:
    """MAML or pretrained vectors: one constant initialization for every task."""

    def __init__(self, name: str, params: np.ndarray):
        self.name = name
        self.params = np.asarray(params, dtype=np.float64)

    def init_for(self, task: Task, rng: Rng) -> np.ndarray:
        return self.params.copy()


class CompiledInitializer:
    """Hypernetwork-backed: compiles each task's source text."""

    name = "cpn"

    def __init__(self, model):
        self.model = model
        self._cache: dict[str, np.ndarray] = {}

    def init_for(self, task: Task, rng: Rng) -> np.ndarray:
        if task.name not in self._cache:
            self._cache[task.name] = self.model.compile(task.source)
        return self._cache[task.name].copy()


# ---------------------------------------------------------------------------
# the data-efficiency sweep


@dataclass
class PlanConfig:
    plan_seed: int = 0
    sizes: tuple = (0.0, 0.001, 0.01, 0.1, 1.0)
    trials: int = 9
    epochs: int = 5000
    eval_every: int = 3
    learning_rate: float = 0.01
    timeout_epochs: int = 15_000
    width: int = COVERING.arity


def subset_split(task: Task, size: float, rng: Rng, width: int) -> Splits:
    """Sample a c-sized training subset and split it 80/20 train/val.

    Subsets smaller than 5 rows train on everything with an empty
    validation set.  Inputs are zero-padded to the covering width.
    """
    n_train = task.train_x.shape[0]
    n_sub = int(round(size * n_train))
    idx = rng.child("subset").choice(n_train, size=n_sub, replace=False) if n_sub else np.array([], dtype=int)
    if n_sub < 5:
        tr_idx, val_idx = idx, np.array([], dtype=int)
    else:
        n_val = max(1, int(math.floor(0.2 * n_sub)))
        tr_idx, val_idx = idx[: n_sub - n_val], idx[n_sub - n_val:]
    pad = lambda x: pad_batch(x.reshape(len(x), task.arity), PaddingMode.ZERO, width=width)
    return Splits(
        train_x=pad(task.train_x[tr_idx]), train_y=task.train_y[tr_idx],
        val_x=pad(task.train_x[val_idx]), val_y=task.train_y[val_idx],
        test_x=pad_batch(task.test_x, PaddingMode.ZERO, width=width), test_y=task.test_y,
    )


def _one_trial(task: Task, size: float, method: str, inst: int, initializer,
               trial: int, plan: PlanConfig, root: Rng) -> TrialResult:
    rng = root.child("trial", task.name, method, inst, trial, _size_key(size))
    splits = subset_split(task, size, rng, plan.width)
    init = initializer.init_for(task, rng.child("init"))
    epochs = plan.epochs if splits.has_train else 0
    cfg = FinetuneConfig(
        learning_rate=plan.learning_rate, epochs=epochs,
        eval_every=plan.eval_every, seed=rng.child("ft").derive_int(),
    )
    trace = finetune(init, splits, cfg)
    r = TrialResult(program=task.name, method=method, instance=inst,
                    trial=trial, size=size)
    if trace.aborted:
        r.degenerate = "nan"
    else:
        r.reported_test_loss = trace.reported_test_loss
        r.best_val_epoch = trace.best_val_epoch
        r.degenerate = _flag(trace.reported_test_loss)
    return r


def run_data_efficiency(tasks: list[Task], methods: dict[str, list],
                        plan: PlanConfig, jobs: int = 1) -> list[TrialResult]:
    """The full sweep: programs x sizes x methods x instances x trials.

    `methods` maps method name to its instances (initializer objects);
    trained methods carry 3 instances, random carries one.  Every trial's
    randomness derives from (plan_seed, program, method, instance, trial),
    so results do not depend on execution order or worker count.
    """
    root = Rng(plan.plan_seed)
    specs = [(task, size, method, inst, initializer, trial)
             for task in tasks
             for size in plan.sizes
             for method, instances in methods.items()
             for inst, initializer in enumerate(instances)
             for trial in range(plan.trials)]
    if jobs > 1 and len(specs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda s: _one_trial(*s, plan, root), specs))
    else:
        results = [_one_trial(*s, plan, root) for s in specs]
    results.sort(key=lambda r: (r.program, r.size, r.method, r.instance, r.trial))
    return results


# ---------------------------------------------------------------------------
# the training-time experiment


def finish_epoch_from_curve(epochs, losses, target: float, cap: int = 15_000) -> int:
    """First logged epoch whose loss is at or below the target, else the cap."""
    for e, loss in zip(epochs, losses):
        if not math.isnan(loss) and loss <= target:
            return int(e)
    return cap


def full_splits(task: Task, width: int) -> Splits:
    """All training rows (no validation slice), zero-padded."""
    pad = lambda x: pad_batch(x, PaddingMode.ZERO, width=width)
    return Splits(train_x=pad(task.train_x), train_y=task.train_y,
                  val_x=np.empty((0, width)), val_y=np.empty((0, task.train_y.shape[1])),
                  test_x=pad(task.test_x), test_y=task.test_y)


def run_training_time(tasks: list[Task], methods: dict[str, list],
                      plan: PlanConfig) -> tuple[list[TrialResult], dict[str, float]]:
    """Two phases: random runs fix per-program targets, then every method
    trains until it reaches the target or the timeout epoch."""
    root = Rng(plan.plan_seed)
    targets: dict[str, float] = {}
    results: list[TrialResult] = []

    rnd_instances = methods.get(RANDOM_METHOD)
    if not rnd_instances:
        raise ValueError("training-time experiment requires the random method")

    for task in tasks:
        finals = []
        splits = full_splits(task, plan.width)
        for trial in range(plan.trials):
            rng = root.child("trial", task.name, RANDOM_METHOD, 0, trial, "tt")
            init = rnd_instances[0].init_for(task, rng.child("init"))
            cfg = FinetuneConfig(learning_rate=plan.learning_rate, epochs=plan.epochs,
                                 eval_every=plan.eval_every, seed=trial)
            trace = finetune(init, splits, cfg)
            if not trace.aborted:
                finals.append(trace.test_losses[-1])
        targets[task.name] = cell_mean(finals)

    for task in tasks:
        target = targets[task.name]
        splits = full_splits(task, plan.width)
        for method, instances in methods.items():
            for inst, initializer in enumerate(instances):
                for trial in range(plan.trials):
                    rng = root.child("trial", task.name, method, inst, trial, "tt")
                    init = initializer.init_for(task, rng.child("init"))
                    cfg = FinetuneConfig(
                        learning_rate=plan.learning_rate, epochs=plan.timeout_epochs,
                        eval_every=plan.eval_every, seed=trial,
                        stop_at_test_loss=target,
                    )
                    trace = finetune(init, splits, cfg)
                    r = TrialResult(program=task.name, method=method, instance=inst,
                                    trial=trial, size=1.0)
                    if trace.aborted:
                        r.degenerate = "nan"
                    else:
                        r.finish_epoch = finish_epoch_from_curve(
                            trace.logged_epochs, trace.test_losses, target,
                            plan.timeout_epochs)
                        r.timed_out = r.finish_epoch >= plan.timeout_epochs
                        r.reported_test_loss = trace.test_losses[-1]
                    results.append(r)
    return results, targets


def timeout_counts(results: list[TrialResult]) -> dict[str, str]:
    """Per-method "timeouts / trials" bookkeeping for training-time runs."""
    out: dict[str, str] = {}
    for method in sorted({r.method for r in results}):
        sub = [r for r in results if r.method == method]
        out[method] = f"{sum(r.timed_out for r in sub)} / {len(sub)}"
    return out


# ---------------------------------------------------------------------------
# delimited output


CSV_FIELDS = ("program", "size", "method", "instance", "trial",
              "reported_test_loss", "best_val_epoch", "finish_epoch",
              "timed_out", "degenerate")


def write_trials_csv(results: list[TrialResult], path, manifest_id: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if manifest_id:
            fh.write(f"# manifest: {manifest_id}\n")
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in results:
            writer.writerow({
                "program": r.program, "size": _size_key(r.size), "method": r.method,
                "instance": r.instance, "trial": r.trial,
                "reported_test_loss": repr(r.reported_test_loss),
                "best_val_epoch": r.best_val_epoch,
                "finish_epoch": "" if r.finish_epoch is None else r.finish_epoch,
                "timed_out": int(r.timed_out),
                "degenerate": r.degenerate,
            })


def write_summary_json(summary: dict, path, manifest_id: str = "") -> None:
    if manifest_id:
        summary = {"manifest": manifest_id, **summary}
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_trials_csv(path) -> list[TrialResult]:
    results = []
    with open(path, newline="") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        for row in csv.DictReader(rows):
            results.append(TrialResult(
                program=row["program"], method=row["method"],
                instance=int(row["instance"]), trial=int(row["trial"]),
                size=float(row["size"]),
                reported_test_loss=float(row["reported_test_loss"]),
                best_val_epoch=int(row["best_val_epoch"]),
                finish_epoch=int(row["finish_epoch"]) if row["finish_epoch"] else None,
                timed_out=bool(int(row.get("timed_out") or 0)),
                degenerate=row["degenerate"],
            ))
    return results
