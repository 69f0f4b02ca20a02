"""Experiment sweeps over sampler, expansion ratio, batch size and depth."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .samplers import normalize_sampler_name
from .trainer import TrainConfig, full_graph_train, rwt_train, smoothness_diagnostic

AXES = {
    "sampler": "sampler",
    "ratio": "expansion_ratio",
    "batch_size": "batch_size",
    "depth": "depth",
    "size": "subgraph_size",
}


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    repeats: int = 5
    base: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    mode: str = "rwt"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}; expected one of {', '.join(AXES)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        object.__setattr__(self, "values", tuple(coerce_axis_value(self.axis, v) for v in self.values))

    def seeds(self):
        """Per-repeat training seeds, shared by every axis value."""
        children = np.random.SeedSequence(self.seed).spawn(self.repeats)
        return [int(c.generate_state(1)[0]) for c in children]

    def config_for(self, value, seed):
        return replace(self.base, **{AXES[self.axis]: value}, seed=seed)


def coerce_axis_value(axis, value):
    if axis == "sampler":
        return normalize_sampler_name(str(value))
    if axis == "ratio":
        return float(value)
    return int(value)


@dataclass
class SweepRecord:
    value: object
    seed: int
    test_acc: float
    val_acc: float
    ms: float
    per_step_ms: float
    peak_rows: int
    smoothness_ratio: float = float("nan")


@dataclass
class SweepResult:
    axis: str
    mode: str
    records: list

    def values(self):
        seen = []
        for r in self.records:
            if r.value not in seen:
                seen.append(r.value)
        return seen

    def accuracies(self, value):
        return [r.test_acc for r in self.records if r.value == value]

    def summary(self):
        rows = []
        for value in self.values():
            cell = [r for r in self.records if r.value == value]
            accs = [r.test_acc for r in cell]
            rows.append({
                "axis_value": value,
                "n": len(cell),
                "mean_test_acc": statistics.fmean(accs),
                "std_test_acc": statistics.stdev(accs) if len(accs) > 1 else 0.0,
                "mean_ms": statistics.fmean(r.ms for r in cell),
                "mean_peak_rows": statistics.fmean(r.peak_rows for r in cell),
                "mean_smoothness_ratio": statistics.fmean(r.smoothness_ratio for r in cell),
            })
        return rows

    def mean(self, value):
        return statistics.fmean(self.accuracies(value))

    def records_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis_value", "seed", "test_acc", "ms", "peak_rows"])
        for r in self.records:
            w.writerow([r.value, r.seed, repr(r.test_acc), f"{r.ms:.3f}", r.peak_rows])
        return buf.getvalue()

    def summary_csv(self):
        buf = io.StringIO()
        rows = self.summary()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()

    def to_json(self):
        return {"axis": self.axis, "mode": self.mode,
                "records": [asdict(r) for r in self.records], "summary": self.summary()}


def _run_cell(graph, mode, config, value, with_smoothness):
    trainer = rwt_train if mode == "rwt" else full_graph_train
    try:
        model, report = trainer(graph, config)
    except Exception as exc:
        raise SweepError(f"cell (value={value!r}, seed={config.seed}) failed: {exc}") from exc
    ratio = float("nan")
    if with_smoothness:
        ratio = smoothness_diagnostic(model, graph, np.random.default_rng(config.seed)).ratio
    return SweepRecord(value, config.seed, report.final_test_acc, report.final_val_acc,
                       report.train_ms, report.per_step_ms, report.train_peak_rows, ratio)


def _threads():
    try:
        return max(1, int(os.environ.get("RWT_THREADS", "1")))
    except ValueError:
        return 1


def _run_cells(graph, cells, with_smoothness, workers):
    workers = workers or _threads()
    if workers == 1:
        return [_run_cell(graph, mode, cfg, value, with_smoothness) for mode, cfg, value in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_cell, graph, mode, cfg, value, with_smoothness)
                   for mode, cfg, value in cells]
        return [f.result() for f in futures]  # merged in cell order


def run_sweep(graph, spec, workers=None, with_smoothness=False):
    """Train one model per (axis value, seed) and collect final metrics."""
    cells = [(spec.mode, spec.config_for(v, s), v) for v in spec.values for s in spec.seeds()]
    return SweepResult(spec.axis, spec.mode, _run_cells(graph, cells, with_smoothness, workers))


def depth_experiment(graph, depths, repeats=5, base=None, seed=0, workers=None):
    """Full-graph vs RWT accuracy and smoothness across network depths.

    Returns ``(full_result, rwt_result)``.
    """
    depths = [int(d) for d in depths]
    if not depths or min(depths) < 1 or max(depths) > 10:
        raise ValueError("depths must lie in [1, 10]")
    base = base or TrainConfig()
    results = []
    for mode in ("full", "rwt"):
        spec = SweepSpec("depth", tuple(depths), repeats, base, seed, mode)
        results.append(run_sweep(graph, spec, workers, with_smoothness=True))
    return tuple(results)


def resource_report(graph, config, steps=50):
    """Per-step training time and peak aggregation rows, RWT vs full graph,
    at an equal number of optimizer steps."""
    cfg = replace(config, iterations=steps, eval_every=0)
    _, full = full_graph_train(graph, cfg)
    _, rwt = rwt_train(graph, cfg)
    return {
        "steps": steps,
        "rwt_time_ms": rwt.train_ms,
        "full_time_ms": full.train_ms,
        "rwt_per_step_ms": rwt.per_step_ms,
        "full_per_step_ms": full.per_step_ms,
        "rwt_peak_rows": rwt.train_peak_rows,
        "full_peak_rows": full.train_peak_rows,
        "rwt_steps": rwt.steps,
        "full_steps": full.steps,
    }


def summary_stats(values):
    """Mean and sample standard deviation, as reported in sweep summaries."""
    values = list(values)
    mean = math.fsum(values) / len(values)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)) if len(values) > 1 else 0.0
    return mean, std


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"
