"""Ripple Walk Training loop, full-graph baseline and diagnostic probes."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .gcn import (AdamState, RowMeter, accuracy, adam_step, gcn_backward, gcn_forward,
                  glorot_init, masked_cross_entropy)
from .graph import normalize_adjacency
from .samplers import (SamplerConfig, default_batch_size, normalize_sampler_name,
                       sample_batch)

log = logging.getLogger(__name__)

SELECTION_POLICIES = ("uniform", "round_robin")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for both RWT and full-graph training.

    ``batch_size`` (M) and ``iterations`` (T) default to ``None`` and are
    resolved per dataset by :meth:`resolve`: M covers the graph ten times,
    T gives about 200 full-graph-equivalent epochs (200 for full-graph mode).
    """

    sampler: str = "ripple_walk"
    expansion_ratio: float = 0.5
    subgraph_size: int = 1500
    batch_size: int | None = None
    iterations: int | None = None
    selection: str = "uniform"
    resample_batch: bool = False
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    depth: int = 2
    hidden: int = 32
    dropout: float = 0.5
    seed: int = 0
    eval_every: int = 0
    epoch_budget: int = 200

    def __post_init__(self):
        object.__setattr__(self, "sampler", normalize_sampler_name(self.sampler))
        if self.selection not in SELECTION_POLICIES:
            raise ValueError(f"selection must be one of {SELECTION_POLICIES}")
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.depth < 1 or self.hidden < 1:
            raise ValueError("depth and hidden width must be >= 1")

    def resolve(self, num_nodes, full_graph=False):
        size = min(self.subgraph_size, num_nodes)
        batch = self.batch_size or default_batch_size(num_nodes, size)
        if self.iterations is not None:
            iters = self.iterations
        elif full_graph:
            iters = self.epoch_budget
        else:
            iters = math.ceil(self.epoch_budget * num_nodes / size)
        return replace(self, subgraph_size=size, batch_size=batch, iterations=iters)

    def sampler_config(self):
        return SamplerConfig(self.expansion_ratio, self.subgraph_size, self.seed)

    def dims(self, num_features, num_classes):
        return [num_features] + [self.hidden] * (self.depth - 1) + [num_classes]


@dataclass
class EvalRecord:
    iteration: int
    loss: float
    val_acc: float
    test_acc: float
    ms: float
    peak_rows: int


@dataclass
class RunReport:
    mode: str
    config: dict
    records: list = field(default_factory=list)
    steps: int = 0
    skips: int = 0
    train_ms: float = 0.0
    sample_ms: float = 0.0
    train_peak_rows: int = 0
    train_low_rows: int = 0
    eval_peak_rows: int = 0
    final_val_acc: float = float("nan")
    final_test_acc: float = float("nan")
    checksum: str = ""
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    initial_train_loss: float = float("nan")
    final_train_loss: float = float("nan")

    @property
    def per_step_ms(self):
        return self.train_ms / self.steps if self.steps else float("nan")

    def to_json(self):
        out = asdict(self)
        out["records"] = [asdict(r) for r in self.records]
        return out

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "loss", "val_acc", "test_acc", "ms", "peak_rows"])
        for r in self.records:
            writer.writerow([r.iteration, repr(r.loss), repr(r.val_acc), repr(r.test_acc),
                             f"{r.ms:.3f}", r.peak_rows])
        return buf.getvalue()


def _ensure_splits(graph):
    if graph.splits is None or graph.splits.train.size == 0:
        raise TrainingError("dataset has no training nodes")
    return graph.splits


class _Evaluator:
    """Full-graph, dropout-free evaluation sharing one normalized adjacency."""

    def __init__(self, graph):
        self.graph = graph
        self.adj = normalize_adjacency(graph)
        self.meter = RowMeter()
        self.train_loss = float("nan")

    def __call__(self, model):
        splits = self.graph.splits
        trace = gcn_forward(model, self.adj, self.graph.features, meter=self.meter)
        val = accuracy(trace, self.graph.labels, splits.val) if splits.val.size else float("nan")
        test = accuracy(trace, self.graph.labels, splits.test) if splits.test.size else float("nan")
        self.train_loss = masked_cross_entropy(trace, self.graph.labels, splits.train)
        return val, test


def _record(report, evaluator, model, iteration, losses):
    val, test = evaluator(model)
    report.records.append(EvalRecord(iteration, float(np.mean(losses)) if losses else float("nan"),
                                     val, test, report.train_ms, report.train_peak_rows))


def _finish(report, model, evaluator):
    report.final_val_acc, report.final_test_acc = evaluator(model)
    report.final_train_loss = evaluator.train_loss
    report.eval_peak_rows = evaluator.meter.peak
    report.checksum = model.checksum()
    return model, report


class _Prepared:
    """Per-subgraph cached pieces: adjacency, features, local train ids."""

    __slots__ = ("subgraph", "adj", "train")

    def __init__(self, subgraph):
        self.subgraph = subgraph
        self.adj = normalize_adjacency(subgraph)
        self.train = subgraph.splits.train


def rwt_train(graph, config, model=None):
    """Train a GCN on subgraph mini-batches; returns ``(model, report)``.

    M subgraphs are sampled up front. Each iteration selects one, runs the
    forward/backward pass on its local adjacency with the loss restricted to
    the training nodes it contains, and takes an Adam step. Subgraphs without
    training nodes are skipped without an optimizer step.
    """
    _ensure_splits(graph)
    cfg = config.resolve(graph.num_nodes)
    rng = np.random.default_rng(cfg.seed)
    init_rng, sample_rng, select_rng, dropout_rng = rng.spawn(4)
    if model is None:
        model = glorot_init(cfg.dims(graph.num_features, graph.num_classes), init_rng, cfg.dropout)
    report = RunReport("rwt", asdict(cfg))
    evaluator = _Evaluator(graph)
    if cfg.iterations == 0:
        return _finish(report, model, evaluator)

    def draw():
        t0 = time.perf_counter()
        batch = sample_batch(graph, cfg.sampler, cfg.sampler_config(), cfg.batch_size, sample_rng)
        prepared = [_Prepared(sg) for sg in batch]
        report.sample_ms += (time.perf_counter() - t0) * 1e3
        if not any(p.train.size for p in prepared):
            raise TrainingError(f"none of the {cfg.batch_size} sampled subgraphs contains a training node; "
                                "increase the subgraph size or the label rate")
        return prepared

    prepared = draw()
    evaluator(model)
    report.initial_train_loss = evaluator.train_loss
    state = AdamState.for_model(model, cfg.learning_rate, cfg.weight_decay)
    meter = RowMeter()
    losses = []
    for t in range(cfg.iterations):
        if cfg.resample_batch and t and t % cfg.batch_size == 0:
            prepared = draw()
        if cfg.selection == "round_robin":
            item = prepared[t % len(prepared)]
        else:
            item = prepared[int(select_rng.integers(len(prepared)))]
        if item.train.size == 0:
            report.skips += 1
        else:
            t0 = time.perf_counter()
            sg = item.subgraph
            trace = gcn_forward(model, item.adj, sg.features, training=True, rng=dropout_rng, meter=meter)
            loss = masked_cross_entropy(trace, sg.labels, item.train)
            grads = gcn_backward(model, trace, item.adj, sg.labels, item.train, meter=meter)
            adam_step(model, grads, state)
            report.train_ms += (time.perf_counter() - t0) * 1e3
            report.steps += 1
            report.train_peak_rows = meter.peak
            report.train_low_rows = meter.low
            if report.steps == 1:
                report.initial_loss = loss
            report.final_loss = loss
            losses.append(loss)
        if cfg.eval_every and (t + 1) % cfg.eval_every == 0:
            _record(report, evaluator, model, t + 1, losses)
            losses = []
    if not report.records or report.records[-1].iteration != cfg.iterations:
        _record(report, evaluator, model, cfg.iterations, losses)
    log.debug("rwt: %d steps, %d skips, %.1f ms", report.steps, report.skips, report.train_ms)
    return _finish(report, model, evaluator)


def full_graph_train(graph, config, model=None):
    """Plain GCN training: every step uses the whole graph and training mask."""
    splits = _ensure_splits(graph)
    cfg = config.resolve(graph.num_nodes, full_graph=True)
    rng = np.random.default_rng(cfg.seed)
    init_rng, _, _, dropout_rng = rng.spawn(4)
    if model is None:
        model = glorot_init(cfg.dims(graph.num_features, graph.num_classes), init_rng, cfg.dropout)
    report = RunReport("full", asdict(cfg))
    evaluator = _Evaluator(graph)
    if cfg.iterations == 0:
        return _finish(report, model, evaluator)
    adj = evaluator.adj
    evaluator(model)
    report.initial_train_loss = evaluator.train_loss
    state = AdamState.for_model(model, cfg.learning_rate, cfg.weight_decay)
    meter = RowMeter()
    losses = []
    for t in range(cfg.iterations):
        t0 = time.perf_counter()
        trace = gcn_forward(model, adj, graph.features, training=True, rng=dropout_rng, meter=meter)
        loss = masked_cross_entropy(trace, graph.labels, splits.train)
        grads = gcn_backward(model, trace, adj, graph.labels, splits.train, meter=meter)
        adam_step(model, grads, state)
        report.train_ms += (time.perf_counter() - t0) * 1e3
        report.steps += 1
        report.train_peak_rows = meter.peak
        report.train_low_rows = meter.low
        if report.steps == 1:
            report.initial_loss = loss
        report.final_loss = loss
        losses.append(loss)
        if cfg.eval_every and (t + 1) % cfg.eval_every == 0:
            _record(report, evaluator, model, t + 1, losses)
            losses = []
    if not report.records or report.records[-1].iteration != cfg.iterations:
        _record(report, evaluator, model, cfg.iterations, losses)
    return _finish(report, model, evaluator)


def train(graph, config, mode="rwt"):
    if mode == "rwt":
        return rwt_train(graph, config)
    if mode == "full":
        return full_graph_train(graph, config)
    raise ValueError(f"unknown training mode {mode!r}")


# --------------------------------------------------------------------------
# Probes
# --------------------------------------------------------------------------

@dataclass
class ProbeReport:
    full_loss: float
    mean_subgraph_loss: float
    relative_gap: float
    samples_used: int
    samples_excluded: int


def unbiasedness_probe(graph, sampler, sampler_config, num_samples, model, rng):
    """Compare the full-graph training loss with the average subgraph loss.

    The model is evaluated without dropout. Each subgraph contributes the
    mean loss over the training nodes it contains; subgraphs without any are
    excluded and counted. The gap is averaged as per-sample differences so
    that identical subgraphs give exactly zero.
    """
    splits = _ensure_splits(graph)
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    adj = normalize_adjacency(graph)
    full = masked_cross_entropy(gcn_forward(model, adj, graph.features), graph.labels, splits.train)
    batch = sample_batch(graph, sampler, sampler_config, num_samples, rng)
    diffs = []
    excluded = 0
    for sg in batch:
        if sg.splits.train.size == 0:
            excluded += 1
            continue
        trace = gcn_forward(model, normalize_adjacency(sg), sg.features)
        diffs.append(masked_cross_entropy(trace, sg.labels, sg.splits.train) - full)
    if not diffs:
        raise TrainingError("no sampled subgraph contains a training node")
    mean_diff = math.fsum(diffs) / len(diffs)
    gap = abs(mean_diff) / full if full else abs(mean_diff)
    return ProbeReport(full, full + mean_diff, gap, len(diffs), excluded)


@dataclass
class SmoothnessReport:
    intra_class_dist: float
    inter_class_dist: float
    ratio: float
    pairs: int


def smoothness_from_representations(reps, labels, rng=None, max_pairs=100_000):
    """Mean same-class vs different-class Euclidean distance of node representations."""
    reps = np.asarray(reps, dtype=np.float64)
    labels = np.asarray(labels)
    n = reps.shape[0]
    if np.unique(labels).size < 2:
        raise ValueError("smoothness needs at least two classes")
    total = n * (n - 1) // 2
    if total <= max_pairs:
        i, j = np.triu_indices(n, k=1)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        i = rng.integers(n, size=max_pairs)
        j = rng.integers(n - 1, size=max_pairs)
        j = j + (j >= i)  # uniform over j != i
    dist = np.linalg.norm(reps[i] - reps[j], axis=1)
    same = labels[i] == labels[j]
    intra = float(dist[same].mean()) if same.any() else 0.0
    inter = float(dist[~same].mean()) if (~same).any() else 0.0
    if inter == 0.0:
        ratio = 1.0 if intra == 0.0 else math.inf
    else:
        ratio = intra / inter
    return SmoothnessReport(intra, inter, ratio, int(i.size))


def smoothness_diagnostic(model, graph, rng=None, max_pairs=100_000):
    """Smoothness of the last hidden layer over the full graph (no dropout)."""
    if graph.num_classes < 2:
        raise ValueError("smoothness needs at least two classes")
    trace = gcn_forward(model, normalize_adjacency(graph), graph.features)
    return smoothness_from_representations(trace.hidden, graph.labels, rng, max_pairs)


def config_from_json(text, **overrides):
    raw = json.loads(text) if isinstance(text, str) else dict(text)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**raw)
