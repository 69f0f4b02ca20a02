import math

import numpy as np
import pytest

from ripplewalk.gcn import GcnModel, glorot_init
from ripplewalk.graph import SplitMasks, generate_sbm
from ripplewalk.samplers import SamplerConfig
from ripplewalk.trainer import (TrainConfig, TrainingError, config_from_json, full_graph_train,
                                rwt_train, smoothness_diagnostic, smoothness_from_representations,
                                train, unbiasedness_probe)

from conftest import make_graph


@pytest.fixture(scope="module")
def clean_sbm():
    g, _ = generate_sbm(2, 100, 0.1, 0.01, seed=0)
    return g


def logistic_oracle(x, y, train, classes, steps=500, lr=0.5):
    """Plain full-batch softmax regression on the raw features."""
    w = np.zeros((x.shape[1], classes))
    onehot = np.eye(classes)[y[train]]
    for _ in range(steps):
        z = x[train] @ w
        p = np.exp(z - z.max(1, keepdims=True))
        p /= p.sum(1, keepdims=True)
        w -= lr * x[train].T @ (p - onehot) / train.size
    return np.argmax(x @ w, axis=1)


def test_clean_sbm_is_linearly_separable(clean_sbm):
    g = clean_sbm
    pred = logistic_oracle(g.features, g.labels, g.splits.train, 2)
    assert np.mean(pred[g.splits.test] == g.labels[g.splits.test]) == 1.0


def test_rwt_reaches_oracle_accuracy(clean_sbm):
    model, report = rwt_train(clean_sbm, TrainConfig(subgraph_size=50, iterations=200, seed=1))
    assert report.final_test_acc == 1.0
    assert report.final_train_loss < 0.1 * report.initial_train_loss
    assert report.steps + report.skips == 200
    assert report.train_peak_rows == 50
    assert report.eval_peak_rows == clean_sbm.num_nodes


def test_full_graph_training(clean_sbm):
    _, report = full_graph_train(clean_sbm, TrainConfig(seed=1))
    assert report.steps == 200 and report.final_test_acc == 1.0
    assert report.final_train_loss < 0.1 * report.initial_train_loss
    assert report.train_peak_rows == clean_sbm.num_nodes


def test_zero_iterations_returns_init(clean_sbm):
    cfg = TrainConfig(iterations=0, seed=5)
    init = glorot_init(cfg.dims(2, 2), np.random.default_rng(5).spawn(4)[0], cfg.dropout)
    for trainer in (rwt_train, full_graph_train):
        model, report = trainer(clean_sbm, cfg)
        assert model.checksum() == init.checksum()
        assert report.records == [] and report.steps == 0


def test_deterministic_checksum(clean_sbm):
    cfg = TrainConfig(subgraph_size=60, iterations=40, seed=3)
    a = rwt_train(clean_sbm, cfg)[1]
    b = rwt_train(clean_sbm, cfg)[1]
    assert a.checksum == b.checksum
    c = rwt_train(clean_sbm, TrainConfig(subgraph_size=60, iterations=40, seed=4))[1]
    assert c.checksum != a.checksum


def test_single_full_subgraph_equals_full_graph(clean_sbm):
    n = clean_sbm.num_nodes
    cfg = TrainConfig(sampler="random", subgraph_size=n, batch_size=1, iterations=30, seed=2)
    rwt = rwt_train(clean_sbm, cfg)[1]
    full = full_graph_train(clean_sbm, cfg)[1]
    assert rwt.checksum == full.checksum
    assert rwt.final_test_acc == full.final_test_acc


def test_skip_accounting():
    # one labeled node makes most small subgraphs label-free
    g, _ = generate_sbm(2, 50, 0.2, 0.02, seed=1, label_rate=0.01)
    _, report = rwt_train(g, TrainConfig(subgraph_size=5, batch_size=20, iterations=50, seed=0))
    assert report.skips > 0 and report.steps + report.skips == 50


def test_no_training_nodes_anywhere():
    g = make_graph(6, [(0, 1), (2, 3), (4, 5)], splits=SplitMasks([5], [], [0]))
    # seed 0 draws a single-node subgraph away from node 5
    cfg = TrainConfig(sampler="bfs", subgraph_size=1, batch_size=1, iterations=5, seed=0)
    with pytest.raises(TrainingError, match="training node"):
        rwt_train(g, cfg)


def test_missing_splits():
    g = make_graph(3, [(0, 1)])
    with pytest.raises(TrainingError):
        rwt_train(g, TrainConfig(subgraph_size=2, iterations=1))


def test_eval_records_ordered(clean_sbm):
    _, report = rwt_train(clean_sbm, TrainConfig(subgraph_size=50, iterations=30, eval_every=10))
    assert [r.iteration for r in report.records] == [10, 20, 30]
    assert report.csv_text().splitlines()[0] == "iteration,loss,val_acc,test_acc,ms,peak_rows"
    assert report.to_json()["records"][0]["iteration"] == 10


@pytest.mark.parametrize("selection", ["uniform", "round_robin"])
def test_selection_and_resampling(clean_sbm, selection):
    cfg = TrainConfig(subgraph_size=40, batch_size=3, iterations=12, selection=selection,
                      resample_batch=True)
    _, report = rwt_train(clean_sbm, cfg)
    assert report.steps + report.skips == 12


def test_defaults_resolve():
    cfg = TrainConfig().resolve(2708)
    assert (cfg.batch_size, cfg.iterations, cfg.subgraph_size) == (19, 362, 1500)
    assert TrainConfig().resolve(2708, full_graph=True).iterations == 200
    with pytest.raises(ValueError):
        TrainConfig(selection="greedy")
    with pytest.raises(ValueError):
        TrainConfig(iterations=-1)


def test_config_from_json():
    cfg = config_from_json('{"sampler": "bfs", "hidden": 8}', hidden=16, depth=None)
    assert cfg.sampler == "bfs" and cfg.hidden == 16 and cfg.depth == 2


def test_train_dispatch(clean_sbm):
    with pytest.raises(ValueError):
        train(clean_sbm, TrainConfig(), mode="cluster")


# ---- probes ----------------------------------------------------------------

def test_probe_full_size_gap_zero(clean_sbm):
    model = glorot_init([2, 8, 2], np.random.default_rng(0))
    rep = unbiasedness_probe(clean_sbm, "random", SamplerConfig(0.5, clean_sbm.num_nodes), 5, model,
                             np.random.default_rng(1))
    assert rep.relative_gap == 0.0 and rep.samples_used == 5


def test_probe_zero_model_gap_zero(clean_sbm):
    model = GcnModel([np.zeros((2, 8)), np.zeros((8, 2))])
    rep = unbiasedness_probe(clean_sbm, "ripple_walk", SamplerConfig(0.5, 40), 20, model,
                             np.random.default_rng(1))
    assert rep.full_loss == pytest.approx(math.log(2))
    assert rep.relative_gap == pytest.approx(0.0, abs=1e-15)


def test_probe_counts_exclusions():
    g, _ = generate_sbm(2, 50, 0.2, 0.02, seed=1, label_rate=0.01)
    model = glorot_init([2, 4, 2], np.random.default_rng(0))
    rep = unbiasedness_probe(g, "random", SamplerConfig(0.5, 3), 50, model, np.random.default_rng(0))
    assert rep.samples_excluded > 0 and rep.samples_used + rep.samples_excluded == 50


def test_smoothness_examples():
    same = smoothness_from_representations(np.ones((6, 3)), [0, 1, 0, 1, 2, 2])
    assert (same.intra_class_dist, same.inter_class_dist, same.ratio) == (0.0, 0.0, 1.0)
    labels = np.array([0, 1, 2, 0, 1, 2])
    onehot = smoothness_from_representations(np.eye(3)[labels], labels)
    assert onehot.intra_class_dist == 0.0
    assert onehot.inter_class_dist == pytest.approx(math.sqrt(2))
    assert onehot.ratio == 0.0
    with pytest.raises(ValueError):
        smoothness_from_representations(np.ones((3, 2)), [1, 1, 1])


def test_smoothness_pair_sampling():
    rng = np.random.default_rng(0)
    labels = rng.integers(3, size=600)
    reps = np.eye(3)[labels] + rng.normal(scale=0.1, size=(600, 3))
    exact = smoothness_from_representations(reps, labels, max_pairs=10**6)
    sampled = smoothness_from_representations(reps, labels, np.random.default_rng(1), max_pairs=20_000)
    assert sampled.pairs == 20_000 and exact.pairs == 600 * 599 // 2
    assert sampled.ratio == pytest.approx(exact.ratio, abs=0.02)


def test_smoothness_diagnostic_runs(clean_sbm):
    model, _ = full_graph_train(clean_sbm, TrainConfig(iterations=50))
    rep = smoothness_diagnostic(model, clean_sbm)
    assert 0.0 <= rep.ratio < 1.0
