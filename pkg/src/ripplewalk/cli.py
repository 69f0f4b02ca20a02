"""Command line entry point: ``rwt generate|sample|train|bench|inspect``.

Only the final machine-parsable summary line goes to stdout; logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import AXES, SweepSpec, depth_experiment, dump_json, resource_report, run_sweep
from .gcn import save_checkpoint
from .graph import (DEFAULT_FILENAMES, DatasetError, generate_sbm, load_dataset,
                    load_dataset_dir, save_dataset)
from .kernels import BACKEND
from .samplers import SamplerConfig, sample_batch
from .trainer import TrainConfig, TrainingError, train

log = logging.getLogger("ripplewalk")


def write_atomic(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _probability(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not a probability")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def _add_dataset_args(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--data", type=Path, help="dataset directory (edges.txt, features.csv, labels.txt, splits.json)")
    g.add_argument("--edges", type=Path, help="edge file (overrides --data)")
    g.add_argument("--features", type=Path, help="feature CSV (overrides --data)")
    g.add_argument("--labels", type=Path, help="label file (overrides --data)")
    g.add_argument("--splits", type=Path, help="split JSON (overrides --data)")
    g.add_argument("--num-classes", type=_positive_int, help="class count (default: max label + 1)")


def _add_train_args(p):
    g = p.add_argument_group("training")
    g.add_argument("--config", type=Path, help="JSON file with base TrainConfig fields; flags override it")
    g.add_argument("--sampler", choices=["ripple-walk", "ripple_walk", "bfs", "random"])
    g.add_argument("--r", "--expansion-ratio", dest="expansion_ratio", type=float, help="expansion ratio in (0, 1]")
    g.add_argument("--size", dest="subgraph_size", type=_positive_int, help="subgraph size S")
    g.add_argument("--batch-size", dest="batch_size", type=_positive_int, help="subgraph mini-batch size M")
    g.add_argument("--iterations", type=int, help="training iterations T")
    g.add_argument("--selection", choices=["uniform", "round_robin"])
    g.add_argument("--resample-batch", action="store_true", default=None,
                   help="redraw the whole batch every M iterations")
    g.add_argument("--lr", dest="learning_rate", type=float)
    g.add_argument("--weight-decay", type=float)
    g.add_argument("--depth", type=_positive_int, help="number of GCN layers")
    g.add_argument("--hidden", type=_positive_int, help="hidden width")
    g.add_argument("--dropout", type=float)
    g.add_argument("--eval-every", type=int)
    g.add_argument("--epoch-budget", type=_positive_int,
                   help="full-graph-equivalent epochs used to derive default T")


TRAIN_FIELDS = ("sampler", "expansion_ratio", "subgraph_size", "batch_size", "iterations", "selection",
                "resample_batch", "learning_rate", "weight_decay", "depth", "hidden", "dropout",
                "eval_every", "epoch_budget", "seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="rwt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS,
                        help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a stochastic-block-model dataset")
    p.add_argument("--blocks", type=_positive_int, default=2)
    p.add_argument("--nodes-per-block", type=_positive_int, default=100)
    p.add_argument("--p-in", type=_probability, default=0.1)
    p.add_argument("--p-out", type=_probability, default=0.01)
    p.add_argument("--feature-dim", type=_positive_int, help="default: number of blocks")
    p.add_argument("--feature-noise", type=float, default=1.0, help="Gaussian noise stddev")
    p.add_argument("--label-rate", type=_probability, default=0.05)
    p.add_argument("--val-rate", type=_probability, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("inspect", parents=[common], help="validate a dataset and print its statistics")
    _add_dataset_args(p)

    p = sub.add_parser("sample", parents=[common], help="draw subgraphs and write them as JSON")
    _add_dataset_args(p)
    p.add_argument("--sampler", default="ripple-walk", choices=["ripple-walk", "ripple_walk", "bfs", "random"])
    p.add_argument("--r", "--expansion-ratio", dest="expansion_ratio", type=float, default=0.5)
    p.add_argument("--size", type=_positive_int, default=1500)
    p.add_argument("--count", type=_positive_int, default=1)
    p.add_argument("--no-restart", action="store_true", help="return partial subgraphs on stalls")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", parents=[common], help="train a GCN with RWT or on the full graph")
    _add_dataset_args(p)
    _add_train_args(p)
    p.add_argument("--mode", choices=["rwt", "full"], default="rwt")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("bench", parents=[common], help="run an experiment sweep")
    _add_dataset_args(p)
    _add_train_args(p)
    p.add_argument("--axis", choices=sorted(AXES), required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--mode", choices=["rwt", "full"], default="rwt",
                   help="trainer for non-depth axes (the depth axis always runs both)")
    p.add_argument("--resource-steps", type=int, default=0,
                   help="also time this many steps of RWT vs full-graph training")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _load(args):
    paths = [args.edges, args.features, args.labels, args.splits]
    if args.data is None and not all(paths):
        raise DatasetError("give --data DIR or all of --edges/--features/--labels/--splits")
    if args.data is not None and not any(paths):
        graph, _ = load_dataset_dir(args.data, args.num_classes)
        return graph
    defaults = {k: (args.data / v if args.data else None) for k, v in DEFAULT_FILENAMES.items()}
    graph, _ = load_dataset(args.edges or defaults["edges"], args.features or defaults["features"],
                            args.labels or defaults["labels"], args.splits or defaults["splits"],
                            num_classes=args.num_classes)
    return graph


def _train_config(args):
    base = {}
    if args.config is not None:
        base = json.loads(args.config.read_text())
    for name in TRAIN_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    return TrainConfig(**base)


def cmd_generate(args):
    graph, splits = generate_sbm(args.blocks, args.nodes_per_block, args.p_in, args.p_out,
                                 args.feature_dim, args.feature_noise, args.seed,
                                 args.label_rate, args.val_rate)
    manifest = {
        "generator": "sbm",
        "blocks": args.blocks,
        "nodes_per_block": args.nodes_per_block,
        "p_in": args.p_in,
        "p_out": args.p_out,
        "feature_dim": graph.num_features,
        "feature_noise": args.feature_noise,
        "label_rate": args.label_rate,
        "val_rate": args.val_rate,
        "seed": args.seed,
        "num_nodes": graph.num_nodes,
        "num_edges": graph.num_edges,
        "num_classes": graph.num_classes,
        "files": DEFAULT_FILENAMES,
    }
    save_dataset(graph, splits, args.out, manifest)
    log.info("wrote %d nodes / %d edges to %s", graph.num_nodes, graph.num_edges, args.out)
    print(f"nodes={graph.num_nodes} edges={graph.num_edges} out={args.out}")


def cmd_inspect(args):
    graph = _load(args)
    deg = graph.degree()
    s = graph.splits
    info = {
        "nodes": graph.num_nodes,
        "edges": graph.num_edges,
        "features": graph.num_features,
        "classes": graph.num_classes,
        "isolated": int(np.sum(deg == 0)),
        "mean_degree": float(deg.mean()) if deg.size else 0.0,
        "max_degree": int(deg.max()) if deg.size else 0,
        "train": int(s.train.size),
        "val": int(s.val.size),
        "test": int(s.test.size),
        "label_rate": s.train.size / graph.num_nodes,
    }
    print(json.dumps(info, sort_keys=True))


def cmd_sample(args):
    graph = _load(args)
    if args.size > graph.num_nodes:
        raise ValueError(f"--size {args.size} exceeds node count {graph.num_nodes}")
    config = SamplerConfig(args.expansion_ratio, args.size, args.seed, not args.no_restart)
    batch = sample_batch(graph, args.sampler, config, args.count, np.random.default_rng(args.seed))
    args.out.mkdir(parents=True, exist_ok=True)
    width = len(str(args.count - 1))
    for k, sg in enumerate(batch):
        write_atomic(args.out / f"subgraph_{k:0{width}d}.json", json.dumps(sg.to_json()) + "\n")
    stats = batch.stats()
    write_atomic(args.out / "stats.json", dump_json(stats))
    print(f"count={stats['count']} mean_edges={stats['mean_edges']:.4f} "
          f"connected_fraction={stats['connected_fraction']:.4f} restarts={stats['total_restarts']}")


def cmd_train(args):
    graph = _load(args)
    config = _train_config(args)
    model, report = train(graph, config, args.mode)
    args.out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, args.out / "model.ckpt", report.config)
    write_atomic(args.out / "report.json", dump_json(report.to_json()))
    write_atomic(args.out / "report.csv", report.csv_text())
    log.info("%s: %d steps (%d skipped), %.1f ms/step, val_acc=%.4f",
             args.mode, report.steps, report.skips, report.per_step_ms, report.final_val_acc)
    print(f"test_acc={report.final_test_acc:.6f}")


def cmd_bench(args):
    graph = _load(args)
    base = _train_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    seed = base.seed
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = {}
    if args.axis == "depth":
        full, rwt = depth_experiment(graph, values, args.repeats, base, seed)
        outputs = {"depth_full": full, "depth_rwt": rwt}
    else:
        spec = SweepSpec(args.axis, tuple(values), args.repeats, base, seed, args.mode)
        outputs = {args.axis: run_sweep(graph, spec)}
    for name, result in outputs.items():
        write_atomic(args.out / f"{name}_records.csv", result.records_csv())
        write_atomic(args.out / f"{name}_summary.csv", result.summary_csv())
        write_atomic(args.out / f"{name}.json", dump_json(result.to_json()))
    if args.resource_steps:
        write_atomic(args.out / "resources.json",
                     dump_json(resource_report(graph, base, args.resource_steps)))
    parts = []
    for name, result in outputs.items():
        parts.extend(f"{name}[{row['axis_value']}]={row['mean_test_acc']:.6f}" for row in result.summary())
    print(" ".join(parts))


COMMANDS = {
    "generate": cmd_generate,
    "inspect": cmd_inspect,
    "sample": cmd_sample,
    "train": cmd_train,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.WARNING - 10 * min(args.verbose, 2))
    try:
        COMMANDS[args.command](args)
    except (DatasetError, TrainingError, ValueError, OSError) as exc:
        print(f"rwt {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("rwt: interrupted", file=sys.stderr)
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
