#!/usr/bin/env python3
"""Convert a Planetoid citation dataset (ind.<name>.* pickles) into the text
layout read by ``ripplewalk.graph.load_dataset_dir``.

    python scripts/planetoid_to_text.py --raw path/to/planetoid/data --name cora --out data/cora

The standard split is kept: the first 20 labeled nodes per class (``y``) for
training, the next 500 for validation and the 1000 ``test.index`` nodes for
testing. Citeseer's test index has gaps for isolated test nodes; those rows get
zero features and label 0, and stay out of every split. Features are
row-normalized unless ``--raw-features`` is given.
"""
import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ripplewalk.graph import SplitMasks, graph_from_edges, save_dataset


def _load(raw, name, part):
    with open(raw / f"ind.{name}.{part}", "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def convert(raw, name, normalize=True, val_size=500):
    raw = Path(raw)
    x, y, tx, ty, allx, ally, adjacency = (_load(raw, name, p)
                                           for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_order = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_order)
    tx, ty = _dense(tx), _dense(ty)
    if name == "citeseer":
        full_range = np.arange(test_sorted[0], test_sorted[-1] + 1)
        pad_x = np.zeros((full_range.size, tx.shape[1]))
        pad_y = np.zeros((full_range.size, ty.shape[1]))
        pad_x[test_sorted - test_sorted[0]] = tx
        pad_y[test_sorted - test_sorted[0]] = ty
        tx, ty = pad_x, pad_y
    features = np.vstack([_dense(allx), tx])
    onehot = np.vstack([_dense(ally), ty])
    features[test_order] = features[test_sorted]
    onehot[test_order] = onehot[test_sorted]
    labels = onehot.argmax(axis=1)
    if normalize:
        sums = features.sum(axis=1, keepdims=True)
        features = np.divide(features, sums, out=np.zeros_like(features), where=sums > 0)
    n = features.shape[0]
    edges = np.array([(i, j) for i, nbrs in adjacency.items() for j in nbrs if i < n and j < n],
                     dtype=np.int64).reshape(-1, 2)
    n_train = _dense(y).shape[0]
    splits = SplitMasks(np.arange(n_train), np.arange(n_train, n_train + val_size), test_sorted)
    graph = graph_from_edges(n, edges, features, labels, onehot.shape[1], splits)
    graph.validate()
    return graph, splits


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--raw", type=Path, required=True, help="directory holding ind.<name>.* files")
    ap.add_argument("--name", required=True, choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--raw-features", action="store_true", help="skip row normalization")
    ap.add_argument("--val-size", type=int, default=500, help="validation nodes after the training block")
    args = ap.parse_args(argv)
    graph, splits = convert(args.raw, args.name, normalize=not args.raw_features,
                            val_size=args.val_size)
    save_dataset(graph, splits, args.out, manifest={"source": f"planetoid/{args.name}",
                                                    "num_classes": graph.num_classes,
                                                    "num_nodes": graph.num_nodes,
                                                    "num_edges": graph.num_edges})
    print(f"nodes={graph.num_nodes} edges={graph.num_edges} classes={graph.num_classes} out={args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
