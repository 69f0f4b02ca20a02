#!/usr/bin/env python3
"""Time the compiled kernels against the NumPy/SciPy fallback.

    python benchmarks/bench_kernels.py --nodes 50000 --repeat 5

Prints one CSV row per (kernel, backend): best wall time in milliseconds over
``--repeat`` runs and the speedup relative to the python backend. The
end-to-end rows swap the backend under the sampler and a training step.
"""
import argparse
import csv
import sys
import timeit
from contextlib import contextmanager

import numpy as np

from ripplewalk import kernels
from ripplewalk.gcn import glorot_init, gcn_backward, gcn_forward
from ripplewalk.graph import generate_sbm, normalize_adjacency
from ripplewalk.samplers import SamplerConfig, ripple_walk_sample

KERNEL_NAMES = ("csr_spmm", "gather_neighbors", "induced_csr", "normalized_with_self_loops")


@contextmanager
def use_backend(module):
    saved = {name: getattr(kernels, name) for name in KERNEL_NAMES}
    try:
        for name in KERNEL_NAMES:
            setattr(kernels, name, getattr(module, name))
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def best_ms(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def cases(graph, width, seed):
    rng = np.random.default_rng(seed)
    adj = normalize_adjacency(graph)
    dense = rng.normal(size=(graph.num_nodes, width))
    ids = np.sort(rng.choice(graph.num_nodes, size=min(1500, graph.num_nodes), replace=False))
    model = glorot_init([graph.num_features, width, graph.num_classes], rng)
    train = graph.splits.train

    def step():
        a = normalize_adjacency(graph)
        trace = gcn_forward(model, a, graph.features)
        gcn_backward(model, trace, a, graph.labels, train)

    def kernel(name, mod):
        if name == "csr_spmm":
            return lambda: mod.csr_spmm(adj.offsets, adj.indices, adj.weights, dense)
        if name == "gather_neighbors":
            return lambda: mod.gather_neighbors(graph.offsets, graph.neighbors, ids)
        if name == "induced_csr":
            return lambda: mod.induced_csr(graph.offsets, graph.neighbors, ids, graph.num_nodes)
        return lambda: mod.normalized_with_self_loops(graph.offsets, graph.neighbors)

    sample_rng = np.random.default_rng(seed)
    cfg = SamplerConfig(0.5, min(1500, graph.num_nodes))
    return kernel, {"ripple_walk_sample": lambda: ripple_walk_sample(graph, cfg, sample_rng),
                    "full_train_step": step}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=20000, help="approximate node count (10 blocks)")
    ap.add_argument("--width", type=int, default=32, help="dense operand width")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    per_block = max(2, args.nodes // 10)
    graph, _ = generate_sbm(10, per_block, 4.0 / (per_block - 1), 1.0 / (9 * per_block),
                            feature_dim=100, feature_noise=1.0, seed=args.seed)
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the python backend only", file=sys.stderr)
    kernel, end_to_end = cases(graph, args.width, args.seed)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["kernel", "backend", "nodes", "edges", "best_ms", "speedup_vs_python"])
    for name in KERNEL_NAMES + tuple(end_to_end):
        times = {}
        for label, mod in sorted(backends.items(), key=lambda kv: kv[0] != "python"):
            if name in KERNEL_NAMES:
                times[label] = best_ms(kernel(name, mod), args.repeat)
            else:
                with use_backend(mod):
                    times[label] = best_ms(end_to_end[name], args.repeat)
            out.writerow([name, label, graph.num_nodes, graph.num_edges, f"{times[label]:.3f}",
                          f"{times['python'] / times[label]:.2f}"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
