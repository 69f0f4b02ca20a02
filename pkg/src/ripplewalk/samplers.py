"""Subgraph samplers: Ripple Walk, breadth-first and uniform node sampling.

Every sampler takes an explicit ``numpy.random.Generator`` and returns an
induced :class:`~ripplewalk.graph.Subgraph`. Sampling is a pure function of
(graph, parameters, generator state).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .graph import induced_subgraph

SAMPLERS = ("ripple_walk", "bfs", "random")


@dataclass(frozen=True)
class SamplerConfig:
    expansion_ratio: float = 0.5
    target_size: int = 1500
    seed: int = 0
    restart_on_stall: bool = True

    def __post_init__(self):
        if not (0.0 < self.expansion_ratio <= 1.0):
            raise ValueError(f"expansion ratio must be in (0, 1], got {self.expansion_ratio}")
        if self.target_size < 1:
            raise ValueError(f"target size must be >= 1, got {self.target_size}")

    def check(self, graph):
        if self.target_size > graph.num_nodes:
            raise ValueError(f"target size {self.target_size} exceeds node count {graph.num_nodes}")


@dataclass(frozen=True)
class SubgraphBatch:
    subgraphs: list
    sampler_name: str
    config: SamplerConfig

    def __len__(self):
        return len(self.subgraphs)

    def __iter__(self):
        return iter(self.subgraphs)

    def __getitem__(self, k):
        return self.subgraphs[k]

    def stats(self):
        edges = [sg.num_edges for sg in self.subgraphs]
        restarts = [sg.restart_count for sg in self.subgraphs]
        return {
            "sampler": self.sampler_name,
            "config": asdict(self.config),
            "count": len(self.subgraphs),
            "mean_nodes": float(np.mean([sg.num_nodes for sg in self.subgraphs])),
            "mean_edges": float(np.mean(edges)),
            "connected_fraction": float(np.mean([sg.is_connected() for sg in self.subgraphs])),
            "restart_counts": restarts,
            "total_restarts": int(sum(restarts)),
        }


def frontier_take(ratio, frontier_size, remaining):
    """Number of frontier nodes admitted in one expansion step.

    ``ceil`` keeps progress for any positive ratio; the rounding guard stops
    products such as 0.1 * 30 = 3.0000000000000004 from rounding up.
    """
    return min(math.ceil(round(ratio * frontier_size, 9)), remaining)


def _expand(graph, size, rng, choose, seed_node, restart_on_stall):
    n = graph.num_nodes
    if not 1 <= size <= n:
        raise ValueError(f"target size {size} must be in [1, {n}]")
    in_sub = np.zeros(n, dtype=bool)
    start = int(rng.integers(n)) if seed_node is None else int(seed_node)
    in_sub[start] = True
    count = 1
    restarts = 0
    frontier = np.asarray(graph.neighbors_of(start), dtype=np.int64)
    while count < size:
        if frontier.size == 0:
            if not restart_on_stall:
                break
            # stall: jump to a uniformly random unselected node
            unselected = np.flatnonzero(~in_sub)
            new = unselected[rng.integers(unselected.size)].reshape(1)
            restarts += 1
        else:
            new = choose(frontier, size - count)
        in_sub[new] = True
        count += new.size
        found = kernels.gather_neighbors(graph.offsets, graph.neighbors, new)
        found = found[~in_sub[found]]
        frontier = np.union1d(frontier[~in_sub[frontier]], found)
    return induced_subgraph(graph, np.flatnonzero(in_sub), restart_count=restarts, seed_node=start)


def ripple_walk_sample(graph, config, rng, seed_node=None):
    """Grow a subgraph from a random seed by admitting a random ``r`` share
    of the current frontier at every step until ``target_size`` nodes are held.

    The frontier is the set of unselected nodes adjacent to the selection.
    ``seed_node`` pins the starting node (otherwise drawn uniformly).
    """
    config.check(graph)
    r = config.expansion_ratio

    def choose(frontier, remaining):
        k = frontier_take(r, frontier.size, remaining)
        return frontier[rng.choice(frontier.size, size=k, replace=False)]

    return _expand(graph, config.target_size, rng, choose, seed_node, config.restart_on_stall)


def bfs_sample(graph, size, rng, seed_node=None, restart_on_stall=True):
    """Breadth-first subgraph: whole levels in ascending id order, truncated at ``size``."""

    def choose(frontier, remaining):
        return frontier[:remaining]

    return _expand(graph, size, rng, choose, seed_node, restart_on_stall)


def random_sample(graph, size, rng):
    """Induced subgraph on ``size`` nodes drawn uniformly without replacement."""
    if not 1 <= size <= graph.num_nodes:
        raise ValueError(f"target size {size} must be in [1, {graph.num_nodes}]")
    return induced_subgraph(graph, rng.choice(graph.num_nodes, size=size, replace=False))


def normalize_sampler_name(name):
    key = name.replace("-", "_").lower()
    if key not in SAMPLERS:
        raise ValueError(f"unknown sampler {name!r}; expected one of {', '.join(SAMPLERS)}")
    return key


def sample_one(graph, sampler, config, rng):
    sampler = normalize_sampler_name(sampler)
    if sampler == "ripple_walk":
        return ripple_walk_sample(graph, config, rng)
    config.check(graph)
    if sampler == "bfs":
        return bfs_sample(graph, config.target_size, rng, restart_on_stall=config.restart_on_stall)
    return random_sample(graph, config.target_size, rng)


def sample_batch(graph, sampler, config, count, rng, workers=1):
    """Draw ``count`` independent subgraphs.

    Each draw gets its own child stream spawned from ``rng``, so the batch is
    reproducible regardless of ``workers``.
    """
    if count < 1:
        raise ValueError("batch size must be >= 1")
    sampler = normalize_sampler_name(sampler)
    config.check(graph)
    streams = rng.spawn(count)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            subgraphs = list(pool.map(lambda s: sample_one(graph, sampler, config, s), streams))
    else:
        subgraphs = [sample_one(graph, sampler, config, s) for s in streams]
    return SubgraphBatch(subgraphs, sampler, config)


def default_batch_size(num_nodes, target_size, coverage=10):
    """M such that M * S covers the graph roughly ``coverage`` times."""
    return max(1, math.ceil(coverage * num_nodes / target_size))
