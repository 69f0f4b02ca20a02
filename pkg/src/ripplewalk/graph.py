"""Graph storage, dataset I/O, synthetic generation and adjacency normalization.

Graphs are undirected, unweighted and stored in CSR form with sorted,
duplicate-free neighbor lists and no self-loops. Self-loops appear only in
:class:`NormalizedAdjacency`.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels


class DatasetError(ValueError):
    """Malformed or inconsistent dataset files."""


def _frozen(arr, dtype):
    if (isinstance(arr, np.ndarray) and arr.dtype == dtype and not arr.flags.writeable
            and arr.flags.c_contiguous):
        return arr
    out = np.array(arr, dtype=dtype, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SplitMasks:
    """Train/val/test node-id sets, stored as sorted int64 arrays."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            ids = np.unique(np.asarray(getattr(self, name), dtype=np.int64))
            ids.setflags(write=False)
            object.__setattr__(self, name, ids)

    def validate(self, num_nodes, require_train=True):
        for name in ("train", "val", "test"):
            ids = getattr(self, name)
            if ids.size and (ids[0] < 0 or ids[-1] >= num_nodes):
                raise DatasetError(f"{name} split has ids outside [0, {num_nodes})")
        if require_train and self.train.size == 0:
            raise DatasetError("train split is empty")
        if (np.intersect1d(self.train, self.val).size
                or np.intersect1d(self.train, self.test).size
                or np.intersect1d(self.val, self.test).size):
            raise DatasetError("train/val/test splits overlap")

    def to_json(self):
        return {name: getattr(self, name).tolist() for name in ("train", "val", "test")}


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph in CSR form with node features and labels."""

    num_nodes: int
    offsets: np.ndarray
    neighbors: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    splits: SplitMasks | None = None

    def __post_init__(self):
        object.__setattr__(self, "offsets", _frozen(self.offsets, np.int64))
        object.__setattr__(self, "neighbors", _frozen(self.neighbors, np.int64))
        object.__setattr__(self, "features", _frozen(self.features, np.float64))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))

    @property
    def num_edges(self):
        """Number of undirected edges."""
        return self.neighbors.shape[0] // 2

    @property
    def num_features(self):
        return self.features.shape[1]

    def degree(self):
        return np.diff(self.offsets)

    def neighbors_of(self, node):
        return self.neighbors[self.offsets[node]:self.offsets[node + 1]]

    def edge_list(self):
        """Undirected edges as an (E, 2) array with i < j, lexicographically sorted."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degree())
        keep = rows < self.neighbors
        return np.stack([rows[keep], self.neighbors[keep]], axis=1)

    def validate(self):
        n = self.num_nodes
        off, nb = self.offsets, self.neighbors
        if off.shape != (n + 1,) or off[0] != 0 or off[-1] != nb.shape[0]:
            raise DatasetError("offsets must have length num_nodes+1 and span neighbors")
        if np.any(np.diff(off) < 0):
            raise DatasetError("offsets must be nondecreasing")
        if nb.size and (nb.min() < 0 or nb.max() >= n):
            raise DatasetError("neighbor id out of range")
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(off))
        if np.any(rows == nb):
            raise DatasetError("self-loops are not allowed in raw topology")
        same_row = rows[1:] == rows[:-1]
        if np.any(nb[1:][same_row] <= nb[:-1][same_row]):
            raise DatasetError("neighbor lists must be sorted and duplicate-free")
        fwd = np.sort(rows * n + nb)
        bwd = np.sort(nb * n + rows)
        if not np.array_equal(fwd, bwd):
            raise DatasetError("adjacency is not symmetric")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DatasetError(f"feature rows ({self.features.shape[0]}) != node count ({n})")
        if self.labels.shape != (n,):
            raise DatasetError(f"label count ({self.labels.shape[0]}) != node count ({n})")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError("label out of range")
        if self.splits is not None:
            self.splits.validate(n)
        return self


def csr_from_edges(num_nodes, edges):
    """Symmetrize an edge array, drop self-loops and duplicates, return CSR arrays."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise DatasetError(f"edge endpoint outside [0, {num_nodes})")
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    keep = src != dst
    keys = np.unique(src[keep] * num_nodes + dst[keep])
    rows, cols = np.divmod(keys, num_nodes) if num_nodes else (keys, keys)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
    return offsets, cols.astype(np.int64)


def graph_from_edges(num_nodes, edges, features, labels, num_classes=None, splits=None):
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 0
    offsets, neighbors = csr_from_edges(num_nodes, edges)
    return Graph(num_nodes, offsets, neighbors, features, labels, int(num_classes), splits)


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------

DEFAULT_FILENAMES = {
    "edges": "edges.txt",
    "features": "features.csv",
    "labels": "labels.txt",
    "splits": "splits.json",
}


def _read_edges(path):
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected two node ids, got {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: node ids must be integers") from None
            if i < 0 or j < 0:
                raise DatasetError(f"{path}:{lineno}: node ids must be non-negative")
            pairs.append((i, j))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _read_features(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                row = [float(v) for v in text.split(",")]
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric feature value") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(len(rows), width or 0)


def _read_labels(path):
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                labels.append(int(text))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: label must be an integer") from None
    return np.array(labels, dtype=np.int64)


def _read_splits(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    try:
        return SplitMasks(raw["train"], raw.get("val", []), raw.get("test", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: bad split object ({exc})") from None


def load_dataset(edge_path, feature_path, label_path, split_path, num_classes=None):
    """Read the four text files of a dataset and return ``(graph, splits)``.

    The node count is taken from the feature file. Directed edges are mirrored
    and duplicates removed. ``num_classes`` defaults to ``max(label) + 1``.
    """
    features = _read_features(feature_path)
    labels = _read_labels(label_path)
    n = features.shape[0]
    if labels.shape[0] != n:
        raise DatasetError(f"dimension mismatch: {n} feature rows but {labels.shape[0]} labels")
    if labels.size and labels.min() < 0:
        raise DatasetError(f"{label_path}: label out of range (negative)")
    if num_classes is not None and labels.size and labels.max() >= num_classes:
        raise DatasetError(f"{label_path}: label out of range (>= {num_classes})")
    edges = _read_edges(edge_path)
    if edges.size and edges.max() >= n:
        raise DatasetError(f"{edge_path}: node id {int(edges.max())} >= node count {n}")
    splits = _read_splits(split_path)
    splits.validate(n)
    graph = graph_from_edges(n, edges, features, labels, num_classes, splits)
    graph.validate()
    return graph, splits


def load_dataset_dir(directory, num_classes=None):
    """Load a dataset directory laid out with :data:`DEFAULT_FILENAMES`.

    A ``manifest.json`` with a ``num_classes`` entry, if present, is honored.
    """
    directory = Path(directory)
    manifest = directory / "manifest.json"
    if num_classes is None and manifest.exists():
        num_classes = json.loads(manifest.read_text()).get("num_classes")
    paths = {k: directory / v for k, v in DEFAULT_FILENAMES.items()}
    return load_dataset(paths["edges"], paths["features"], paths["labels"],
                        paths["splits"], num_classes=num_classes)


def _atomic_write(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_dataset(graph, splits, directory, manifest=None):
    """Write the dataset files (and optional manifest dict) into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    edges = graph.edge_list()
    lines = [f"# undirected edge list: {graph.num_nodes} nodes, {edges.shape[0]} edges\n"]
    lines.extend(f"{i} {j}\n" for i, j in edges.tolist())
    _atomic_write(directory / DEFAULT_FILENAMES["edges"], "".join(lines))
    _atomic_write(directory / DEFAULT_FILENAMES["features"],
                  "".join(",".join(repr(v) for v in row) + "\n" for row in graph.features.tolist()))
    _atomic_write(directory / DEFAULT_FILENAMES["labels"],
                  "".join(f"{v}\n" for v in graph.labels.tolist()))
    _atomic_write(directory / DEFAULT_FILENAMES["splits"], json.dumps(splits.to_json()) + "\n")
    written = [directory / name for name in DEFAULT_FILENAMES.values()]
    if manifest is not None:
        _atomic_write(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        written.append(directory / "manifest.json")
    return written


# --------------------------------------------------------------------------
# Synthetic graphs
# --------------------------------------------------------------------------

def _triangle_pairs(index, n):
    """Decode flat indices into pairs (i, j), i < j, of the n-node upper triangle."""
    index = np.asarray(index, dtype=np.int64)
    i = (n - 2 - np.floor(np.sqrt(-8.0 * index + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = index + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2
    return i, j


def random_splits(num_nodes, rng, label_rate=0.05, val_rate=0.1, test_rate=None):
    """Uniform train/val/test split; test defaults to every remaining node."""
    perm = rng.permutation(num_nodes)
    n_train = max(1, int(round(label_rate * num_nodes)))
    n_val = int(round(val_rate * num_nodes))
    rest = perm[n_train + n_val:]
    if test_rate is not None:
        rest = rest[:int(round(test_rate * num_nodes))]
    return SplitMasks(perm[:n_train], perm[n_train:n_train + n_val], rest)


def generate_sbm(blocks, nodes_per_block, p_in, p_out, feature_dim=None, feature_noise=0.0,
                 seed=0, label_rate=0.05, val_rate=0.1):
    """Stochastic block model with one-hot-plus-noise features.

    Each unordered node pair is an independent Bernoulli trial with
    probability ``p_in`` (same block) or ``p_out``. Trials are realised per
    block pair by drawing a binomial edge count and then that many distinct
    pairs uniformly, which has the same distribution and scales to large
    sparse graphs. Returns ``(graph, splits)``.
    """
    if blocks < 1 or nodes_per_block < 0:
        raise ValueError("need blocks >= 1 and nodes_per_block >= 0")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError(f"invalid probabilities: need 0 <= p_out <= p_in <= 1, got {p_out}, {p_in}")
    feature_dim = blocks if feature_dim is None else feature_dim
    if feature_dim < blocks:
        raise ValueError("feature_dim must be >= blocks")
    rng = np.random.default_rng(seed)
    n = blocks * nodes_per_block
    b = nodes_per_block
    chunks = []
    for a in range(blocks):
        for c in range(a, blocks):
            if a == c:
                pairs = b * (b - 1) // 2
                k = rng.binomial(pairs, p_in) if pairs else 0
                flat = rng.choice(pairs, size=k, replace=False) if k else np.empty(0, np.int64)
                i, j = _triangle_pairs(flat, b)
            else:
                pairs = b * b
                k = rng.binomial(pairs, p_out) if pairs else 0
                flat = rng.choice(pairs, size=k, replace=False) if k else np.empty(0, np.int64)
                i, j = np.divmod(np.asarray(flat, dtype=np.int64), b)
            chunks.append(np.stack([a * b + i, c * b + j], axis=1))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), np.int64)
    labels = np.repeat(np.arange(blocks, dtype=np.int64), b)
    features = rng.normal(0.0, feature_noise, size=(n, feature_dim)) if feature_noise > 0 \
        else np.zeros((n, feature_dim))
    features[np.arange(n), labels] += 1.0
    splits = random_splits(n, rng, label_rate, val_rate)
    graph = graph_from_edges(n, edges, features, labels, blocks, splits)
    return graph, splits


# --------------------------------------------------------------------------
# Normalization and subgraphs
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """D^-1/2 (A + I) D^-1/2 in CSR form (self-loops included)."""

    num_nodes: int
    offsets: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def matmul(self, dense):
        dense = np.ascontiguousarray(dense, dtype=np.float64)
        if dense.shape[0] != self.num_nodes:
            raise ValueError(f"dimension mismatch: adjacency is {self.num_nodes}x{self.num_nodes}, "
                             f"operand has {dense.shape[0]} rows")
        return kernels.csr_spmm(self.offsets, self.indices, self.weights, dense)

    def weight(self, i, j):
        row = self.indices[self.offsets[i]:self.offsets[i + 1]]
        pos = np.searchsorted(row, j)
        if pos < row.size and row[pos] == j:
            return float(self.weights[self.offsets[i] + pos])
        return 0.0

    def to_dense(self):
        out = np.zeros((self.num_nodes, self.num_nodes))
        rows = np.repeat(np.arange(self.num_nodes), np.diff(self.offsets))
        out[rows, self.indices] = self.weights
        return out


def normalize_adjacency(csr):
    """Normalize any object exposing ``num_nodes``, ``offsets`` and ``neighbors``.

    Degrees are recomputed from the given CSR, so a subgraph is normalized
    with its local degrees.
    """
    offsets, indices, weights = kernels.normalized_with_self_loops(
        np.ascontiguousarray(csr.offsets, dtype=np.int64),
        np.ascontiguousarray(csr.neighbors, dtype=np.int64))
    for arr in (offsets, indices, weights):
        arr.setflags(write=False)
    return NormalizedAdjacency(int(csr.num_nodes), offsets, indices, weights)


@dataclass(frozen=True, eq=False)
class Subgraph:
    """Induced subgraph with local CSR and global<->local id maps.

    Local id ``k`` corresponds to ``global_ids[k]``. Features and labels are
    sliced from the parent graph on access so that a batch of subgraphs does
    not hold M copies of the feature matrix.
    """

    parent: Graph = field(repr=False)
    global_ids: np.ndarray
    offsets: np.ndarray
    neighbors: np.ndarray
    splits: SplitMasks | None = None
    restart_count: int = 0
    seed_node: int = -1

    @property
    def num_nodes(self):
        return int(self.global_ids.shape[0])

    @property
    def num_edges(self):
        return self.neighbors.shape[0] // 2

    @property
    def features(self):
        return self.parent.features[self.global_ids]

    @property
    def labels(self):
        return self.parent.labels[self.global_ids]

    def local_ids(self, global_ids):
        """Map global ids (all of which must be members) to local ids."""
        global_ids = np.asarray(global_ids, dtype=np.int64)
        pos = np.searchsorted(self.global_ids, global_ids)
        if np.any(pos >= self.num_nodes) or np.any(self.global_ids[np.minimum(pos, self.num_nodes - 1)] != global_ids):
            raise KeyError("node not in subgraph")
        return pos

    def edge_list(self, local=False):
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(self.offsets))
        keep = rows < self.neighbors
        pairs = np.stack([rows[keep], self.neighbors[keep]], axis=1)
        return pairs if local else self.global_ids[pairs]

    def is_connected(self):
        """Union-find over the local CSR."""
        n = self.num_nodes
        if n <= 1:
            return True
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        components = n
        for i, j in self.edge_list(local=True).tolist():
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
                components -= 1
        return components == 1

    def to_json(self):
        return {"nodes": self.global_ids.tolist(), "edges": self.edge_list().tolist(),
                "restart_count": self.restart_count}


def induced_subgraph(graph, node_ids, restart_count=0, seed_node=-1):
    """Subgraph on ``node_ids`` containing every edge of ``graph`` between them."""
    ids = np.asarray(node_ids, dtype=np.int64).ravel()
    if ids.size and (ids.min() < 0 or ids.max() >= graph.num_nodes):
        raise IndexError(f"node id outside [0, {graph.num_nodes})")
    ids = np.unique(ids)
    local_offsets, local_neighbors = kernels.induced_csr(graph.offsets, graph.neighbors,
                                                        ids, graph.num_nodes)
    splits = None
    if graph.splits is not None:
        parts = []
        for name in ("train", "val", "test"):
            member = getattr(graph.splits, name)
            pos = np.searchsorted(ids, member)
            hit = (pos < ids.size) & (ids[np.minimum(pos, max(ids.size - 1, 0))] == member) \
                if ids.size else np.zeros(member.size, bool)
            parts.append(pos[hit])
        splits = SplitMasks(*parts)
    for arr in (ids, local_offsets, local_neighbors):
        arr.setflags(write=False)
    return Subgraph(graph, ids, local_offsets, local_neighbors, splits, int(restart_count), int(seed_node))


def expected_sbm_edges(blocks, nodes_per_block, p_in, p_out):
    """Mean and standard deviation of the SBM edge count."""
    within = blocks * math.comb(nodes_per_block, 2)
    across = math.comb(blocks, 2) * nodes_per_block ** 2
    mean = within * p_in + across * p_out
    var = within * p_in * (1 - p_in) + across * p_out * (1 - p_out)
    return mean, math.sqrt(var)
