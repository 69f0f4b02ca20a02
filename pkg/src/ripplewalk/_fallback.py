"""Vectorised numpy/scipy implementations of the CSR kernels.

Used when the compiled ``_kernels`` extension is unavailable, or when
``RWT_PURE_PYTHON=1`` is set. Every function here has the same signature and
output layout as its counterpart in ``_kernels.pyx``.
"""
import numpy as np
import scipy.sparse as sp


def csr_spmm(offsets, indices, weights, dense):
    n = offsets.shape[0] - 1
    mat = sp.csr_matrix((weights, indices, offsets), shape=(n, dense.shape[0]))
    return np.ascontiguousarray(mat @ dense, dtype=np.float64)


def gather_neighbors(offsets, indices, nodes):
    """Concatenate the neighbor lists of ``nodes`` (in the order given)."""
    nodes = np.asarray(nodes, dtype=np.int64)
    starts = offsets[nodes]
    lengths = offsets[nodes + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    shift = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
    return indices[shift + np.arange(total, dtype=np.int64)]


def induced_csr(offsets, indices, node_ids, num_nodes):
    node_ids = np.asarray(node_ids, dtype=np.int64)
    k = node_ids.shape[0]
    lookup = np.full(num_nodes, -1, dtype=np.int64)
    lookup[node_ids] = np.arange(k, dtype=np.int64)
    lengths = offsets[node_ids + 1] - offsets[node_ids]
    local = lookup[gather_neighbors(offsets, indices, node_ids)]
    keep = local >= 0
    rows = np.repeat(np.arange(k, dtype=np.int64), lengths)[keep]
    counts = np.bincount(rows, minlength=k)
    local_offsets = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(counts, out=local_offsets[1:])
    return local_offsets, local[keep]


def normalized_with_self_loops(offsets, indices):
    n = offsets.shape[0] - 1
    degree = np.diff(offsets).astype(np.float64) + 1.0
    dinv = 1.0 / np.sqrt(degree)
    rows = np.concatenate([np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets)),
                           np.arange(n, dtype=np.int64)])
    cols = np.concatenate([indices.astype(np.int64), np.arange(n, dtype=np.int64)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    new_offsets = offsets.astype(np.int64) + np.arange(n + 1, dtype=np.int64)
    return new_offsets, cols, dinv[rows] * dinv[cols]
