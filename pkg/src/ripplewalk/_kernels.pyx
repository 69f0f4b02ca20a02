# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CSR kernels: SpMM, neighbor gathering, induced-subgraph
extraction and symmetric normalization with self-loops.

Index arrays are int64, values float64. Outputs match ``_fallback`` exactly
in layout; SpMM accumulates each row in stored-column order.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef cnp.int64_t idx_t


def csr_spmm(const idx_t[::1] offsets, const idx_t[::1] indices,
             const double[::1] weights, const double[:, ::1] dense):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t k = dense.shape[1]
    out_arr = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, c
    cdef idx_t p, j
    cdef double w
    with nogil:
        for i in range(n):
            for p in range(offsets[i], offsets[i + 1]):
                j = indices[p]
                w = weights[p]
                for c in range(k):
                    out[i, c] += w * dense[j, c]
    return out_arr


def gather_neighbors(const idx_t[::1] offsets, const idx_t[::1] indices, nodes):
    cdef const idx_t[::1] nv = np.ascontiguousarray(nodes, dtype=np.int64)
    cdef Py_ssize_t m = nv.shape[0]
    cdef Py_ssize_t a, total = 0
    cdef idx_t p, pos = 0
    for a in range(m):
        total += offsets[nv[a] + 1] - offsets[nv[a]]
    out_arr = np.empty(total, dtype=np.int64)
    cdef idx_t[::1] out = out_arr
    with nogil:
        for a in range(m):
            for p in range(offsets[nv[a]], offsets[nv[a] + 1]):
                out[pos] = indices[p]
                pos += 1
    return out_arr


def induced_csr(const idx_t[::1] offsets, const idx_t[::1] indices, node_ids,
                Py_ssize_t num_nodes):
    cdef const idx_t[::1] ids = np.ascontiguousarray(node_ids, dtype=np.int64)
    cdef Py_ssize_t k = ids.shape[0]
    lookup_arr = np.full(num_nodes, -1, dtype=np.int64)
    cdef idx_t[::1] lookup = lookup_arr
    local_offsets_arr = np.zeros(k + 1, dtype=np.int64)
    cdef idx_t[::1] loff = local_offsets_arr
    cdef Py_ssize_t a
    cdef idx_t p, loc, count = 0
    for a in range(k):
        lookup[ids[a]] = a
    with nogil:
        for a in range(k):
            for p in range(offsets[ids[a]], offsets[ids[a] + 1]):
                if lookup[indices[p]] >= 0:
                    count += 1
            loff[a + 1] = count
    out_arr = np.empty(count, dtype=np.int64)
    cdef idx_t[::1] out = out_arr
    cdef idx_t pos = 0
    with nogil:
        for a in range(k):
            for p in range(offsets[ids[a]], offsets[ids[a] + 1]):
                loc = lookup[indices[p]]
                if loc >= 0:
                    out[pos] = loc
                    pos += 1
    return local_offsets_arr, out_arr


def normalized_with_self_loops(const idx_t[::1] offsets, const idx_t[::1] indices):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    dinv_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] dinv = dinv_arr
    new_offsets_arr = np.empty(n + 1, dtype=np.int64)
    cdef idx_t[::1] noff = new_offsets_arr
    cdef Py_ssize_t nnz = indices.shape[0] + n
    cols_arr = np.empty(nnz, dtype=np.int64)
    vals_arr = np.empty(nnz, dtype=np.float64)
    cdef idx_t[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t i
    cdef idx_t p, j, pos = 0
    cdef bint placed
    with nogil:
        for i in range(n):
            dinv[i] = 1.0 / sqrt(<double>(offsets[i + 1] - offsets[i]) + 1.0)
        for i in range(n):
            noff[i] = pos
            placed = False
            for p in range(offsets[i], offsets[i + 1]):
                j = indices[p]
                if not placed and j > i:
                    cols[pos] = i
                    vals[pos] = dinv[i] * dinv[i]
                    pos += 1
                    placed = True
                cols[pos] = j
                vals[pos] = dinv[i] * dinv[j]
                pos += 1
            if not placed:
                cols[pos] = i
                vals[pos] = dinv[i] * dinv[i]
                pos += 1
        noff[n] = pos
    return new_offsets_arr, cols_arr, vals_arr
