import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ripplewalk import kernels, _fallback
from ripplewalk.graph import csr_from_edges

BACKENDS = kernels.backends()


@st.composite
def small_graphs(draw, max_nodes=20):
    n = draw(st.integers(1, max_nodes))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))
    offsets, neighbors = csr_from_edges(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))
    return n, offsets, neighbors


def dense_adj(n, offsets, neighbors):
    a = np.zeros((n, n))
    rows = np.repeat(np.arange(n), np.diff(offsets))
    a[rows, neighbors] = 1.0
    return a


def test_fallback_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("name", sorted(BACKENDS))
@settings(max_examples=60, deadline=None)
@given(g=small_graphs(), width=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_spmm_matches_dense(name, g, width, seed):
    mod = BACKENDS[name]
    n, offsets, neighbors = g
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=neighbors.size)
    dense = rng.normal(size=(n, width))
    a = np.zeros((n, n))
    rows = np.repeat(np.arange(n), np.diff(offsets))
    a[rows, neighbors] = weights
    np.testing.assert_allclose(mod.csr_spmm(offsets, neighbors, weights, dense), a @ dense,
                               rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@settings(max_examples=60, deadline=None)
@given(g=small_graphs())
def test_normalization_matches_dense(name, g):
    mod = BACKENDS[name]
    n, offsets, neighbors = g
    a = dense_adj(n, offsets, neighbors) + np.eye(n)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    expect = dinv[:, None] * a * dinv[None, :]
    off, idx, w = mod.normalized_with_self_loops(offsets, neighbors)
    got = np.zeros((n, n))
    got[np.repeat(np.arange(n), np.diff(off)), idx] = w
    np.testing.assert_allclose(got, expect, rtol=0, atol=1e-12)
    for i in range(n):
        row = idx[off[i]:off[i + 1]]
        assert np.all(np.diff(row) > 0)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@settings(max_examples=60, deadline=None)
@given(g=small_graphs(), data=st.data())
def test_induced_csr_matches_dense(name, g, data):
    mod = BACKENDS[name]
    n, offsets, neighbors = g
    ids = np.array(sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1))), dtype=np.int64)
    off, nb = mod.induced_csr(offsets, neighbors, ids, n)
    sub = dense_adj(n, offsets, neighbors)[np.ix_(ids, ids)]
    np.testing.assert_array_equal(dense_adj(ids.size, off, nb), sub)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_gather_neighbors(name):
    offsets, neighbors = csr_from_edges(4, np.array([(0, 1), (1, 2), (2, 3)]))
    got = BACKENDS[name].gather_neighbors(offsets, neighbors, np.array([1, 2], dtype=np.int64))
    assert sorted(got.tolist()) == [0, 1, 2, 3]


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
@settings(max_examples=40, deadline=None)
@given(g=small_graphs(40), seed=st.integers(0, 2**32 - 1))
def test_backends_agree_bitwise(g, seed):
    cy = BACKENDS["cython"]
    n, offsets, neighbors = g
    a = _fallback.normalized_with_self_loops(offsets, neighbors)
    b = cy.normalized_with_self_loops(offsets, neighbors)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    dense = np.random.default_rng(seed).normal(size=(n, 3))
    np.testing.assert_allclose(_fallback.csr_spmm(*a, dense), cy.csr_spmm(*b, dense), rtol=1e-14, atol=1e-14)


def test_env_forces_python_backend():
    import os
    import subprocess
    import sys
    env = dict(os.environ, RWT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import ripplewalk; print(ripplewalk.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True).stdout.strip()
    assert out == "python"
