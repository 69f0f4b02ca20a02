"""Central finite-difference gradient oracle for the GCN loss."""
import numpy as np

from ripplewalk.gcn import GcnModel, gcn_backward, gcn_forward, glorot_init, masked_cross_entropy
from ripplewalk.graph import normalize_adjacency

from conftest import make_graph


def random_instance(rng):
    n = int(rng.integers(2, 11))
    depth = int(rng.integers(1, 5))
    widths = [int(rng.integers(1, 6)) for _ in range(depth)]
    classes = int(rng.integers(2, 6))
    dims = widths + [classes]
    p = rng.uniform(0.1, 0.8)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    g = make_graph(n, np.array(pairs, dtype=np.int64).reshape(-1, 2), num_classes=classes,
                   features=rng.normal(size=(n, dims[0])), labels=rng.integers(classes, size=n))
    model = glorot_init(dims, rng)
    mask = np.sort(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
    return g, model, mask


def loss_of(model, adj, g, mask):
    return masked_cross_entropy(gcn_forward(model, adj, g.features), g.labels, mask)


def max_relative_error(g, model, mask, h=1e-6):
    """Largest elementwise |analytic - fd| / max(|analytic|, |fd|, 1e-6)."""
    adj = normalize_adjacency(g)
    trace = gcn_forward(model, adj, g.features, training=True)
    grads = gcn_backward(model, trace, adj, g.labels, mask)
    worst = 0.0
    for l, w in enumerate(model.weights):
        for idx in np.ndindex(*w.shape):
            plus = model.copy()
            plus.weights[l][idx] += h
            minus = model.copy()
            minus.weights[l][idx] -= h
            fd = (loss_of(plus, adj, g, mask) - loss_of(minus, adj, g, mask)) / (2 * h)
            a = grads[l][idx]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-6))
    return worst


def fd_oracle_errors(count=50, seed=0):
    rng = np.random.default_rng(seed)
    return [max_relative_error(*random_instance(rng)) for _ in range(count)]
