"""Graph convolutional network with hand-derived gradients.

Layer ``l`` computes ``P = A @ (D @ W_l)`` where ``D`` is the (dropped-out)
layer input and ``A`` the normalized adjacency; hidden layers apply ReLU and
the last layer feeds a row-wise log-softmax. There are no bias terms.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np


class DivergenceError(FloatingPointError):
    """Raised when a forward pass produces non-finite values."""


class RowMeter:
    """Tracks the largest row count of any aggregation operand seen.

    This is the memory proxy: every dense matrix in forward/backward has as
    many rows as the adjacency it is aggregated over.
    """

    def __init__(self):
        self.peak = 0
        self.low = None
        self.observations = 0

    def observe(self, rows):
        self.observations += 1
        if rows > self.peak:
            self.peak = int(rows)
        if self.low is None or rows < self.low:
            self.low = int(rows)


@dataclass
class GcnModel:
    weights: list
    dropout: float = 0.0

    def __post_init__(self):
        if not self.weights:
            raise ValueError("model needs at least one layer")
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(f"layer dims do not chain: {a.shape} -> {b.shape}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def depth(self):
        return len(self.weights)

    @property
    def dims(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def hidden_dim(self):
        return self.weights[0].shape[1] if self.depth > 1 else 0

    def copy(self):
        return GcnModel([w.copy() for w in self.weights], self.dropout)

    def checksum(self):
        h = hashlib.sha256()
        for w in self.weights:
            h.update(np.ascontiguousarray(w, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass
class ForwardTrace:
    inputs: list          # layer inputs after dropout
    masks: list           # scaled dropout masks, or None
    pre: list             # A @ D @ W per layer
    log_probs: np.ndarray
    hidden: np.ndarray    # input of the last layer before dropout

    @property
    def num_nodes(self):
        return self.log_probs.shape[0]


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_model(cls, model, learning_rate=0.01, weight_decay=5e-4, **kw):
        return cls([np.zeros_like(w) for w in model.weights],
                   [np.zeros_like(w) for w in model.weights],
                   0, learning_rate, weight_decay, **kw)


def glorot_init(dims, rng, dropout=0.0):
    """Uniform Glorot initialization for a chain of layer widths."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"need at least two positive layer dims, got {dims}")
    weights = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    return GcnModel(weights, dropout)


def log_softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def gcn_forward(model, adj, features, training=False, rng=None, meter=None):
    features = np.asarray(features, dtype=np.float64)
    n = adj.num_nodes
    if features.ndim != 2 or features.shape[0] != n:
        raise ValueError(f"dimension mismatch: {features.shape[0]} feature rows for {n} nodes")
    if features.shape[1] != model.dims[0]:
        raise ValueError(f"dimension mismatch: {features.shape[1]} features, model expects {model.dims[0]}")
    use_dropout = training and model.dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("training with dropout needs an rng")
    keep = 1.0 - model.dropout
    h = features
    inputs, masks, pre = [], [], []
    hidden = features
    last = model.depth - 1
    for l, w in enumerate(model.weights):
        if l == last:
            hidden = h
        if use_dropout:
            mask = (rng.random(h.shape) < keep) / keep
            d = h * mask
        else:
            mask, d = None, h
        if meter is not None:
            meter.observe(d.shape[0])
        p = adj.matmul(d @ w)
        inputs.append(d)
        masks.append(mask)
        pre.append(p)
        h = np.maximum(p, 0.0) if l < last else p
    out = log_softmax(pre[-1])
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite values in forward pass")
    return ForwardTrace(inputs, masks, pre, out, hidden)


def _mask_array(mask):
    mask = np.asarray(mask, dtype=np.int64).ravel()
    if mask.size == 0:
        raise ValueError("empty mask")
    return mask


def masked_cross_entropy(trace, labels, mask):
    """Mean negative log-likelihood over the node ids in ``mask``."""
    mask = _mask_array(mask)
    logp = trace.log_probs if isinstance(trace, ForwardTrace) else np.asarray(trace)
    labels = np.asarray(labels)
    return float(-logp[mask, labels[mask]].mean())


def gcn_backward(model, trace, adj, labels, mask, meter=None):
    """Gradients of :func:`masked_cross_entropy` with respect to every weight."""
    mask = _mask_array(mask)
    labels = np.asarray(labels)
    n = trace.num_nodes
    if adj.num_nodes != n:
        raise ValueError("shape mismatch between trace and adjacency")
    counts = np.bincount(mask, minlength=n).astype(np.float64) / mask.size
    probs = np.exp(trace.log_probs)
    grad_p = probs * counts[:, None]
    grad_p[np.arange(n), labels] -= counts
    grads = [None] * model.depth
    for l in range(model.depth - 1, -1, -1):
        if meter is not None:
            meter.observe(grad_p.shape[0])
        g = adj.matmul(grad_p)              # A is symmetric, so A^T = A
        grads[l] = trace.inputs[l].T @ g
        if l == 0:
            break
        grad_h = g @ model.weights[l].T
        if trace.masks[l] is not None:
            grad_h *= trace.masks[l]
        grad_p = grad_h * (trace.pre[l - 1] > 0.0)
    return grads


def adam_step(model, grads, state):
    """One Adam update with classic L2 weight decay folded into the gradient.

    Updates ``model`` and ``state`` in place and returns both.
    """
    if len(grads) != model.depth:
        raise ValueError("gradient count does not match model depth")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for w, g, m, v in zip(model.weights, grads, state.m, state.v):
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} != weight shape {w.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * w
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        w -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return model, state


def predictions(trace):
    logp = trace.log_probs if isinstance(trace, ForwardTrace) else np.asarray(trace)
    return np.argmax(logp, axis=1)  # first maximum: ties go to the smallest class id


def accuracy(trace, labels, mask):
    mask = _mask_array(mask)
    return float(np.mean(predictions(trace)[mask] == np.asarray(labels)[mask]))


# --------------------------------------------------------------------------
# Checkpoints: 8-byte little-endian header length, JSON header, float64 payload
# --------------------------------------------------------------------------

CHECKPOINT_FORMAT = "ripplewalk-gcn"


def save_checkpoint(model, path, hyperparameters=None):
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "dims": model.dims,
        "dropout": model.dropout,
        "dtype": "<f8",
        "checksum": model.checksum(),
        "hyperparameters": hyperparameters or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for w in model.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Return ``(model, header)``."""
    with open(path, "rb") as fh:
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
        dims = header["dims"]
        weights = []
        for fan_in, fan_out in zip(dims, dims[1:]):
            raw = fh.read(8 * fan_in * fan_out)
            if len(raw) != 8 * fan_in * fan_out:
                raise ValueError(f"{path}: truncated weight payload")
            weights.append(np.frombuffer(raw, dtype="<f8").reshape(fan_in, fan_out).astype(np.float64))
    model = GcnModel(weights, header["dropout"])
    if model.checksum() != header["checksum"]:
        raise ValueError(f"{path}: checksum mismatch")
    return model, header
