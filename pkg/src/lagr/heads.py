"""Node- and edge-label distributions over the aligned graph.

Shapes below use B for batch, N for tokens, L for layers, M = L * N for
slots.  Slot ``l * N + i`` belongs to layer ``l`` and position ``i``.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .graphs import AlignedGraph
from .nn import Module


class NodeHead(Module):
    """One d -> |V_n| projection per layer; logits of all layers are concatenated."""

    def __init__(self, d, n_labels, layers, rng):
        self.layers = layers
        self.n_labels = n_labels
        self.weight = T.uniform_init((d, layers * n_labels), d, rng)
        self.bias = T.zeros((layers * n_labels,))

    def logits(self, h):
        b, n, _ = h.shape
        out = (h @ self.weight + self.bias).reshape(b, n, self.layers, self.n_labels)
        return out.transpose(0, 2, 1, 3).reshape(b, self.layers * n, self.n_labels)

    def __call__(self, h):
        """Log-probabilities, shape (B, M, |V_n|)."""
        return T.log_softmax(self.logits(h), axis=-1)


class EdgeHead(Module):
    """Per-label, per-layer query and key projections d -> d_e.

    The score of label ``alpha`` on pair (j, k) is the unscaled dot product
    of query row j with key row k; the softmax runs over labels.
    """

    def __init__(self, d, n_labels, layers, rng):
        d_e = d // n_labels
        if d_e < 1:
            raise ValueError(f"edge label vocabulary ({n_labels}) is larger than d={d}")
        self.layers = layers
        self.n_labels = n_labels
        self.d_e = d_e
        width = layers * n_labels * d_e
        self.wq = T.uniform_init((d, width), d, rng)
        self.bq = T.zeros((width,))
        self.wk = T.uniform_init((d, width), d, rng)
        self.bk = T.zeros((width,))

    def _project(self, h, w, b):
        bsz, n, _ = h.shape
        x = (h @ w + b).reshape(bsz, n, self.layers, self.n_labels, self.d_e)
        return x.transpose(0, 3, 2, 1, 4).reshape(bsz, self.n_labels, self.layers * n, self.d_e)

    def logits(self, h):
        q = self._project(h, self.wq, self.bq)
        k = self._project(h, self.wk, self.bk)
        return (q @ k.T).transpose(0, 2, 3, 1)

    def __call__(self, h):
        """Log-probabilities, shape (B, M, M, |V_e|)."""
        return T.log_softmax(self.logits(h), axis=-1)


def _batched(h):
    return h if h.ndim == 3 else h.reshape(1, *h.shape)


def node_distribution(head, h):
    """Probabilities pi of shape (M, |V_n|) for a single (N, d) encoding."""
    return T.softmax(head.logits(_batched(h)), axis=-1)[0]


def edge_distribution(head, h):
    """Probabilities rho of shape (M, M, |V_e|) for a single (N, d) encoding."""
    return T.softmax(head.logits(_batched(h)), axis=-1)[0]


def supervised_loss(node_logp, edge_logp, z, xi, node_mask=None, edge_mask=None):
    """Negative log-likelihood of the aligned target ``(z, xi)``.

    Works on a single example (``node_logp`` of shape (M, V_n)) or a batch
    (B, M, V_n); a batch returns the mean over examples of the per-example
    sums.  Masks zero out padded slots and pairs.
    """
    node_ll = T.pick(node_logp, z)
    edge_ll = T.pick(edge_logp, xi)
    if node_mask is not None:
        node_ll = node_ll * T.Tensor(node_mask)
    if edge_mask is not None:
        edge_ll = edge_ll * T.Tensor(edge_mask)
    total = node_ll.sum() + edge_ll.sum()
    if node_logp.ndim == 3:
        total = total * (1.0 / node_logp.shape[0])
    return -total


def decode_argmax(node_scores, edge_scores):
    """Label ids maximising each slot and pair independently.

    Accepts probabilities or log-probabilities; ties go to the lowest id.
    """
    node_scores = node_scores.data if isinstance(node_scores, T.Tensor) else node_scores
    edge_scores = edge_scores.data if isinstance(edge_scores, T.Tensor) else edge_scores
    return np.argmax(node_scores, axis=-1), np.argmax(edge_scores, axis=-1)


def decode_graph(node_scores, edge_scores, n, layers, node_vocab, edge_vocab):
    """Argmax decode one example into an :class:`AlignedGraph`."""
    z, xi = decode_argmax(node_scores, edge_scores)
    return AlignedGraph.from_ids(n, layers, z, xi, node_vocab, edge_vocab)
