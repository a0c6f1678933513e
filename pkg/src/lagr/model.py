"""Encoder + heads, plus batching helpers for the padded slot layout."""

from __future__ import annotations

import numpy as np

from .encoder import Encoder, EncoderConfig
from .heads import EdgeHead, NodeHead, supervised_loss
from .nn import Module


def slot_indices(n, n_max, layers):
    """Batched-layout slots (layer-major over ``n_max``) of an ``n``-token example."""
    return (np.arange(layers)[:, None] * n_max + np.arange(n)[None, :]).reshape(-1)


class LagrModel(Module):
    def __init__(self, vocab_size, enc_cfg, layers, n_node_labels, n_edge_labels, seed=0):
        if not isinstance(enc_cfg, EncoderConfig):
            enc_cfg = EncoderConfig(**enc_cfg)
        rng = np.random.default_rng(seed)
        self.enc_cfg = enc_cfg
        self.layers = layers
        self.encoder = Encoder(vocab_size, enc_cfg, rng)
        self.node_head = NodeHead(enc_cfg.d, n_node_labels, layers, rng)
        self.edge_head = EdgeHead(enc_cfg.d, n_edge_labels, layers, rng)

    def __call__(self, ids, lengths=None, train=False, rng=None):
        """Return node log-probs (B, M, V_n) and edge log-probs (B, M, M, V_e)."""
        ids = np.atleast_2d(ids)
        h_node, h_edge = self.encoder(ids, lengths, train, rng)
        return self.node_head(h_node), self.edge_head(h_edge)


class Batch:
    """Padded token ids plus aligned targets in the batched slot layout."""

    def __init__(self, examples, layers, with_targets=True):
        self.examples = examples
        self.layers = layers
        self.lengths = np.array([len(ex.token_ids) for ex in examples])
        self.n_max = int(self.lengths.max())
        bsz = len(examples)
        self.ids = np.zeros((bsz, self.n_max), dtype=np.int64)
        for b, ex in enumerate(examples):
            self.ids[b, : len(ex.token_ids)] = ex.token_ids
        m_max = layers * self.n_max
        self.slots = [slot_indices(int(n), self.n_max, layers) for n in self.lengths]
        self.node_mask = np.zeros((bsz, m_max))
        self.edge_mask = np.zeros((bsz, m_max, m_max))
        for b, slots in enumerate(self.slots):
            self.node_mask[b, slots] = 1.0
            self.edge_mask[b][np.ix_(slots, slots)] = 1.0
        self.z = np.zeros((bsz, m_max), dtype=np.int64)
        self.xi = np.zeros((bsz, m_max, m_max), dtype=np.int64)

    def set_target(self, b, z, xi):
        slots = self.slots[b]
        self.z[b, slots] = z
        self.xi[b, slots[:, None], slots[None, :]] = xi

    def example_view(self, node_logp, edge_logp, b):
        """Slice one example's (M, V_n) and (M, M, V_e) arrays out of batched outputs."""
        slots = self.slots[b]
        return node_logp[b][slots], edge_logp[b][slots[:, None], slots[None, :]]

    def loss(self, node_logp, edge_logp):
        return supervised_loss(node_logp, edge_logp, self.z, self.xi, self.node_mask, self.edge_mask)
