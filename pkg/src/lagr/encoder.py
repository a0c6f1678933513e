"""Token vocabulary and a pre-norm Transformer encoder.

Positional embeddings are learned and scaled by 1/sqrt(d) when added to
the token embeddings (positional embedding downscaling); both tables are
He-initialised.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .nn import LayerNorm, Linear, Module

PAD = "<pad>"
UNK = "<unk>"


class Vocab:
    """Token <-> id map with reserved padding (0) and unknown (1) ids."""

    def __init__(self, tokens=()):
        self.itos = [PAD, UNK]
        self.stoi = {PAD: 0, UNK: 1}
        for tok in tokens:
            self.add(tok)

    @classmethod
    def from_corpus(cls, sentences):
        """Sorted unique tokens, so the ids are stable for a given corpus."""
        return cls(sorted({tok for sent in sentences for tok in sent}))

    def add(self, token):
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    @property
    def pad_id(self):
        return 0

    @property
    def unk_id(self):
        return 1

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def encode(self, tokens):
        return [self.stoi.get(t, 1) for t in tokens]

    def save(self, path):
        Path(path).write_text("\n".join(self.itos) + "\n")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls.from_list(lines)

    @classmethod
    def from_list(cls, itos):
        if list(itos[:2]) != [PAD, UNK]:
            raise ValueError("vocab file must start with the padding and unknown tokens")
        vocab = cls()
        for tok in itos[2:]:
            vocab.add(tok)
        return vocab


def tokenize(utterance, vocab):
    """Whitespace tokenisation followed by id lookup."""
    tokens = utterance.split()
    if not tokens:
        raise ValueError("cannot tokenize an empty utterance")
    return vocab.encode(tokens)


@dataclass
class EncoderConfig:
    d: int = 64
    layers: int = 2
    heads: int = 4
    ff: int = 256
    dropout: float = 0.1
    mode: str = "shared"
    max_len: int = 64

    def __post_init__(self):
        for name in ("d", "layers", "heads", "ff", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"EncoderConfig.{name} must be positive")
        if self.d % self.heads:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.mode not in ("shared", "separate"):
            raise ValueError(f"mode must be 'shared' or 'separate', got {self.mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self):
        return asdict(self)


class SelfAttention(Module):
    def __init__(self, d, heads, rng):
        self.heads = heads
        self.qkv = Linear(d, 3 * d, rng)
        self.out = Linear(d, d, rng)

    def __call__(self, x, key_bias):
        b, n, d = x.shape
        dh = d // self.heads
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, dh).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.T) * (1.0 / math.sqrt(dh))
        if key_bias is not None:
            scores = scores + key_bias
        attn = T.softmax(scores, axis=-1)
        ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(b, n, d)
        return self.out(ctx), attn


class Block(Module):
    def __init__(self, cfg, rng):
        self.ln1 = LayerNorm(cfg.d)
        self.attn = SelfAttention(cfg.d, cfg.heads, rng)
        self.ln2 = LayerNorm(cfg.d)
        self.ff1 = Linear(cfg.d, cfg.ff, rng)
        self.ff2 = Linear(cfg.ff, cfg.d, rng)
        self.p = cfg.dropout

    def __call__(self, x, key_bias, train, rng):
        h, attn = self.attn(self.ln1(x), key_bias)
        x = x + T.dropout(h, self.p, rng, train)
        h = self.ff2(T.dropout(T.relu(self.ff1(self.ln2(x))), self.p, rng, train))
        return x + T.dropout(h, self.p, rng, train), attn


class TransformerEncoder(Module):
    """Maps token ids (B, N) to contextual vectors (B, N, d)."""

    def __init__(self, vocab_size, cfg, rng):
        self.cfg = cfg
        self.tok = T.he_init((vocab_size, cfg.d), cfg.d, rng)
        self.pos = T.he_init((cfg.max_len, cfg.d), cfg.d, rng)
        self.blocks = [Block(cfg, rng) for _ in range(cfg.layers)]
        self.ln_f = LayerNorm(cfg.d)

    def positional_embed(self, ids):
        ids = np.atleast_2d(ids)
        n = ids.shape[1]
        if n > self.cfg.max_len:
            raise ValueError(f"sequence of length {n} exceeds max_len={self.cfg.max_len}")
        pos = self.pos[:n] * (1.0 / math.sqrt(self.cfg.d))
        return T.embedding(self.tok, ids) + pos

    def __call__(self, ids, lengths=None, train=False, rng=None, return_attention=False):
        squeeze = np.ndim(ids) == 1
        ids = np.atleast_2d(np.asarray(ids))
        if train and self.cfg.dropout > 0 and rng is None:
            raise ValueError("training mode needs an explicit rng for dropout")
        key_bias = None
        if lengths is not None:
            lengths = np.asarray(lengths)
            padded = np.arange(ids.shape[1])[None, :] >= lengths[:, None]
            if padded.any():
                key_bias = np.where(padded, -1e9, 0.0).astype(T.default_dtype())[:, None, None, :]
        x = T.dropout(self.positional_embed(ids), self.cfg.dropout, rng, train)
        attns = []
        for block in self.blocks:
            x, attn = block(x, key_bias, train, rng)
            attns.append(attn.data)
        x = self.ln_f(x)
        if squeeze:
            x = x[0]
        return (x, attns) if return_attention else x


class Encoder(Module):
    """One shared encoder, or separate ones for node and edge prediction.

    In separate mode the whole stack, embeddings included, is duplicated.
    """

    def __init__(self, vocab_size, cfg, rng):
        self.cfg = cfg
        self.node_encoder = TransformerEncoder(vocab_size, cfg, rng)
        self.edge_encoder = TransformerEncoder(vocab_size, cfg, rng) if cfg.mode == "separate" else None

    def __call__(self, ids, lengths=None, train=False, rng=None):
        """Return ``(H_node, H_edge)``; both are the same tensor when shared."""
        h_node = self.node_encoder(ids, lengths, train, rng)
        if self.edge_encoder is None:
            return h_node, h_node
        return h_node, self.edge_encoder(ids, lengths, train, rng)
