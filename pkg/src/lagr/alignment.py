"""Latent alignment inference for weakly supervised training.

The MAP alignment of an unaligned target to the aligned slots is
approximated by node-only minimum-cost matchings (optionally perturbed with
Gaussian noise), each rescored with the full node + edge log-likelihood.
Training then follows hard EM: the winning alignment is treated as a
constant and the model maximises the target likelihood under it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .kernels import hungarian_kernel

log = logging.getLogger(__name__)


@dataclass
class AlignmentConfig:
    k: int = 1
    sigma: float = 0.0
    cache_enabled: bool = False
    # Prepend the noise-free matching as candidate 1 even when sigma > 0.
    include_noiseless: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"K must be >= 1, got {self.k}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class Alignment:
    """``a[j]`` is the aligned slot that unaligned slot ``j`` is placed at."""

    a: np.ndarray
    score: float

    def to_json(self):
        return {"a": [int(x) for x in self.a], "J": float(self.score)}


def hungarian(cost):
    """Minimum-cost perfect matching of a square cost matrix.

    Returns ``a`` with ``a[j]`` the column assigned to row ``j``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains NaN or Inf")
    if cost.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return hungarian_kernel(cost)


def node_cost(node_logp, s):
    """``cost[j, i] = -log p(z_i = s_j | x)``."""
    return -np.asarray(node_logp, dtype=np.float64)[:, s].T


def candidate_alignments(node_logp, s, cfg, rng):
    """K permutations from noisy node-only matching problems.

    With ``sigma == 0`` every candidate is the same noise-free matching.
    """
    base = node_cost(node_logp, s)
    m = base.shape[0]
    if cfg.sigma == 0:
        a = hungarian(base)
        return [a.copy() for _ in range(cfg.k)]
    out = []
    if cfg.include_noiseless:
        out.append(hungarian(base))
    while len(out) < cfg.k:
        out.append(hungarian(base + rng.normal(0.0, cfg.sigma, size=(m, m))))
    return out


def score_alignment(a, s, e, node_logp, edge_logp):
    """Joint log-likelihood of target ``(s, e)`` placed by ``a``, nulls included."""
    a = np.asarray(a)
    node = np.asarray(node_logp)[a, s].sum(dtype=np.float64)
    edge = np.asarray(edge_logp)[a[:, None], a[None, :], e].sum(dtype=np.float64)
    return float(node + edge)


def select_map_alignment(candidates, cached, s, e, node_logp, edge_logp):
    """Highest-scoring alignment among ``candidates`` and the cached one.

    Ties go to the earliest candidate; the cached alignment is considered
    last.
    """
    if not len(candidates) and cached is None:
        raise ValueError("need at least one candidate alignment")
    pool = list(candidates)
    if cached is not None:
        pool.append(cached.a if isinstance(cached, Alignment) else cached)
    best, best_score = None, -np.inf
    for a in pool:
        score = score_alignment(a, s, e, node_logp, edge_logp)
        if best is None or score > best_score:
            best, best_score = a, score
    return Alignment(np.asarray(best, dtype=np.int64), best_score)


def infer_alignment(node_logp, edge_logp, s, e, cfg, rng, cached=None):
    """Candidates + MAP selection for one example (log-probs as numpy arrays)."""
    candidates = candidate_alignments(node_logp, s, cfg, rng)
    if cached is not None and len(cached.a) != len(s):
        log.warning("cached alignment has %d slots, target has %d; ignoring it", len(cached.a), len(s))
        cached = None
    return select_map_alignment(candidates, cached if cfg.cache_enabled else None, s, e, node_logp, edge_logp)


def aligned_ids(a, s, e):
    """Aligned targets ``z[a_j] = s_j`` and ``xi[a_j, a_k] = e_jk``."""
    a = np.asarray(a)
    z = np.empty_like(s)
    z[a] = s
    xi = np.empty_like(e)
    xi[a[:, None], a[None, :]] = e
    return z, xi


class AlignmentCache:
    """Last selected alignment per example id."""

    def __init__(self):
        self._store = {}

    def get(self, key):
        return self._store.get(key)

    def put(self, key, alignment):
        self._store[key] = alignment

    def __len__(self):
        return len(self._store)

    def __contains__(self, key):
        return key in self._store

    def items(self):
        return self._store.items()

    def to_json(self):
        return {str(k): v.to_json() for k, v in self._store.items()}

    @classmethod
    def from_json(cls, obj):
        cache = cls()
        for key, val in obj.items():
            cache.put(key, Alignment(np.asarray(val["a"], dtype=np.int64), float(val["J"])))
        return cache

    def dump_jsonl(self, path):
        """One ``{example_id, a, J}`` record per line."""
        with open(path, "w") as fh:
            for key, al in self._store.items():
                fh.write(json.dumps({"example_id": key, **al.to_json()}) + "\n")


def load_alignment_dump(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                out[str(rec["example_id"])] = Alignment(np.asarray(rec["a"], dtype=np.int64), float(rec["J"]))
    return out


def weak_train_step(batch, model, cfg, optimizer, cache, rng, max_grad_norm=None, dropout_rng=None):
    """One hard-EM update on a batch of examples with unaligned targets.

    A single training-mode forward pass provides both the log-probabilities
    used for alignment inference and the differentiable loss; the selected
    alignments are constants w.r.t. the gradient.  Returns
    ``(loss, alignments)`` where ``alignments`` maps example id to the
    selected :class:`Alignment`.
    """
    from .optim import grad_clip

    live = [ex for ex in batch.examples if len(ex.s_ids)]
    if len(live) != len(batch.examples):
        log.warning("skipping %d examples without slots", len(batch.examples) - len(live))
    node_logp, edge_logp = model(batch.ids, batch.lengths, train=True, rng=dropout_rng or rng)
    selected = {}
    for b, ex in enumerate(batch.examples):
        if not len(ex.s_ids):
            batch.node_mask[b] = 0.0
            batch.edge_mask[b] = 0.0
            continue
        nl, el = batch.example_view(node_logp.data, edge_logp.data, b)
        cached = cache.get(ex.id) if cache is not None else None
        best = infer_alignment(nl, el, ex.s_ids, ex.e_ids, cfg, rng, cached)
        if cache is not None:
            cache.put(ex.id, best)
        selected[ex.id] = best
        batch.set_target(b, *aligned_ids(best.a, ex.s_ids, ex.e_ids))
    loss = batch.loss(node_logp, edge_logp)
    optimizer.zero_grad()
    loss.backward()
    if max_grad_norm:
        grad_clip(optimizer.params, max_grad_norm)
    optimizer.step()
    return loss.item(), selected
