"""Shared oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from lagr import tensor as T

REL_FLOOR = 1e-6

# Each entry: name -> (fn over tensors, input factory(seed)).
OPS = {
    "add_broadcast": (lambda a, b: a + b, lambda r: [r.normal(size=(3, 4)), r.normal(size=(4,))]),
    "sub": (lambda a, b: a - b, lambda r: [r.normal(size=(2, 3)), r.normal(size=(2, 3))]),
    "mul_broadcast": (lambda a, b: a * b, lambda r: [r.normal(size=(2, 3, 4)), r.normal(size=(3, 1))]),
    "div_scalar": (lambda a: a / 3.0, lambda r: [r.normal(size=(3, 3))]),
    "scale": (lambda a: T.scale(a, -2.5), lambda r: [r.normal(size=(4,))]),
    "neg": (lambda a: -a, lambda r: [r.normal(size=(4,))]),
    "exp": (T.exp, lambda r: [r.normal(size=(3, 2))]),
    "log": (T.log, lambda r: [r.uniform(0.2, 3.0, size=(3, 2))]),
    "relu": (T.relu, lambda r: [r.choice([-1, 1], size=(5,)) * r.uniform(0.1, 2.0, size=(5,))]),
    "gelu": (T.gelu, lambda r: [r.normal(size=(2, 5))]),
    "dropout": (lambda a: T.dropout(a, 0.3, np.random.default_rng(7), train=True), lambda r: [r.normal(size=(4, 4))]),
    "sum_axis": (lambda a: T.tsum(a, axis=1), lambda r: [r.normal(size=(2, 3, 4))]),
    "mean_keepdims": (lambda a: T.mean(a, axis=-1, keepdims=True), lambda r: [r.normal(size=(3, 4))]),
    "matmul": (lambda a, b: a @ b, lambda r: [r.normal(size=(3, 4)), r.normal(size=(4, 2))]),
    "matmul_batched": (lambda a, b: a @ b, lambda r: [r.normal(size=(2, 3, 4)), r.normal(size=(4, 5))]),
    "reshape": (lambda a: a.reshape(4, 3), lambda r: [r.normal(size=(2, 6))]),
    "transpose": (lambda a: a.transpose(2, 0, 1), lambda r: [r.normal(size=(2, 3, 4))]),
    "swap_last": (lambda a: a.T, lambda r: [r.normal(size=(2, 3, 4))]),
    "concat": (lambda a, b: T.concat([a, b], axis=1), lambda r: [r.normal(size=(2, 3)), r.normal(size=(2, 2))]),
    "stack": (lambda a, b: T.stack([a, b], axis=1), lambda r: [r.normal(size=(2, 3)), r.normal(size=(2, 3))]),
    "getitem_repeated": (lambda a: a[np.array([0, 2, 0])], lambda r: [r.normal(size=(3, 2))]),
    "pick": (lambda a: T.pick(a, np.array([[0, 2], [1, 1]])), lambda r: [r.normal(size=(2, 2, 3))]),
    "embedding": (lambda t: T.embedding(t, np.array([[1, 3, 1]])), lambda r: [r.normal(size=(4, 2))]),
    "softmax": (lambda a: T.softmax(a, axis=-1), lambda r: [r.normal(size=(3, 4))]),
    "softmax_axis0": (lambda a: T.softmax(a, axis=0), lambda r: [r.normal(size=(3, 4))]),
    "log_softmax": (lambda a: T.log_softmax(a, axis=-1), lambda r: [r.normal(size=(2, 5))]),
    "layer_norm": (T.layer_norm, lambda r: [r.normal(size=(3, 5)), r.normal(size=(5,)), r.normal(size=(5,))]),
}


def relative_error(analytic, numeric, floor=REL_FLOOR):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def gradcheck(fn, inputs, eps=1e-6, seed=0):
    """Max relative error between backprop and central differences.

    ``fn`` maps tensors to a tensor; the scalar checked is the sum of the
    output weighted by a fixed random array, so every output entry matters.
    Everything runs in 64-bit.
    """
    inputs = [np.asarray(x, dtype=np.float64) for x in inputs]
    with T.float64():
        probe = fn(*[T.Tensor(x) for x in inputs])
        weights = np.random.default_rng(seed).normal(size=probe.shape)

        def scalar(arrays, grad=False):
            ts = [T.Tensor(a, requires_grad=grad) for a in arrays]
            out = T.tsum(T.mul(fn(*ts), T.Tensor(weights)))
            return out, ts

        out, ts = scalar(inputs, grad=True)
        out.backward()
        worst = 0.0
        for i, x in enumerate(inputs):
            numeric = np.zeros_like(x)
            for idx in np.ndindex(x.shape):
                hi = [a.copy() for a in inputs]
                lo = [a.copy() for a in inputs]
                hi[i][idx] += eps
                lo[i][idx] -= eps
                numeric[idx] = (scalar(hi)[0].item() - scalar(lo)[0].item()) / (2 * eps)
            analytic = ts[i].grad if ts[i].grad is not None else np.zeros_like(x)
            worst = max(worst, relative_error(analytic, numeric))
    return worst


def param_gradcheck(loss_fn, params, eps=1e-6, max_entries=None, rng=None):
    """Relative error of parameter gradients of ``loss_fn()`` (64-bit model expected).

    Checks every entry, or ``max_entries`` random entries per parameter.
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    grads = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, g in zip(params, grads):
        indices = list(np.ndindex(p.shape))
        if max_entries is not None and len(indices) > max_entries:
            pick = rng.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[i] for i in pick]
        for idx in indices:
            orig = p.data[idx]
            p.data[idx] = orig + eps
            up = loss_fn().item()
            p.data[idx] = orig - eps
            down = loss_fn().item()
            p.data[idx] = orig
            worst = max(worst, relative_error(g[idx], (up - down) / (2 * eps)))
    return worst


_PERMS = {}


def all_permutations(n):
    if n not in _PERMS:
        _PERMS[n] = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    return _PERMS[n]


def brute_force_assignment(cost):
    """Minimum total cost over all permutations, and one permutation attaining it."""
    perms = all_permutations(cost.shape[0])
    totals = cost[np.arange(cost.shape[0]), perms].sum(axis=1)
    best = int(np.argmin(totals))
    return float(totals[best]), perms[best]


def _dense(g, labels, edge_labels):
    ids = [n.id for n in g.nodes]
    pos = {v: i for i, v in enumerate(ids)}
    node = np.array([labels[n.label] for n in g.nodes], dtype=np.int64)
    adj = np.zeros((len(ids), len(ids)), dtype=np.int64)
    for e in g.edges:
        adj[pos[e.src], pos[e.dst]] = edge_labels[e.label] + 1
    return node, adj


def brute_force_isomorphic(g1, g2):
    """Isomorphism by trying every node bijection (fine up to 8 nodes)."""
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return False
    labels = {l: i for i, l in enumerate(sorted({n.label for n in g1.nodes + g2.nodes}))}
    edge_labels = {l: i for i, l in enumerate(sorted({e.label for e in g1.edges + g2.edges}))}
    n1, a1 = _dense(g1, labels, edge_labels)
    n2, a2 = _dense(g2, labels, edge_labels)
    if not n1.size:
        return True
    perms = all_permutations(len(n1))
    # perm maps node i of g1 to node perm[i] of g2
    perms = perms[(n2[perms] == n1).all(axis=1)]
    for chunk in np.array_split(perms, max(1, len(perms) // 4096)):
        if not len(chunk):
            continue
        mapped = a2[chunk[:, :, None], chunk[:, None, :]]
        if (mapped == a1).all(axis=(1, 2)).any():
            return True
    return False


def random_graph_pair(rng, max_nodes=8, node_labels=("a", "b"), edge_labels=("x", "y")):
    """Two random labeled graphs, built to be often isomorphic or nearly so.

    Half of the pairs are a relabeled shuffle of the same graph, optionally
    with one edge changed; the rest are independent draws from the same
    small label sets, which are usually non-isomorphic but share sizes.
    """
    from lagr.graphs import Edge, MRGraph, Node

    n = int(rng.integers(0, max_nodes + 1))

    def draw(k_edges=None):
        labels = rng.choice(node_labels, size=n)
        pairs = [(i, j) for i in range(n) for j in range(n) if rng.random() < 0.25]
        if k_edges is not None:
            all_pairs = [(i, j) for i in range(n) for j in range(n)]
            pick = rng.choice(len(all_pairs), size=min(k_edges, len(all_pairs)), replace=False) if all_pairs else []
            pairs = [all_pairs[i] for i in pick]
        edges = [Edge(i, j, str(rng.choice(edge_labels))) for i, j in pairs]
        return MRGraph([Node(i, str(l)) for i, l in enumerate(labels)], edges)

    g1 = draw()
    mode = rng.random()
    if mode < 0.5:
        perm = rng.permutation(n)
        ids = rng.permutation(100)[:n] + 100
        nodes = [Node(int(ids[perm[i]]), g1.node(i).label) for i in range(n)]
        edges = [Edge(int(ids[perm[e.src]]), int(ids[perm[e.dst]]), e.label) for e in g1.edges]
        if mode < 0.25 and edges:
            k = int(rng.integers(len(edges)))
            e = edges[k]
            other = [l for l in edge_labels if l != e.label]
            edges[k] = Edge(e.src, e.dst, str(rng.choice(other)))
        g2 = MRGraph(nodes, edges)
    else:
        g2 = draw(len(g1.edges))
        # keep the node label multiset so the label prefilter does not decide the pair
        g2 = MRGraph([Node(n_.id, l.label) for n_, l in zip(g2.nodes, rng.permutation(g1.nodes))], g2.edges)
    return g1, g2
