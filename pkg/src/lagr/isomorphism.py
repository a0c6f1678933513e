"""Labeled directed graph isomorphism by backtracking search."""

from __future__ import annotations

from collections import Counter, defaultdict


def _index(g):
    out, inc = defaultdict(dict), defaultdict(dict)
    for e in g.edges:
        out[e.src][e.dst] = e.label
        inc[e.dst][e.src] = e.label
    labels = {n.id: n.label for n in g.nodes}
    sig = {}
    for n in g.nodes:
        sig[n.id] = (
            n.label,
            tuple(sorted(Counter(out[n.id].values()).items())),
            tuple(sorted(Counter(inc[n.id].values()).items())),
            out[n.id].get(n.id),
        )
    return labels, out, inc, sig


def graph_isomorphic(g1, g2):
    """True iff a bijection of nodes preserves node labels and labeled edges.

    Nodes are pruned by a signature of (label, out-edge label counts,
    in-edge label counts, self-loop label); the search extends a partial
    map one node at a time in a connectivity-first order and checks every
    edge between the new node and the already mapped ones.
    """
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return False
    _, out1, in1, sig1 = _index(g1)
    _, out2, in2, sig2 = _index(g2)
    if Counter(sig1.values()) != Counter(sig2.values()):
        return False

    by_sig = defaultdict(list)
    for v, s in sig2.items():
        by_sig[s].append(v)
    rarity = Counter(sig1.values())

    order = []
    placed = set()
    remaining = set(sig1)
    while remaining:
        frontier = [u for u in remaining if any(w in placed for w in (*out1[u], *in1[u]))]
        pool = frontier or remaining
        u = min(pool, key=lambda x: (rarity[sig1[x]], -len(out1[x]) - len(in1[x]), str(x)))
        order.append(u)
        placed.add(u)
        remaining.discard(u)

    mapping, used = {}, set()

    def consistent(u, v):
        for u2, v2 in mapping.items():
            if out1[u].get(u2) != out2[v].get(v2):
                return False
            if in1[u].get(u2) != in2[v].get(v2):
                return False
        return True

    def search(depth):
        if depth == len(order):
            return True
        u = order[depth]
        for v in by_sig[sig1[u]]:
            if v in used or not consistent(u, v):
                continue
            mapping[u] = v
            used.add(v)
            if search(depth + 1):
                return True
            del mapping[u]
            used.discard(v)
        return False

    return search(0)
