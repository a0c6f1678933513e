"""Aligned multi-layer graphs, unaligned MR graphs and label vocabularies.

Slots of an aligned graph with ``n`` tokens and ``layers`` layers are
stored 0-based and layer-major: slot ``l * n + i`` holds layer ``l``,
token position ``i``.  :func:`slot_index` exposes the same map 1-based.
Edges are kept sparse as ``{(src_slot, dst_slot): label}``; a missing key
is the null label.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

NULL = "null"


class LabelVocab:
    """Label <-> id map with ``null`` fixed at id 0."""

    def __init__(self, labels=()):
        self.itos = [NULL]
        self.stoi = {NULL: 0}
        for label in labels:
            self.add(label)

    @classmethod
    def from_labels(cls, labels):
        return cls(sorted(set(labels) - {NULL}))

    def add(self, label):
        if label not in self.stoi:
            self.stoi[label] = len(self.itos)
            self.itos.append(label)
        return self.stoi[label]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, label):
        return label in self.stoi

    def __eq__(self, other):
        return isinstance(other, LabelVocab) and self.itos == other.itos

    def id(self, label):
        try:
            return self.stoi[label]
        except KeyError:
            raise KeyError(f"label {label!r} is not in the vocabulary") from None

    def label(self, idx):
        return self.itos[idx]

    def to_list(self):
        return list(self.itos)

    @classmethod
    def from_list(cls, itos):
        if not itos or itos[0] != NULL or itos.count(NULL) != 1:
            raise ValueError("label list must contain null exactly once, at index 0")
        return cls(itos[1:])


def slot_index(layer, position, n, layers=None):
    """1-based slot of (layer, position): ``(layer - 1) * n + position``."""
    if n < 1 or position < 1 or position > n or layer < 1 or (layers is not None and layer > layers):
        raise ValueError(f"(layer={layer}, position={position}) is out of range for n={n}, layers={layers}")
    return (layer - 1) * n + position


@dataclass(frozen=True)
class Node:
    id: int
    label: str
    layer: int | None = None
    pos: int | None = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: str


@dataclass
class MRGraph:
    """Labeled directed graph without nulls; the final meaning representation."""

    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)

    def __post_init__(self):
        ids = {node.id for node in self.nodes}
        if len(ids) != len(self.nodes):
            raise ValueError("duplicate node ids")
        for node in self.nodes:
            if node.label == NULL:
                raise ValueError(f"node {node.id} is labeled null")
        seen = set()
        for edge in self.edges:
            if edge.src not in ids or edge.dst not in ids:
                raise ValueError(f"edge {edge} references a missing node")
            if edge.label == NULL:
                raise ValueError(f"edge {edge} is labeled null")
            if (edge.src, edge.dst) in seen:
                raise ValueError(f"parallel edges between {edge.src} and {edge.dst}")
            seen.add((edge.src, edge.dst))

    def node(self, node_id):
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def to_json(self):
        return {
            "nodes": [{"id": n.id, "label": n.label, "layer": n.layer, "pos": n.pos} for n in self.nodes],
            "edges": [{"src": e.src, "dst": e.dst, "label": e.label} for e in self.edges],
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        nodes = [Node(n["id"], n["label"], n.get("layer"), n.get("pos")) for n in obj["nodes"]]
        edges = [Edge(e["src"], e["dst"], e["label"]) for e in obj["edges"]]
        return cls(nodes, edges)


@dataclass(frozen=True)
class AlignedGraph:
    """Complete graph over ``n * layers`` slots aligned with the input tokens."""

    n: int
    layers: int
    z: tuple
    edges: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.n * self.layers
        if len(self.z) != m:
            raise ValueError(f"z has {len(self.z)} labels, expected n*layers = {m}")
        for (j, k), label in self.edges.items():
            if not (0 <= j < m and 0 <= k < m):
                raise ValueError(f"edge ({j}, {k}) outside {m} slots")
            if label == NULL:
                raise ValueError("null edges must be left out of the sparse edge map")

    @property
    def m(self):
        return self.n * self.layers

    def position(self, slot):
        """``(layer, pos)`` of a 0-based slot, both 0-based."""
        return divmod(slot, self.n)

    def to_ids(self, node_vocab, edge_vocab):
        z = np.array([node_vocab.id(label) for label in self.z], dtype=np.int64)
        xi = np.zeros((self.m, self.m), dtype=np.int64)
        for (j, k), label in self.edges.items():
            xi[j, k] = edge_vocab.id(label)
        return z, xi

    @classmethod
    def from_ids(cls, n, layers, z, xi, node_vocab, edge_vocab):
        labels = tuple(node_vocab.label(int(i)) for i in z)
        js, ks = np.nonzero(xi)
        edges = {(int(j), int(k)): edge_vocab.label(int(xi[j, k])) for j, k in zip(js, ks)}
        return cls(n, layers, labels, edges)


@dataclass(frozen=True)
class UnalignedTarget:
    """Null-padded slot-level target whose alignment to the input is unknown."""

    n: int
    layers: int
    s: tuple
    edges: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.n * self.layers

    def to_ids(self, node_vocab, edge_vocab):
        s = np.array([node_vocab.id(label) for label in self.s], dtype=np.int64)
        e = np.zeros((self.m, self.m), dtype=np.int64)
        for (j, k), label in self.edges.items():
            e[j, k] = edge_vocab.id(label)
        return s, e


def strip_nulls(g, stats=None):
    """Drop null nodes and edges; edges touching a null node are dropped too.

    Such dangling edges are counted under ``stats["dangling_edges"]`` when
    a Counter is passed.
    """
    nodes = []
    for slot, label in enumerate(g.z):
        if label != NULL:
            layer, pos = g.position(slot)
            nodes.append(Node(slot, label, layer, pos))
    live = {node.id for node in nodes}
    edges = []
    dangling = 0
    for (j, k), label in sorted(g.edges.items()):
        if j in live and k in live:
            edges.append(Edge(j, k, label))
        else:
            dangling += 1
    if dangling:
        log.debug("dropped %d edges incident to null nodes", dangling)
        if stats is not None:
            stats["dangling_edges"] += dangling
    return MRGraph(nodes, edges)


def pad_to_slots(g, n, layers):
    """Place the graph's nodes into the first slots of an ``n * layers`` grid.

    Nodes are ordered by label, then by their order in ``g.nodes``.
    """
    m = n * layers
    if len(g.nodes) > m:
        raise ValueError(f"graph has {len(g.nodes)} nodes but only {m} slots (n={n}, layers={layers})")
    order = sorted(range(len(g.nodes)), key=lambda i: (g.nodes[i].label, i))
    slot_of = {g.nodes[i].id: slot for slot, i in enumerate(order)}
    s = [g.nodes[i].label for i in order] + [NULL] * (m - len(order))
    edges = {(slot_of[e.src], slot_of[e.dst]): e.label for e in g.edges}
    return UnalignedTarget(n, layers, tuple(s), edges)


def column_to_slot_permutation(perm, n, layers):
    perm = np.asarray(perm)
    return np.concatenate([l * n + perm for l in range(layers)])


def _check_permutation(perm, size):
    perm = np.asarray(perm)
    if perm.shape != (size,) or not np.array_equal(np.sort(perm), np.arange(size)):
        raise ValueError(f"not a permutation of {size} items: {perm.tolist()}")
    return perm


def permute_columns(g, perm):
    """Column ``perm[j]`` of ``g`` becomes column ``j`` of the result."""
    perm = _check_permutation(perm, g.n)
    slots = column_to_slot_permutation(perm, g.n, g.layers)
    return permute_slots(g, slots)


def permute_slots(g, a):
    """Slot ``a[j]`` of the aligned graph becomes slot ``j`` of the target."""
    a = _check_permutation(a, g.m)
    inverse = np.argsort(a)
    s = tuple(g.z[int(a[j])] for j in range(g.m))
    edges = {(int(inverse[j]), int(inverse[k])): label for (j, k), label in g.edges.items()}
    return UnalignedTarget(g.n, g.layers, s, edges)


def apply_alignment(target, a):
    """Aligned graph implied by placing target slot ``j`` at aligned slot ``a[j]``."""
    a = _check_permutation(a, target.m)
    z = [NULL] * target.m
    for j, label in enumerate(target.s):
        z[int(a[j])] = label
    edges = {(int(a[j]), int(a[k])): label for (j, k), label in target.edges.items()}
    return AlignedGraph(target.n, target.layers, tuple(z), edges)


def target_from_graph(g, n, layers):
    """Convenience: strip an aligned graph and pad it back to an unaligned target."""
    return pad_to_slots(strip_nulls(g), n, layers)


def label_signature(g):
    """Cheap isomorphism invariant: node label multiset and edge label multiset."""
    return Counter(n.label for n in g.nodes), Counter(e.label for e in g.edges)


def alignment_of(g):
    """Unaligned target of ``g`` and the alignment that places it back.

    Returns ``(target, a)`` with ``apply_alignment(target, a) == g``; the
    target's null slots go to the graph's null slots in increasing order.
    """
    stripped = strip_nulls(g)
    target = pad_to_slots(stripped, g.n, g.layers)
    order = sorted(range(len(stripped.nodes)), key=lambda i: (stripped.nodes[i].label, i))
    a = [stripped.nodes[i].id for i in order]
    used = set(a)
    a += [slot for slot in range(g.m) if slot not in used]
    return target, np.asarray(a, dtype=np.int64)
