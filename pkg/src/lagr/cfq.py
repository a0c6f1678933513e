"""CFQ SPARQL queries <-> MR graphs.

Category constraints are accepted both as ``?x0 a ns:film.actor`` and in the
short form ``?x0 actor``; reconstruction always writes the short form.

Queries are parsed into filters, two-place triples and one-place
(category) constraints, compressed by merging two-place triples that share
a predicate and one side, and turned into graphs:

* every distinct entity or variable is a node; for ``SELECT DISTINCT ?x0``
  the variable ``?x0`` becomes ``select_?x0``;
* every (compressed) triple is its own predicate node with ``agent`` edges
  to its subjects and ``theme`` edges to its objects;
* a one-place constraint is a category node receiving ``agent`` edges from
  its entities;
* ``FILTER ( a != b )`` is a ``FILTER`` edge ``a -> b``.

Predicate names are shortened: categories keep their last dotted segment
(``ns:film.actor`` -> ``actor``), relations their last two segments per
path component (``ns:film.film.directed_by`` -> ``film.directed_by``).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .graphs import Edge, MRGraph, Node
from .isomorphism import graph_isomorphic

log = logging.getLogger(__name__)

SELECT_VAR = "select_?x0"
AGENT, THEME, FILTER = "agent", "theme", "FILTER"
EDGE_LABELS = (AGENT, THEME, FILTER)
_ENTITY = re.compile(r"^(\?x\d+|select_\?x0|M\d+|ns:[mg]\.[\w.]+)$")
_NAME = re.compile(r"^[\w:./?-]+$")
_TOKEN = re.compile(r"\[|\]|,|\(|\)|!=|\{|\}|[^\s\[\],(){}]+")


class SparqlError(ValueError):
    pass


def is_entity(label):
    return bool(_ENTITY.match(label))


def shorten_predicate(name, category=False):
    if not name.startswith("ns:"):
        return name
    parts = []
    for piece in name.split("/"):
        segs = piece[3:].split(".") if piece.startswith("ns:") else piece.split(".")
        parts.append(segs[-1] if category else ".".join(segs[-2:]))
    return "/".join(parts)


@dataclass(frozen=True)
class Triple:
    subjects: tuple
    pred: str
    objects: tuple

    def expand(self):
        return {(s, self.pred, o) for s in self.subjects for o in self.objects}


@dataclass(frozen=True)
class Category:
    entities: tuple
    category: str


@dataclass
class SparqlQuery:
    select: str  # "count" or "distinct_x0"
    filters: list = field(default_factory=list)  # [(a, b)]
    triples: list = field(default_factory=list)
    categories: list = field(default_factory=list)

    def constraint_set(self):
        """Expanded singleton constraints, for semantic comparisons."""
        out = {("FILTER", a, b) for a, b in self.filters}
        for t in self.triples:
            out |= t.expand()
        for c in self.categories:
            out |= {(e, "a", c.category) for e in c.entities}
        return out


# -- parsing ------------------------------------------------------------------------------


def parse_sparql(text):
    """Parse CFQ-style SPARQL (raw or compressed bracket syntax)."""
    toks = _TOKEN.findall(text)
    if not toks:
        raise SparqlError("empty query")
    i = 0
    select = "count"
    if toks[0].upper() == "SELECT":
        head = []
        i = 1
        while i < len(toks) and toks[i].upper() != "WHERE":
            head.append(toks[i])
            i += 1
        head_text = " ".join(head).replace(" ", "")
        if head_text.lower() == "count(*)":
            select = "count"
        elif head_text.upper() == "DISTINCT?X0":
            select = "distinct_x0"
        else:
            raise SparqlError(f"unsupported SELECT clause: {' '.join(head)!r}")
        if i >= len(toks):
            raise SparqlError("missing WHERE clause")
        i += 1
    body = toks[i:]
    if i == 0 and SELECT_VAR in body:
        # bare WHERE body in graph notation
        select = "distinct_x0"
        body = ["?x0" if t == SELECT_VAR else t for t in body]
    if body and body[0] == "{":
        if body[-1] != "}":
            raise SparqlError("unbalanced braces in WHERE clause")
        body = body[1:-1]
    q = SparqlQuery(select)
    for chunk in _split_constraints(body):
        _parse_constraint(chunk, q)
    return q


def _split_constraints(body):
    chunk, depth = [], 0
    for tok in body:
        if tok == "[":
            depth += 1
        elif tok == "]":
            depth -= 1
        if tok == "." and depth == 0:
            if chunk:
                yield chunk
            chunk = []
        else:
            chunk.append(tok)
    if chunk:
        yield chunk


def _parse_side(toks, i):
    if toks[i] == "[":
        items = []
        i += 1
        while toks[i] != "]":
            if toks[i] != ",":
                items.append(toks[i])
            i += 1
            if i >= len(toks):
                raise SparqlError(f"unterminated entity list in {' '.join(toks)!r}")
        return tuple(items), i + 1
    return (toks[i],), i + 1


def _parse_constraint(toks, q):
    span = " ".join(toks)
    if toks[0] == "FILTER":
        inner = [t for t in toks[1:] if t not in ("(", ")")]
        if len(inner) != 3 or inner[1] != "!=" or not (is_entity(inner[0]) and is_entity(inner[2])):
            raise SparqlError(f"unrecognized FILTER constraint: {span!r}")
        q.filters.append((inner[0], inner[2]))
        return
    try:
        subjects, i = _parse_side(toks, 0)
        pred = toks[i]
        if i + 1 == len(toks) and not is_entity(pred):
            # short category form "?x0 editor"
            pred, objects, j = "a", (pred,), i + 1
        else:
            objects, j = _parse_side(toks, i + 1)
    except IndexError:
        raise SparqlError(f"unrecognized constraint: {span!r}") from None
    if j != len(toks) or not subjects or not objects:
        raise SparqlError(f"unrecognized constraint: {span!r}")
    bad = [t for t in subjects if not is_entity(t)]
    if pred != "a":
        bad += [t for t in objects if not is_entity(t)]
    if bad or not _NAME.match(pred) or (pred == "a" and not _NAME.match(objects[0])):
        raise SparqlError(f"unrecognized constraint: {span!r}")
    if pred == "a":
        if len(objects) != 1:
            raise SparqlError(f"category constraint with several categories: {span!r}")
        q.categories.append(Category(subjects, shorten_predicate(objects[0], category=True)))
    else:
        q.triples.append(Triple(subjects, shorten_predicate(pred), objects))


# -- compression --------------------------------------------------------------------------


def compress(q, merge_objects=True):
    """Merge two-place triples sharing (predicate, object) or (predicate, subject).

    Subject lists are merged first, then object lists, repeated to a fixed
    point.  Entity lists are kept sorted, so the result is canonical and
    ``compress`` is idempotent.
    """
    triples = {Triple(tuple(sorted(set(t.subjects))), t.pred, tuple(sorted(set(t.objects)))) for t in q.triples}
    while True:
        merged = _merge(triples, by="objects")
        if merge_objects:
            merged = _merge(merged, by="subjects")
        if merged == triples:
            break
        triples = merged
    return SparqlQuery(
        q.select,
        sorted(set(q.filters)),
        sorted(triples, key=_triple_key),
        sorted(q.categories, key=lambda c: (c.category, c.entities)),
    )


def _merge(triples, by):
    groups = {}
    for t in triples:
        key = (t.pred, getattr(t, by))
        groups.setdefault(key, []).append(t)
    out = set()
    for (pred, shared), group in groups.items():
        other = "subjects" if by == "objects" else "objects"
        pooled = tuple(sorted({e for t in group for e in getattr(t, other)}))
        if by == "objects":
            out.add(Triple(pooled, pred, shared))
        else:
            out.add(Triple(shared, pred, pooled))
    return out


def _triple_key(t):
    return (t.pred, t.subjects, t.objects)


def _side(items):
    return items[0] if len(items) == 1 else "[" + ", ".join(items) + "]"


def format_triple(t):
    return f"{_side(t.subjects)} {t.pred} {_side(t.objects)}"


def format_triples(triples):
    """Bracketed list of triples, e.g. ``[[M2, M3] directed_by ?x0]``."""
    return "[" + ", ".join(format_triple(t) for t in triples) + "]"


# -- graphs ----------------------------------------------------------------------------------


def sparql_to_graph(q):
    if isinstance(q, str):
        q = compress(parse_sparql(q))
    rename = (lambda e: SELECT_VAR if e == "?x0" else e) if q.select == "distinct_x0" else (lambda e: e)
    nodes, edges, ids = [], {}, {}

    def entity(name):
        name = rename(name)
        if name not in ids:
            ids[name] = len(nodes)
            nodes.append(Node(ids[name], name))
        return ids[name]

    def add_edge(src, dst, label):
        if edges.get((src, dst), label) != label:
            raise SparqlError(f"conflicting edge labels between {nodes[src].label} and {nodes[dst].label}")
        edges[(src, dst)] = label

    def predicate(label):
        nodes.append(Node(len(nodes), label))
        return len(nodes) - 1

    for t in q.triples:
        p = predicate(t.pred)
        for s in t.subjects:
            add_edge(p, entity(s), AGENT)
        for o in t.objects:
            add_edge(p, entity(o), THEME)
    for c in q.categories:
        p = predicate(c.category)
        for e in c.entities:
            add_edge(entity(e), p, AGENT)
    for a, b in q.filters:
        add_edge(entity(a), entity(b), FILTER)
    if q.select == "distinct_x0":
        entity("?x0")
    return MRGraph(nodes, [Edge(s, d, l) for (s, d), l in edges.items()])


def graph_to_query(g):
    labels = {n.id: n.label for n in g.nodes}
    out, inc = {}, {}
    for e in g.edges:
        out.setdefault(e.src, []).append(e)
        inc.setdefault(e.dst, []).append(e)
    select = "distinct_x0" if any(l == SELECT_VAR for l in labels.values()) else "count"

    def name(node_id):
        label = labels[node_id]
        return "?x0" if label == SELECT_VAR else label

    q = SparqlQuery(select)
    for e in g.edges:
        if e.label == FILTER and is_entity(labels[e.src]) and is_entity(labels[e.dst]):
            q.filters.append((name(e.src), name(e.dst)))
    for n in g.nodes:
        if is_entity(n.label):
            continue
        outgoing = [e for e in out.get(n.id, []) if is_entity(labels[e.dst])]
        subjects = tuple(sorted(name(e.dst) for e in outgoing if e.label == AGENT))
        objects = tuple(sorted(name(e.dst) for e in outgoing if e.label == THEME))
        members = tuple(sorted(name(e.src) for e in inc.get(n.id, [])
                               if e.label == AGENT and is_entity(labels[e.src])))
        if subjects and objects:
            q.triples.append(Triple(subjects, n.label, objects))
        elif members and not outgoing:
            q.categories.append(Category(members, n.label))
        else:
            log.warning("predicate node %r has no usable agent/theme edges; dropped", n.label)
    return q


def format_query(q):
    parts = [f"FILTER ( {a} != {b} )" for a, b in q.filters]
    parts += [format_triple(t) for t in q.triples]
    parts += [f"{_side(c.entities)} {c.category}" for c in q.categories]
    parts.sort()
    head = "SELECT DISTINCT ?x0" if q.select == "distinct_x0" else "SELECT count(*)"
    return f"{head} WHERE {{ {' . '.join(parts)} }}" if parts else f"{head} WHERE {{ }}"


def graph_to_sparql(g):
    """Canonical compressed SPARQL text of a graph."""
    return format_query(graph_to_query(g))


def check_slot_budget(g, n_tokens, layers=2):
    if len(g.nodes) > n_tokens * layers:
        raise ValueError(f"graph needs {len(g.nodes)} slots but {n_tokens} tokens x {layers} layers give "
                         f"{n_tokens * layers}")


# -- corpus I/O --------------------------------------------------------------------------------


@dataclass(frozen=True)
class CfqExample:
    id: str
    question: str
    sparql: str
    split: str = ""

    @property
    def tokens(self):
        return tuple(self.question.split())


def read_cfq_jsonl(path):
    """Examples from a JSON-lines file of ``{question, sparql}`` records.

    The example id is the record's ``id`` field, else its 0-based line index.
    """
    out = []
    with open(path) as fh:
        for idx, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            q = rec.get("question") or rec.get("questionPatternModEntities")
            s = rec.get("sparql") or rec.get("sparqlPatternModEntities")
            if not q or not s:
                log.warning("%s:%d: record without question/sparql, skipped", path, idx + 1)
                continue
            out.append(CfqExample(str(rec.get("id", idx)), q, s))
    return out


def read_split(path):
    """Split index file: ``{"trainIdxs": [...], "devIdxs": [...], "testIdxs": [...]}``."""
    obj = json.loads(Path(path).read_text())
    return {key.replace("Idxs", ""): [str(i) for i in val] for key, val in obj.items() if key.endswith("Idxs")}


def graph_accuracy(pred_graphs, gold_graphs):
    pairs = list(zip(pred_graphs, gold_graphs))
    if not pairs:
        return 0.0
    return sum(graph_isomorphic(p, g) for p, g in pairs) / len(pairs)


__all__ = [
    "SparqlQuery", "Triple", "Category", "parse_sparql", "compress", "sparql_to_graph", "graph_to_sparql",
    "graph_isomorphic", "graph_accuracy", "format_triples", "read_cfq_jsonl", "read_split",
]
