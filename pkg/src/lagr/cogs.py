"""COGS logical forms <-> single-layer aligned graphs.

Graph construction:

* a node per one-/two-place predicate, proper noun and definite article,
  placed at the token position of the variable it represents (``x _ i`` is
  token ``i``, 0-based); articles sit right before their noun;
* a role conjunct ``pred . role ( x _ h , arg )`` becomes an edge
  ``h -> arg`` labeled ``role``;
* ``* noun ( x _ i )`` adds an ``article`` edge from the article to the noun.

Serialization orders definite clauses by noun position, then conjuncts by
(head position, unary before binary, argument position).  Isolated nodes
are dropped unless the graph has no edges at all, in which case it is
read as a primitive (single-word) entry.
"""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from dataclasses import dataclass, field

from .graphs import NULL, AlignedGraph, LabelVocab, strip_nulls

log = logging.getLogger(__name__)

DEFINITE = "*"
ARTICLE = "article"
ROLES = ("agent", "theme", "recipient", "ccomp", "xcomp", "nmod.on", "nmod.in", "nmod.beside")
VERB_ROLES = frozenset(("agent", "theme", "recipient", "ccomp", "xcomp"))
NOUN_TEMPLATE = "LAMBDA a . @ ( a )"
_VAR_INDEX = re.compile(r"\d+$")


class LogicalFormError(ValueError):
    pass


@dataclass(frozen=True)
class Var:
    """Sentence variable ``x _ index``."""

    index: int

    def __str__(self):
        return f"x _ {self.index}"


@dataclass(frozen=True)
class Lam:
    """Lambda-bound variable of a primitive entry."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Conjunct:
    pred: str
    role: str | None
    args: tuple

    def __str__(self):
        head = self.pred if self.role is None else f"{self.pred} . {self.role.replace('.', ' . ')}"
        return f"{head} ( {' , '.join(str(a) for a in self.args)} )"


@dataclass
class LogicalForm:
    definites: list = field(default_factory=list)  # [(noun, Var)]
    conjuncts: list = field(default_factory=list)
    lambdas: tuple = ()
    name: str | None = None  # bare proper-noun primitive

    @property
    def is_primitive(self):
        return bool(self.lambdas) or self.name is not None

    def __str__(self):
        if self.name is not None:
            return self.name
        parts = [f"LAMBDA {v} ." for v in self.lambdas]
        body = [f"{DEFINITE} {noun} ( {var} )" for noun, var in self.definites]
        conj = " AND ".join(str(c) for c in self.conjuncts)
        if conj:
            body.append(conj)
        return " ".join(parts + [" ; ".join(body)]).strip()


@dataclass(frozen=True)
class CogsExample:
    id: str
    tokens: tuple
    lf: str
    tag: str


def normalize(text):
    return " ".join(text.split())


def exact_match(pred, gold):
    return normalize(pred) == normalize(gold)


# -- parsing -------------------------------------------------------------------------


class _Tokens:
    def __init__(self, text):
        self.toks = text.split()
        self.i = 0

    def peek(self, offset=0):
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise LogicalFormError(f"unexpected end of logical form at token {self.i}")
        if expected is not None and tok != expected:
            raise LogicalFormError(f"expected {expected!r} at token {self.i}, found {tok!r}")
        self.i += 1
        return tok

    def done(self):
        return self.i >= len(self.toks)


def parse_lf(text):
    """Parse COGS logical-form text into a :class:`LogicalForm`."""
    ts = _Tokens(text)
    if ts.done():
        raise LogicalFormError("empty logical form")
    lf = LogicalForm()
    lambdas = []
    while ts.peek() == "LAMBDA":
        ts.take()
        lambdas.append(ts.take())
        ts.take(".")
    lf.lambdas = tuple(lambdas)
    if not lambdas and len(ts.toks) == 1:
        tok = ts.take()
        if not _is_name(tok):
            raise LogicalFormError(f"single-token logical form {tok!r} is not a proper noun")
        lf.name = tok
        return lf
    while ts.peek() == DEFINITE:
        ts.take()
        noun = ts.take()
        ts.take("(")
        var = _parse_arg(ts, lf.lambdas)
        ts.take(")")
        if not isinstance(var, Var):
            raise LogicalFormError(f"definite clause for {noun!r} needs a sentence variable (token {ts.i})")
        lf.definites.append((noun, var))
        ts.take(";")
    while True:
        lf.conjuncts.append(_parse_conjunct(ts, lf.lambdas))
        if ts.done():
            break
        ts.take("AND")
    return lf


def _parse_conjunct(ts, lambdas):
    start = ts.i
    parts = [ts.take()]
    while ts.peek() == ".":
        ts.take()
        parts.append(ts.take())
    if parts[0] in ("(", ")", ",", ";", "AND"):
        raise LogicalFormError(f"malformed clause at token {start}")
    ts.take("(")
    args = [_parse_arg(ts, lambdas)]
    while ts.peek() == ",":
        ts.take()
        args.append(_parse_arg(ts, lambdas))
    ts.take(")")
    role = ".".join(parts[1:]) or None
    if role is None and len(args) != 1:
        raise LogicalFormError(f"unary predicate {parts[0]!r} with {len(args)} arguments at token {start}")
    if role is not None and len(args) != 2:
        raise LogicalFormError(f"role predicate {parts[0]}.{role} needs 2 arguments (token {start})")
    return Conjunct(parts[0], role, tuple(args))


def _parse_arg(ts, lambdas):
    tok = ts.take()
    if tok == "x" and ts.peek() == "_":
        ts.take("_")
        idx = ts.take()
        if not _VAR_INDEX.match(idx):
            raise LogicalFormError(f"bad variable index {idx!r} at token {ts.i - 1}")
        return Var(int(idx))
    if tok in lambdas:
        return Lam(tok)
    if _is_name(tok):
        return tok
    raise LogicalFormError(f"unexpected argument {tok!r} at token {ts.i - 1}")


def _is_name(tok):
    return tok[:1].isupper() and tok.isalpha()


# -- graph construction -----------------------------------------------------------------


def lf_to_aligned_graph(lf, tokens):
    """Single-layer aligned graph of a parsed logical form over ``tokens``."""
    if isinstance(lf, str):
        lf = parse_lf(lf)
    tokens = list(tokens)
    n = len(tokens)
    z = [NULL] * n
    edges = {}

    def claim(slot, label):
        if not 0 <= slot < n:
            raise LogicalFormError(f"variable x _ {slot} is outside the {n}-token sentence")
        if z[slot] not in (NULL, label):
            raise LogicalFormError(f"slot {slot} claimed by both {z[slot]!r} and {label!r}")
        z[slot] = label

    if lf.is_primitive:
        if n != 1:
            raise LogicalFormError(f"primitive entry over {n} tokens")
        label = lf.name if lf.name is not None else lf.conjuncts[0].pred
        claim(0, label)
        return AlignedGraph(n, 1, tuple(z), edges)

    for noun, var in lf.definites:
        claim(var.index, noun)
        claim(var.index - 1, DEFINITE)
        edges[(var.index - 1, var.index)] = ARTICLE

    def locate(arg, head):
        if isinstance(arg, Var):
            return arg.index
        spots = [i for i, tok in enumerate(tokens) if tok == arg]
        if not spots:
            raise LogicalFormError(f"proper noun {arg!r} does not occur in the sentence")
        return min(spots, key=lambda i: (abs(i - head), i))

    for c in lf.conjuncts:
        head = c.args[0]
        if not isinstance(head, Var):
            raise LogicalFormError(f"conjunct {c} does not start with a sentence variable")
        claim(head.index, c.pred)
        if c.role is None:
            continue
        dep = locate(c.args[1], head.index)
        if isinstance(c.args[1], str):
            claim(dep, c.args[1])
        if (head.index, dep) in edges and edges[(head.index, dep)] != c.role:
            raise LogicalFormError(f"two labels on edge {head.index} -> {dep}")
        edges[(head.index, dep)] = c.role

    for (j, k) in edges:
        if z[j] == NULL or z[k] == NULL:
            raise LogicalFormError(f"edge {j} -> {k} touches an unlabeled slot")
    return AlignedGraph(n, 1, tuple(z), edges)


# -- serialization -------------------------------------------------------------------------


def primitive_template(lf):
    """Lambda template of a primitive entry with its predicate replaced by ``@``."""
    if isinstance(lf, str):
        lf = parse_lf(lf)
    if not lf.lambdas:
        return None
    preds = {c.pred for c in lf.conjuncts}
    if len(preds) != 1:
        raise LogicalFormError(f"primitive with several predicates: {sorted(preds)}")
    masked = LogicalForm(lambdas=lf.lambdas, conjuncts=[Conjunct("@", c.role, c.args) for c in lf.conjuncts])
    return str(masked)


def build_primitive_frames(examples):
    """Most frequent lambda template per predicate, from primitive training entries."""
    counts = {}
    for ex in examples:
        try:
            lf = parse_lf(ex.lf)
        except LogicalFormError:
            continue
        if lf.lambdas:
            tmpl = primitive_template(lf)
            if tmpl != NOUN_TEMPLATE:
                counts.setdefault(lf.conjuncts[0].pred, Counter())[tmpl] += 1
    return {pred: c.most_common(1)[0][0] for pred, c in sorted(counts.items())}


def _instantiate(template, label):
    return " ".join(label if tok == "@" else tok for tok in template.split())


def serialize_lf(g, frames=None):
    """Canonical COGS text of an MR graph whose nodes carry token positions."""
    if isinstance(g, AlignedGraph):
        g = strip_nulls(g)
    for node in g.nodes:
        if node.pos is None:
            raise ValueError(f"node {node.id} ({node.label}) has no token position")
    if not g.nodes:
        return ""
    if not g.edges:
        if len(g.nodes) != 1:
            return ""
        label = g.nodes[0].label
        if _is_name(label):
            return label
        return _instantiate((frames or {}).get(label, NOUN_TEMPLATE), label)

    by_id = {node.id: node for node in g.nodes}
    definite, verbs, connected = set(), set(), set()
    roles = []
    for e in g.edges:
        connected.update((e.src, e.dst))
        if e.label == ARTICLE:
            definite.add(e.dst)
        else:
            roles.append(e)
            if e.label in VERB_ROLES:
                verbs.add(e.src)

    prefix = []
    keyed = []
    for node_id in connected:
        node = by_id[node_id]
        if node.label == DEFINITE or _is_name(node.label) or node_id in verbs:
            continue
        if node_id in definite:
            prefix.append((node.pos, f"{DEFINITE} {node.label} ( {Var(node.pos)} )"))
        else:
            keyed.append(((node.pos, 0, -1), str(Conjunct(node.label, None, (Var(node.pos),)))))
    for e in roles:
        head, dep = by_id[e.src], by_id[e.dst]
        arg = dep.label if _is_name(dep.label) else Var(dep.pos)
        keyed.append(((head.pos, 1, dep.pos), str(Conjunct(head.label, e.label, (Var(head.pos), arg)))))

    prefix.sort()
    keyed.sort()
    parts = [text for _, text in prefix]
    if keyed:
        parts.append(" AND ".join(text for _, text in keyed))
    return " ; ".join(parts)


def graph_of(example):
    """Aligned graph of a :class:`CogsExample`."""
    return lf_to_aligned_graph(parse_lf(example.lf), example.tokens)


# -- corpus I/O ------------------------------------------------------------------------------


def read_cogs_tsv(path, stats=None, prefix=None):
    """Stream examples from a 3-column COGS TSV file in file order.

    Lines without exactly three fields are skipped with a warning and counted
    under ``stats["malformed"]``.
    """
    prefix = prefix if prefix is not None else str(path).rsplit("/", 1)[-1].split(".")[0]
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3 or not row[0].strip():
                log.warning("%s:%d: expected 3 tab-separated fields, got %d", path, lineno, len(row))
                if stats is not None:
                    stats["malformed"] += 1
                continue
            yield CogsExample(f"{prefix}-{lineno}", tuple(row[0].split()), normalize(row[1]), row[2].strip())


def build_vocabs(graphs):
    nodes, edges = set(), set()
    for g in graphs:
        nodes.update(l for l in g.z if l != NULL)
        edges.update(g.edges.values())
    return LabelVocab.from_labels(nodes), LabelVocab.from_labels(edges)


def case_report(tags, correct):
    """Accuracy per generalization case as a plain-text table."""
    totals, hits = Counter(), Counter()
    for tag, ok in zip(tags, correct):
        totals[tag] += 1
        hits[tag] += bool(ok)
    width = max([len(t) for t in totals] + [4])
    lines = [f"{'case':<{width}}  {'n':>6}  {'acc':>7}"]
    for tag in sorted(totals):
        lines.append(f"{tag:<{width}}  {totals[tag]:>6}  {100.0 * hits[tag] / totals[tag]:>6.2f}%")
    n, h = sum(totals.values()), sum(hits.values())
    if n:
        lines.append(f"{'all':<{width}}  {n:>6}  {100.0 * h / n:>6.2f}%")
    return "\n".join(lines)
