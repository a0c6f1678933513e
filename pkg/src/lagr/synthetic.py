"""Small COGS-style corpora generated from a toy grammar.

The grammar covers intransitive, transitive and dative sentences and
sentential complements ("that" clauses), with indefinite and definite noun
phrases and proper names.  Gold logical forms are produced by serializing
the gold aligned graph, so they follow the same canonical ordering as the
real corpus.  One noun is kept out of object positions in training and
appears there in the ``gen`` split, mimicking a COGS generalization case.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cogs import ARTICLE, DEFINITE, NOUN_TEMPLATE, CogsExample, serialize_lf
from .graphs import NULL, AlignedGraph

NOUNS = ("cat", "dog", "girl", "boy", "cake", "book", "ball", "bird", "hero", "king")
NAMES = ("Emma", "Liam", "Noah", "Ava")
HELD_OUT_NOUN = "hedgehog"
INTRANSITIVE = {"smiled": "smile", "slept": "sleep", "ran": "run"}
TRANSITIVE = {"liked": "like", "saw": "see", "found": "find", "helped": "help"}
DATIVE = {"gave": "give", "sent": "send"}
SAYING = {"said": "say", "knew": "know"}

FRAMES = {
    **{v: "LAMBDA a . LAMBDA e . @ . agent ( e , a )" for v in INTRANSITIVE.values()},
    **{v: "LAMBDA a . LAMBDA b . LAMBDA e . @ . agent ( e , b ) AND @ . theme ( e , a )"
       for v in TRANSITIVE.values()},
    **{v: "LAMBDA a . LAMBDA b . LAMBDA c . LAMBDA e . @ . agent ( e , c ) AND @ . theme ( e , b ) "
          "AND @ . recipient ( e , a )" for v in DATIVE.values()},
    **{v: "LAMBDA a . LAMBDA b . LAMBDA e . @ . agent ( e , b ) AND @ . ccomp ( e , a )"
       for v in SAYING.values()},
}

GEN_TAG = "subj_to_obj_common"
IN_DIST = "in_distribution"


class _Builder:
    def __init__(self):
        self.tokens, self.z, self.edges = [], [], {}

    def word(self, tok, label=NULL):
        self.tokens.append(tok)
        self.z.append(label)
        return len(self.tokens) - 1

    def graph(self):
        return AlignedGraph(len(self.tokens), 1, tuple(self.z), dict(self.edges))


class ToyGrammar:
    """Random sentence generator; ``unique_labels`` keeps every node label distinct."""

    def __init__(self, rng, unique_labels=False, allow_held_out_object=False):
        self.rng = rng
        self.unique = unique_labels
        self.allow_held_out_object = allow_held_out_object
        self.used = set()

    def _choice(self, options, distinct=False):
        options = [o for o in options if not ((self.unique or distinct) and o in self.used)]
        pick = options[self.rng.integers(len(options))]
        self.used.add(pick)
        return pick

    def noun_phrase(self, b, role):
        if self.rng.random() < 0.25:
            return self._name(b)
        nouns = list(NOUNS)
        if role == "agent" or self.allow_held_out_object:
            nouns.append(HELD_OUT_NOUN)
        noun = self._choice(nouns)
        definite = not self.unique and self.rng.random() < 0.5
        art = b.word("the" if definite else "a", DEFINITE if definite else NULL)
        pos = b.word(noun, noun)
        if definite:
            b.edges[(art, pos)] = ARTICLE
        return pos

    def _name(self, b):
        # names are referenced by surface form, so never repeat one
        name = self._choice(NAMES, distinct=True)
        return b.word(name, name)

    def clause(self, b, depth=0):
        kinds = ["intransitive", "transitive", "dative"] + (["saying"] if depth == 0 else [])
        kind = kinds[self.rng.integers(len(kinds))]
        subj = self.noun_phrase(b, "agent")
        if kind == "intransitive":
            verb = self._verb(b, INTRANSITIVE)
        elif kind == "transitive":
            verb = self._verb(b, TRANSITIVE)
            b.edges[(verb, self.noun_phrase(b, "theme"))] = "theme"
        elif kind == "dative":
            verb = self._verb(b, DATIVE)
            b.edges[(verb, self.noun_phrase(b, "theme"))] = "theme"
            b.word("to")
            b.edges[(verb, self.noun_phrase(b, "recipient"))] = "recipient"
        else:
            verb = self._verb(b, SAYING)
            b.word("that")
            b.edges[(verb, self.clause(b, depth + 1))] = "ccomp"
        b.edges[(verb, subj)] = "agent"
        return verb

    def _verb(self, b, table):
        form = self._choice(sorted(table))
        return b.word(form, table[form])

    def sentence(self):
        self.used = set()
        b = _Builder()
        self.clause(b)
        b.word(".")
        return b


def _held_out_as_object(g):
    return any(g.z[k] == HELD_OUT_NOUN and label != "agent" for (_, k), label in g.edges.items())


def primitives():
    """Single-word entries for every noun, name and verb lemma."""
    out = []
    for noun in NOUNS + (HELD_OUT_NOUN,):
        out.append(((noun,), NOUN_TEMPLATE.replace("@", noun)))
    for name in NAMES:
        out.append(((name,), name))
    for lemma, frame in sorted(FRAMES.items()):
        out.append(((lemma,), frame.replace("@", lemma)))
    return out


def generate(n_train=400, n_dev=100, n_test=100, n_gen=100, seed=0, unique_labels=False,
             with_primitives=True):
    """Dict of split name -> list of :class:`CogsExample`.

    Sentences are distinct across all splits.  ``gen`` holds only sentences
    using the held-out noun outside the agent role (absent when
    ``unique_labels`` is set, since those sentences are not constrained).
    """
    rng = np.random.default_rng(seed)
    seen = set()
    pools = {"in": [], "gen": []}
    want_in = n_train + n_dev + n_test
    want_gen = 0 if unique_labels else n_gen
    grammar = ToyGrammar(rng, unique_labels, allow_held_out_object=True)
    attempts = 0
    while len(pools["in"]) < want_in or len(pools["gen"]) < want_gen:
        attempts += 1
        if attempts > 200 * (want_in + want_gen + 10):
            raise RuntimeError("toy grammar cannot produce enough distinct sentences")
        b = grammar.sentence()
        key = tuple(b.tokens)
        if key in seen:
            continue
        g = b.graph()
        pool = "gen" if _held_out_as_object(g) else "in"
        if len(pools[pool]) >= (want_in if pool == "in" else want_gen):
            continue
        seen.add(key)
        pools[pool].append((key, serialize_lf(g)))

    def make(split, items, tag):
        return [CogsExample(f"{split}-{i + 1}", toks, lf, tag) for i, (toks, lf) in enumerate(items)]

    train_items = pools["in"][:n_train]
    if with_primitives:
        train_items = train_items + primitives()
    order = rng.permutation(len(train_items))
    splits = {
        "train": make("train", [train_items[i] for i in order], IN_DIST),
        "dev": make("dev", pools["in"][n_train:n_train + n_dev], IN_DIST),
        "test": make("test", pools["in"][n_train + n_dev:], IN_DIST),
    }
    if want_gen:
        splits["gen"] = make("gen", pools["gen"], GEN_TAG)
    return splits


def write_tsv(examples, path):
    with open(path, "w") as fh:
        for ex in examples:
            fh.write(f"{' '.join(ex.tokens)}\t{ex.lf}\t{ex.tag}\n")


def write_cogs_dir(root, **kwargs):
    """Write ``root/cogs/{split}.tsv`` files; returns the generated splits."""
    out = Path(root) / "cogs"
    out.mkdir(parents=True, exist_ok=True)
    splits = generate(**kwargs)
    for name, examples in splits.items():
        write_tsv(examples, out / f"{name}.tsv")
    return splits


CHAIN_WORDS = ("apple", "bread", "cloud", "drum", "eagle", "flute", "grape", "harp", "igloo", "jelly",
               "kite", "lemon", "mango", "nut", "olive", "pear", "quilt", "rose", "sand", "tulip",
               "umbra", "vase", "wheat", "yarn")
CHAIN_ROLES = ("agent", "theme", "recipient")


def chain_role(src):
    """Deterministic edge label of edges leaving ``src``."""
    return CHAIN_ROLES[CHAIN_WORDS.index(src) % len(CHAIN_ROLES)]


def chain_dataset(n_train=300, n_dev=100, seed=0, min_len=3, max_len=7):
    """Unique-node-label corpus in COGS format.

    Every token is a distinct word labeled with itself and consecutive words
    are linked by a role edge chosen by :func:`chain_role`.  There are no
    null-labeled tokens, so the gold alignment is the only labeling that is
    consistent across the corpus.
    """
    rng = np.random.default_rng(seed)
    seen, items = set(), []
    while len(items) < n_train + n_dev:
        n = int(rng.integers(min_len, max_len + 1))
        words = tuple(CHAIN_WORDS[i] for i in rng.choice(len(CHAIN_WORDS), size=n, replace=False))
        if words in seen:
            continue
        seen.add(words)
        edges = {(i, i + 1): chain_role(words[i]) for i in range(n - 1)}
        items.append((words, serialize_lf(AlignedGraph(n, 1, words, edges))))

    def make(split, part):
        return [CogsExample(f"{split}-{i + 1}", toks, lf, IN_DIST) for i, (toks, lf) in enumerate(part)]

    return {"train": make("train", items[:n_train]), "dev": make("dev", items[n_train:])}


def write_chain_dir(root, **kwargs):
    out = Path(root) / "cogs"
    out.mkdir(parents=True, exist_ok=True)
    splits = chain_dataset(**kwargs)
    for name, examples in splits.items():
        write_tsv(examples, out / f"{name}.tsv")
    return splits
