import json
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagr.cfq import (
    SELECT_VAR,
    Category,
    CfqExample,
    SparqlError,
    SparqlQuery,
    Triple,
    check_slot_budget,
    compress,
    format_query,
    format_triples,
    graph_accuracy,
    graph_to_query,
    graph_to_sparql,
    parse_sparql,
    read_cfq_jsonl,
    read_split,
    shorten_predicate,
    sparql_to_graph,
)
from lagr.graphs import Edge, MRGraph, Node
from lagr.isomorphism import graph_isomorphic

EDITOR = ("SELECT DISTINCT ?x0 WHERE { ?x0 a ns:film.editor . ?x0 ns:film.director.film M3 . "
          "?x0 ns:people.person.gender ns:m.05zppz . ?x0 ns:people.person.nationality ns:m.059j2 }")
EDITOR_SHORT = ("select_?x0 director M3 . select_?x0 editor . select_?x0 gender ns:m.05zppz . "
                "select_?x0 nationality ns:m.059j2")
MARRIED = ("SELECT DISTINCT ?x0 WHERE { ?x0 a ns:people.person . ?x0 ns:people.person.spouses ?x1 . "
           "?x1 ns:film.producer.executive_produced M1 . ?x1 ns:people.person.gender ns:m.02zsn . "
           "?x1 ns:people.person.nationality ns:m.0345h }")
INFLUENCE = ("SELECT count(*) WHERE { ?x1 a ns:film.actor . ?x0 a ns:film.director . "
             "?x2 ns:film.cinematographer.film M2 . FILTER ( M3 != ?x2 ) . M3 ns:influence.influence_node.influenced ?x0 . "
             "M3 ns:influence.influence_node.influenced ?x1 . M3 ns:influence.influence_node.influenced M4 . "
             "M3 ns:people.person.spouse_s ?x2 }")

ENTITIES = ("?x0", "?x1", "?x2", "M0", "M1", "M2", "ns:m.0f8l9c")
PREDS = ("p", "q", "r")
CATS = ("actor", "editor")


def _labels(g):
    return sorted(n.label for n in g.nodes)


@st.composite
def queries(draw):
    # reflexive triples never occur in the corpus and have no graph encoding
    triples = draw(st.lists(st.tuples(st.sampled_from(ENTITIES), st.sampled_from(PREDS), st.sampled_from(ENTITIES))
                            .filter(lambda t: t[0] != t[2]), max_size=8, unique=True))
    cats = draw(st.lists(st.tuples(st.sampled_from(ENTITIES), st.sampled_from(CATS)), max_size=3, unique=True))
    filters = draw(st.lists(st.tuples(st.sampled_from(ENTITIES), st.sampled_from(ENTITIES)).filter(lambda p: p[0] != p[1]),
                            max_size=2, unique=True))
    select = draw(st.sampled_from(("count", "distinct_x0")))
    parts = [f"{s} {p} {o}" for s, p, o in triples] + [f"{e} a {c}" for e, c in cats]
    parts += [f"FILTER ( {a} != {b} )" for a, b in filters]
    parts = draw(st.permutations(parts))
    head = "SELECT count(*)" if select == "count" else "SELECT DISTINCT ?x0"
    return f"{head} WHERE {{ {' . '.join(parts)} }}"


class TestParse:
    def test_filter(self):
        assert parse_sparql("FILTER ?x0 != M0").filters == [("?x0", "M0")]
        assert parse_sparql("FILTER ( ?x0 != M0 )").filters == [("?x0", "M0")]

    def test_category(self):
        assert parse_sparql("?x0 a ns:film.actor").categories == [Category(("?x0",), "actor")]

    def test_two_place(self):
        assert parse_sparql("?x0 parent ?x1").triples == [Triple(("?x0",), "parent", ("?x1",))]

    def test_select_kinds(self):
        assert parse_sparql(EDITOR).select == "distinct_x0"
        assert parse_sparql(INFLUENCE).select == "count"
        assert parse_sparql(EDITOR_SHORT).select == "distinct_x0"

    def test_merged_lists(self):
        q = parse_sparql("M3 influenced [?x0, ?x1 M4]")
        assert q.triples == [Triple(("M3",), "influenced", ("?x0", "?x1", "M4"))]

    @pytest.mark.parametrize("text", ["SELECT * WHERE { ?x0 a b }", "SELECT count(*) WHERE { ?x0 }",
                                      "SELECT count(*) WHERE { ?x0 a b", "garbage ( (", "?x0 p [ ]",
                                      "FILTER ?x0 = M0", "FILTER foo != M0", "?x0 p ?x1 ?x2 ?x3"])
    def test_errors(self, text):
        with pytest.raises(SparqlError):
            parse_sparql(text)

    def test_error_names_span(self):
        with pytest.raises(SparqlError, match=r"'\?x0 p \?x1 \?x2'"):
            parse_sparql("SELECT count(*) WHERE { ?x0 a b . ?x0 p ?x1 ?x2 }")

    def test_shorten(self):
        assert shorten_predicate("ns:film.film.directed_by") == "film.directed_by"
        assert shorten_predicate("ns:film.actor", category=True) == "actor"
        assert shorten_predicate("ns:a.b.c/ns:d.e.f") == "b.c/e.f"
        assert shorten_predicate("parent") == "parent"


class TestCompress:
    def test_directed_by_example(self):
        q = compress(parse_sparql("M2 directed_by ?x0 . M3 directed_by ?x0"))
        assert format_triples(q.triples) == "[[M2, M3] directed_by ?x0]"

    def test_single_unchanged(self):
        q = parse_sparql("?x0 parent ?x1")
        assert compress(q).triples == q.triples

    def test_both_directions(self):
        q = compress(parse_sparql(INFLUENCE))
        infl = [t for t in q.triples if t.pred.endswith("influenced")]
        assert infl == [Triple(("M3",), "influence_node.influenced", ("?x0", "?x1", "M4"))]

    def test_subject_only_flag(self):
        q = compress(parse_sparql("M1 p ?x0 . M1 p ?x1"), merge_objects=False)
        assert len(q.triples) == 2

    @given(queries())
    @settings(max_examples=200)
    def test_idempotent(self, text):
        once = compress(parse_sparql(text))
        assert compress(once) == once

    @given(queries())
    @settings(max_examples=200)
    def test_preserves_constraints(self, text):
        q = parse_sparql(text)
        assert compress(q).constraint_set() == q.constraint_set()


class TestGraph:
    def test_figure_style_fragment(self):
        g = sparql_to_graph("SELECT DISTINCT ?x0 WHERE { ?x0 a actor . ?x0 parent M1 . ?x0 sibling M1 . "
                            "FILTER ( ?x0 != M1 ) }")
        assert _labels(g) == sorted(["M1", SELECT_VAR, "actor", "parent", "sibling"])
        by_label = {n.label: n.id for n in g.nodes}
        edges = {(g.node(e.src).label, g.node(e.dst).label, e.label) for e in g.edges}
        assert edges == {(SELECT_VAR, "actor", "agent"), ("parent", SELECT_VAR, "agent"), ("parent", "M1", "theme"),
                         ("sibling", SELECT_VAR, "agent"), ("sibling", "M1", "theme"),
                         (SELECT_VAR, "M1", "FILTER")}
        assert len(by_label) == 5

    def test_editor_example(self):
        g = sparql_to_graph(EDITOR_SHORT)
        assert _labels(g) == sorted([SELECT_VAR, "ns:m.05zppz", "ns:m.059j2", "gender", "nationality",
                                     "editor", "director", "M3"])
        assert graph_isomorphic(g, sparql_to_graph(graph_to_sparql(g)))
        text = graph_to_sparql(g)
        assert text == ("SELECT DISTINCT ?x0 WHERE { ?x0 director M3 . ?x0 editor . ?x0 gender ns:m.05zppz . "
                        "?x0 nationality ns:m.059j2 }")

    def test_ten_nodes(self):
        g = sparql_to_graph(MARRIED)
        assert len(g.nodes) == 10
        assert {"executive_produced", "spouses", "person", "gender", "nationality"} <= {
            n.label.split(".")[-1] for n in g.nodes}
        tokens = "Who married M1 's female German executive producer".split()
        assert len(tokens) == 8
        check_slot_budget(g, len(tokens), layers=2)
        with pytest.raises(ValueError, match="slots"):
            check_slot_budget(g, len(tokens), layers=1)

    def test_duplicate_predicates_are_distinct_nodes(self):
        g = sparql_to_graph("?x0 influenced M1 . ?x1 influenced M2")
        assert _labels(g).count("influenced") == 2

    def test_empty(self):
        assert sparql_to_graph("SELECT count(*) WHERE { }") == MRGraph()
        assert _labels(sparql_to_graph("SELECT DISTINCT ?x0 WHERE { }")) == [SELECT_VAR]
        assert graph_to_sparql(MRGraph()) == "SELECT count(*) WHERE { }"

    def test_paper_compression_example_to_graph(self):
        g = sparql_to_graph("SELECT count(*) WHERE { M2 directed_by ?x0 . M3 directed_by ?x0 }")
        pred = [n for n in g.nodes if n.label == "directed_by"]
        assert len(pred) == 1
        assert sorted(g.node(e.dst).label for e in g.edges if e.label == "agent") == ["M2", "M3"]

    @given(queries(), st.randoms(use_true_random=False))
    @settings(max_examples=200)
    def test_order_invariance(self, text, rnd):
        head, body = text.split("{", 1)
        parts = [p.strip() for p in body.rstrip("} ").split(" . ") if p.strip()]
        rnd.shuffle(parts)
        shuffled = f"{head}{{ {' . '.join(parts)} }}"
        assert graph_isomorphic(sparql_to_graph(text), sparql_to_graph(shuffled))

    @given(queries())
    @settings(max_examples=200)
    def test_round_trip(self, text):
        g = sparql_to_graph(text)
        back = sparql_to_graph(graph_to_sparql(g))
        assert graph_isomorphic(g, back)

    def test_reflexive_rejected(self):
        with pytest.raises(SparqlError, match="conflicting"):
            sparql_to_graph("?x0 p ?x0")

    def test_dangling_predicate_dropped(self, caplog):
        g = MRGraph([Node(0, SELECT_VAR), Node(1, "director"), Node(2, "M3")], [Edge(1, 2, "theme")])
        with caplog.at_level(logging.WARNING):
            q = graph_to_query(g)
        assert q.triples == [] and "director" in caplog.text
        assert q.select == "distinct_x0"

    def test_format_query_sorted(self):
        q = SparqlQuery("count", [("M1", "?x0")], [Triple(("?x0",), "b", ("M1",))], [Category(("?x0",), "a_cat")])
        assert format_query(q) == "SELECT count(*) WHERE { ?x0 a_cat . ?x0 b M1 . FILTER ( M1 != ?x0 ) }"


class TestCorpus:
    def test_jsonl_and_split(self, tmp_path):
        path = tmp_path / "dataset.jsonl"
        recs = [{"question": "Did M1 marry M2", "sparql": "SELECT count(*) WHERE { M1 spouse M2 }"},
                {"id": "q7", "questionPatternModEntities": "x", "question": "Who directed M3",
                 "sparql": "SELECT DISTINCT ?x0 WHERE { ?x0 director M3 }"}]
        path.write_text("\n".join(json.dumps(r) for r in recs) + "\n")
        exs = list(read_cfq_jsonl(path))
        assert [e.id for e in exs] == ["0", "q7"]
        assert exs[1].tokens == ("Who", "directed", "M3")
        split = tmp_path / "split.json"
        split.write_text(json.dumps({"trainIdxs": [0], "devIdxs": [], "testIdxs": [1]}))
        assert read_split(split) == {"train": ["0"], "dev": [], "test": ["1"]}

    def test_graph_accuracy(self):
        a = sparql_to_graph(EDITOR_SHORT)
        b = sparql_to_graph(graph_to_sparql(a))
        c = sparql_to_graph("select_?x0 director M3")
        assert graph_accuracy([b, c], [a, a]) == 0.5

    def test_example_type(self):
        ex = CfqExample("1", "Who directed M3", "SELECT DISTINCT ?x0 WHERE { ?x0 director M3 }", "train")
        assert ex.tokens == ("Who", "directed", "M3")
