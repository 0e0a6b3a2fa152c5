import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cellnet import corpus
from cellnet.graphs import (
    ColorMismatch,
    ColorNotPreserved,
    DanglingEndpoint,
    DomainMismatch,
    DuplicateId,
    MorphismError,
    NotAMorphism,
    SlotType,
    UnknownNode,
    UnmappedElement,
    colored_graph,
    compose,
    identity,
    input_tree,
    is_etale,
    load_morphism,
    mono_colors,
    mono_graph,
    morphism_from_node_map,
    signature,
    tree_automorphism_group,
    tree_iso,
    validate_colored_graph,
    validate_morphism,
)
from oracles import TWO_COLORS, etale_by_counting, random_graph, relabel


def test_build_and_roundtrip_dict():
    g = corpus.graph("feed3")
    assert g.nodes == ("1", "2", "3")
    assert validate_colored_graph(g.to_dict()) == g


def test_graph_errors():
    c = mono_colors()
    with pytest.raises(DanglingEndpoint):
        colored_graph(c, {"1": "cell"}, [("e", "1", "2", "arrow")])
    with pytest.raises(DuplicateId):
        colored_graph(c, [("1", "cell"), ("1", "cell")], [])
    with pytest.raises(DuplicateId):
        colored_graph(c, {"1": "cell"}, [("e", "1", "1", "arrow"), ("e", "1", "1", "arrow")])
    with pytest.raises(ColorMismatch):
        colored_graph(c, {"1": "blue"}, [])
    with pytest.raises(ColorMismatch):
        colored_graph(TWO_COLORS, {"p": "x", "q": "y"}, [("e", "p", "q", "xx")])
    with pytest.raises(UnknownNode):
        corpus.graph("feed3").in_edges("9")


def test_empty_graph():
    g = mono_graph([], [])
    assert g.nodes == ()
    assert is_etale(identity(g))


def test_input_tree_canonical_order():
    g = corpus.graph("bicolor")
    t = input_tree(g, "p1")
    assert [leaf.edge for leaf in t.leaves] == ["s1", "b2", "b2'"]
    assert str(t.signature) == "x<-[xx:x,yx:y*2]"
    assert t.signature.aut_order == 2
    assert t.signature.slot_types == (SlotType("xx", "x"), SlotType("yx", "y"), SlotType("yx", "y"))
    assert signature(g, "q1") == signature(g, "q3")


def test_signature_of_leafless_node():
    g = corpus.graph("double_edge")
    assert str(signature(g, "1")) == "cell<-[]"
    assert signature(g, "1").n_slots == 0
    assert tree_automorphism_group(input_tree(g, "2")).order == 2


def test_tree_iso_requires_equal_signature():
    g = corpus.graph("bicolor")
    assert tree_iso(input_tree(g, "p1"), input_tree(g, "q1")) is None
    iso = tree_iso(input_tree(g, "p1"), input_tree(g, "p2"))
    assert iso == {"s1": "s2", "b2": "b1", "b2'": "b1'"}


@pytest.mark.parametrize("name", corpus.MORPHISMS)
def test_corpus_maps_are_etale(name):
    f = corpus.morphism(name)
    assert is_etale(f)
    assert etale_by_counting(f)


def test_not_etale_reasons():
    g = corpus.graph("feed3")
    loop2 = mono_graph(["o"], [("l1", "o", "o"), ("l2", "o", "o")])
    f = validate_morphism(g, loop2, {a: "o" for a in g.nodes}, {e: "l1" for e in g.edges})
    r = is_etale(f)
    assert not r and r.reason == "NotSurjectiveOnInEdges"
    dbl = corpus.graph("double_edge")
    one = mono_graph(["a", "b"], [("x", "a", "b")])
    f = validate_morphism(dbl, one, {"1": "a", "2": "b"}, {"alpha": "x", "beta": "x"})
    r = is_etale(f)
    assert not r and r.reason == "NotInjectiveOnInEdges" and r.node == "2"


def test_morphism_validation_errors():
    g, h = corpus.graph("feed3"), corpus.graph("cycle2")
    with pytest.raises(UnmappedElement):
        validate_morphism(g, h, {"1": "a", "2": "b"}, {})
    with pytest.raises(NotAMorphism):
        validate_morphism(g, h, {"1": "a", "2": "a", "3": "a"}, {"e12": "ab", "e21": "ba", "e23": "ba"})
    b = corpus.graph("bicolor")
    with pytest.raises(ColorNotPreserved):
        validate_morphism(g, b, {"1": "p1", "2": "p1", "3": "p1"}, {"e12": "s1", "e21": "s1", "e23": "s1"})


def test_forced_edge_map_and_file_without_edges(tmp_path):
    g, h = corpus.graph("feed3"), corpus.graph("cycle2")
    f = morphism_from_node_map(g, h, {"1": "a", "2": "b", "3": "a"})
    assert f == corpus.morphism("feed3_fold")
    (tmp_path / "g.json").write_text(json.dumps(g.to_dict()))
    (tmp_path / "h.json").write_text(json.dumps(h.to_dict()))
    (tmp_path / "m.json").write_text(json.dumps(
        {"domain": "g.json", "codomain": "h.json", "node_map": {"1": "a", "2": "b", "3": "a"}}))
    assert load_morphism(tmp_path / "m.json") == f
    with pytest.raises(NotAMorphism):
        morphism_from_node_map(corpus.graph("split_pair"), corpus.graph("double_edge"),
                               {"1a": "1", "1b": "1", "2": "2"})


def test_compose_and_identity():
    psi, tau = corpus.morphism("feed3_fold"), corpus.morphism("cycle2_embed")
    assert compose(psi, tau) == identity(corpus.graph("cycle2"))
    r, iota = corpus.morphism("tail_fold"), corpus.morphism("cycle3_embed")
    assert compose(r, iota) == identity(corpus.graph("cycle3"))
    with pytest.raises(DomainMismatch):
        compose(psi, psi)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 10), st.booleans())
def test_relabeling_is_etale_and_preserves_signatures(seed, n, m, two):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m, two)
    h, iso = relabel(g, rng)
    assert is_etale(iso) and etale_by_counting(iso)
    for a in g.nodes:
        assert signature(g, a) == signature(h, iso(a))


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 10), st.booleans())
def test_etale_agrees_with_counting_oracle(seed, n, m, two):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m, two)
    h = random_graph(rng, max(1, n - 1), m, two)
    # random node map; keep it only if an edge map is forced
    nodes = list(h.nodes)
    nm = {a: nodes[rng.integers(len(nodes))] for a in g.nodes}
    try:
        f = morphism_from_node_map(g, h, nm)
    except MorphismError:
        return
    assert bool(is_etale(f)) == etale_by_counting(f)
