import numpy as np
import pytest
from hypothesis import given, strategies as st

from cellnet import corpus
from cellnet.balanced import enumerate_balanced, quotient
from cellnet.dynamics import (
    FieldError,
    NotEssentiallySurjective,
    NotSymmetric,
    PhaseMismatch,
    check_group_invariance,
    check_ode_equivalence,
    check_related,
    evaluations_agree,
    field_from_dict,
    field_to_dict,
    load_field,
    pullback_field,
    pushforward_field,
    realizability_witness,
    realize,
    slot_permutation,
    symmetrize,
    template_field,
    validate_symmetry,
    virtual_field,
)
from cellnet.exprlang import bind
from cellnet.graphs import compose, mono_graph, signature, validate_morphism
from cellnet.groupoid import graph_automorphisms
from cellnet.phase import PhaseAssignment
from oracles import random_graph, relabel

KINDS = ("linear", "tanh", "cubic")
ONE = {"cell": 1}


def f2(u, v):
    return u * v + np.sin(u + v)


def test_realize_double_edge():
    g = corpus.graph("double_edge")
    X = realize(load_field(corpus.path("double_edge_field.json"), g))
    x = np.random.default_rng(0).normal(size=(100, 2))
    want = np.stack([np.zeros(100), f2(x[:, 0], x[:, 0])], axis=-1)
    assert np.abs(X(x) - want).max() <= 1e-12


def test_realize_split_pair():
    g = corpus.graph("split_pair")
    w = virtual_field(g, {"c1": ["u0_0*u1_0 + sin(u0_0 + u1_0)"]}, ONE)
    x = np.random.default_rng(1).normal(size=(100, 3))
    want = np.stack([np.zeros(100), np.zeros(100), f2(x[:, 0], x[:, 1])], axis=-1)
    assert np.abs(realize(w)(x) - want).max() <= 1e-12


def test_realize_cycle_tail():
    g = corpus.graph("cycle_tail")
    X = realize(load_field(corpus.path("tanh_single.toml"), g))
    x = np.random.default_rng(2).normal(size=(100, 6))
    f = np.tanh(x) - 0.5 * x
    want = f[:, [2, 0, 1, 2, 3, 4]]
    assert np.abs(X(x) - want).max() <= 1e-12


def test_realize_feed3_and_unbatched():
    X = realize(load_field(corpus.path("tanh_single.toml"), corpus.graph("feed3")))
    x = np.array([0.3, -1.2, 2.0])
    f = np.tanh(x) - 0.5 * x
    assert np.array_equal(X(x), f[[1, 0, 1]])
    assert X.component_plans["3"] == ("c0", ("2",))


def test_kernel_of_realization():
    g = corpus.graph("double_edge")
    w = virtual_field(g, {"c1": ["(u0_0 - u1_0)*sin(u0_0 - u1_0)"]}, ONE)
    x = np.random.default_rng(3).normal(size=(100, 2))
    assert np.abs(realize(w)(x)).max() <= 1e-12
    # nonzero on the split graph, where the two inputs are different cells
    w2 = pullback_field(corpus.morphism("split_to_double"), w)
    assert np.abs(realize(w2)(np.random.default_rng(3).normal(size=(100, 3)))).max() > 0.1


def test_realize_is_linear_in_modules():
    g = corpus.graph("bicolor")
    pa = PhaseAssignment(corpus.dims_for(g))
    a, b = template_field(g, "tanh", pa), template_field(g, "cubic", pa)
    summed = {}
    for c in a.skeleton.classes:
        sa, sb = a.assignment[c.id].sources(), b.assignment[c.id].sources()
        summed[c.id] = [f"({p}) + 2.5*({q})" for p, q in zip(sa, sb)]
    s = virtual_field(g, summed, pa)
    x = np.random.default_rng(4).normal(size=(50, 7))
    assert np.allclose(realize(s)(x), realize(a)(x) + 2.5 * realize(b)(x), rtol=0, atol=1e-12)


def test_symmetry_validation_and_symmetrize():
    g = corpus.graph("double_edge")
    sig, pa = signature(g, "2"), PhaseAssignment(ONE)
    bad = bind(["u0_0 - 2*u1_0"], sig, pa)
    rep = validate_symmetry(bad)
    assert not rep and rep.witness["swap"] == [0, 1]
    with pytest.raises(NotSymmetric):
        virtual_field(g, {"c1": bad}, pa)
    sym = symmetrize(bad)
    assert validate_symmetry(sym)
    lazy = symmetrize(bad, expand=False)
    assert sym.exprs is not None and lazy.exprs is None
    s = [np.array([[1.0], [2.0]]), np.array([[3.0], [-1.0]])]
    assert np.allclose(sym(s), lazy(s)) and np.allclose(sym(s)[:, 0], [-2.0, -0.5])
    good = bind(["u0_0*u1_0"], sig, pa)
    assert np.allclose(symmetrize(good)(s), good(s))


def test_field_errors():
    g = corpus.graph("double_edge")
    with pytest.raises(FieldError):
        virtual_field(g, {"c7": ["u0_0"]}, ONE)
    with pytest.raises(FieldError):
        virtual_field(g, {"c1": ["u0_0*u1_0"], "cell<-[arrow:cell*2]": ["u0_0*u1_0"]}, ONE)
    with pytest.raises(FieldError):
        field_from_dict(g, {"modules": {}})
    w = template_field(corpus.graph("cycle2"), "linear", ONE)
    with pytest.raises(PhaseMismatch):
        check_related(corpus.morphism("feed3_loop"), w)


def test_field_dict_roundtrip():
    g = corpus.graph("bicolor")
    w = load_field(corpus.path("bicolor_field.toml"), g)
    again = field_from_dict(g, field_to_dict(w))
    assert evaluations_agree(w, again)
    lin = load_field(corpus.path("bicolor_linear.json"), g)
    x = np.random.default_rng(5).normal(size=7)
    assert realize(lin)(x).shape == (7,)


def test_slot_permutation_bicolor():
    g = corpus.graph("bicolor")
    # the nontrivial automorphism fixes every node and swaps the parallel pair into p2
    swap = next(h for h in graph_automorphisms(g) if h.edge_map["b1"] == "b1'")
    assert slot_permutation(swap, "p2") == (0, 2, 1)
    assert slot_permutation(swap, "p1") == (0, 1, 2)


@pytest.mark.parametrize("name", corpus.MORPHISMS)
@pytest.mark.parametrize("kind", KINDS)
def test_pullback_is_related(name, kind):
    phi = corpus.morphism(name)
    w = template_field(phi.codomain, kind, corpus.dims_for(phi.codomain))
    rep = check_related(phi, w)
    assert rep and rep.max_defect <= 1e-10


def test_unrelated_field_is_detected():
    # a field on feed3 that does not come from the loop
    phi = corpus.morphism("feed3_loop")
    w = template_field(phi.codomain, "tanh", ONE)
    other = virtual_field(phi.domain, {"c0": ["2*u0_0"]}, ONE)
    X = realize(other)
    x = np.random.default_rng(6).normal(size=(10, 1))
    from cellnet.phase import apply, pushforward
    P = pushforward(phi, w.phase)
    assert np.abs(apply(P, realize(w)(x)) - X(apply(P, x))).max() > 1e-3


def test_automorphism_pullback_is_trivial():
    for name in corpus.GRAPHS:
        g = corpus.graph(name)
        w = template_field(g, "tanh", corpus.dims_for(g))
        for h in graph_automorphisms(g):
            assert evaluations_agree(pullback_field(h, w), w)
        assert check_group_invariance(g, w)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 10), st.booleans(), st.sampled_from(KINDS))
def test_pullback_functorial(seed, n, m, two, kind):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m, two)
    h, iso = relabel(g, rng)
    parts = enumerate_balanced(h)
    proj = quotient(h, parts[int(rng.integers(len(parts)))]).projection
    w = template_field(proj.codomain, kind, {"cell": 1, "x": 2, "y": 1})
    one_step = pullback_field(compose(proj, iso), w)
    two_step = pullback_field(iso, pullback_field(proj, w))
    assert evaluations_agree(one_step, two_step, tol=1e-12)
    assert check_related(proj, w) and check_related(compose(proj, iso), w)


def test_ode_equivalence_split_pair():
    phi = corpus.morphism("split_to_double")
    w = load_field(corpus.path("double_edge_field.json"), phi.codomain)
    rep = check_ode_equivalence(phi, w)
    assert rep and rep.bijective and rep.roundtrip_codomain and rep.roundtrip_domain
    wd = virtual_field(phi.domain, {"c1": ["cos(u0_0) + cos(u1_0) + u0_0*u1_0"]}, ONE)
    assert check_ode_equivalence(phi, w, wd)
    back = pushforward_field(phi, wd)
    assert evaluations_agree(pullback_field(phi, back), wd)


def test_ode_equivalence_needs_cover():
    one = mono_graph(["z"], [])
    g = corpus.graph("double_edge")
    f = validate_morphism(one, g, {"z": "1"}, {})
    w = load_field(corpus.path("double_edge_field.json"), g)
    with pytest.raises(NotEssentiallySurjective):
        check_ode_equivalence(f, w)


def test_equivariant_field_outside_image():
    g = corpus.graph("triangle")
    pa = PhaseAssignment(ONE)

    def F(x):
        a, b, c = x[..., 0], x[..., 1], x[..., 2]
        h = lambda p, q, r: p * q + r ** 2 - np.sin(p)  # noqa: E731
        return np.stack([h(a, b, c), h(b, c, a), h(c, a, b)], axis=-1)

    assert check_group_invariance(g, F, dims=pa)
    assert not realizability_witness(g, F, pa)
    w = template_field(g, "tanh", pa)
    assert realizability_witness(g, realize(w), pa)
