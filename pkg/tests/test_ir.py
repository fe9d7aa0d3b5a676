import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catfeyn.diagram.ir import (
    CONTROL_WIRE,
    CatDiagram,
    CoherentLadderBox,
    DiagramError,
    FormalSum,
    MergeNode,
    PositionSpider,
    PropagatorBox,
    SplitNode,
    compose_sequential,
    evaluate_numeric,
    linearize,
    new_propagator_count,
    render_dot,
    render_text,
    translate,
    two_dimensionalize,
)
from catfeyn.examples import example_graph
from catfeyn.fock import MESON, NUCLEON, FockBasis, FockLayout
from catfeyn.opalg import Prefactor, WickTerm, ladder, parse_term
from catfeyn.verify import yukawa_ladder_terms

NN = "(-i*g)^2/2 * sum[x1,x2] w_uv^-8 * N+d(x1) N+d(x2) N+(x1) N+(x2) * DF[m](x1-x2)"
ALL_TERMS = yukawa_ladder_terms(2)


def test_nn_tree_shape():
    d = translate(example_graph("nn_tree"))
    assert d.branches == 2
    assert d.count(SplitNode) == d.count(MergeNode) == 1
    assert d.count(CoherentLadderBox) == 4
    assert d.count(PositionSpider) == 2
    assert d.count(PropagatorBox) == 1
    # each spider feeds two ladder boxes and one propagator port
    assert d.spider_degree("s_x1") == d.spider_degree("s_x2") == 3
    assert linearize(d).canonical().text() == NN


def test_single_branch_has_no_split():
    d = translate(example_graph("meson_decay"))
    assert d.branches == 2
    one = two_dimensionalize(None, parse_term("sum[x] w_uv^-4 * N+d(x) N+(x)"))
    assert one.branches == 1 and one.count(SplitNode) == 0


def test_through_leg_is_a_bare_wire():
    d = translate(example_graph("through_leg"))
    assert d.branches == 1
    assert linearize(d).text() == "1"


def test_vacuum_term_has_no_field_wire():
    d = two_dimensionalize(None, parse_term("sum[x1,x2] w_uv^-8 * DF[m](x1-x2)"))
    assert d.branches == 0
    assert linearize(d).canonical().text() == "sum[x1,x2] w_uv^-8 * DF[m](x1-x2)"


@given(st.sampled_from(ALL_TERMS))
def test_round_trip(t):
    c = t.canonical()
    assert linearize(two_dimensionalize(None, c)).canonical().key() == c.key()


def test_round_trip_with_new_prefactor():
    t = parse_term(NN)
    d = two_dimensionalize(Prefactor(1, 3), t)
    assert linearize(d).prefactor == Prefactor(1, 3)


def test_extra_branches():
    t = parse_term(NN)
    d = two_dimensionalize(None, t, branches=3)
    assert d.branches == 3
    assert linearize(d).canonical().text() == NN
    with pytest.raises(DiagramError):
        two_dimensionalize(None, t, branches=1)


def test_rejects_bad_terms():
    with pytest.raises(DiagramError):
        two_dimensionalize(None, WickTerm(labels=("x",), remainder=(ladder(NUCLEON, False, "x"),
                                                                    ladder(NUCLEON, True, "x"))))
    with pytest.raises(DiagramError):
        two_dimensionalize(None, WickTerm(remainder=(ladder(NUCLEON, True, "x"),)))


def test_linearize_rejects_creation_before_annihilation():
    d = two_dimensionalize(None, parse_term("sum[x] w_uv^-4 * N+d(x) N+(x)"))
    nodes = dict(d.nodes)
    # swap the roles of the two boxes on the single branch
    nodes["a0"], nodes["c0"] = CoherentLadderBox(NUCLEON, True), CoherentLadderBox(NUCLEON, False)
    bad = CatDiagram(tuple(nodes.items()), d.wires, d.prefactor)
    with pytest.raises(DiagramError):
        linearize(bad)


def test_check_rejects_mistyped_wires():
    d = translate(example_graph("nn_tree"))
    w = next(w for w in d.wires if w.kind == CONTROL_WIRE)
    bad = replace(d, wires=d.wires + (replace(w, dst="s_x1"),))
    with pytest.raises(DiagramError):
        bad.check()


def test_nn_composition_counts():
    d = translate(example_graph("nn_tree"))
    fs = compose_sequential(d, d)
    counts = sorted(new_propagator_count(t) for _, t in fs)
    assert len(fs) == 7
    assert [counts.count(j) for j in range(3)] == [1, 4, 2]
    # labels of the second factor are renamed apart
    for _, t in fs:
        assert set(linearize(t).labels) == {"x1", "x2", "x3", "x4"}


def _term(n_ann, n_cre, offset):
    labels = tuple(f"y{offset + i}" for i in range(max(n_ann, n_cre, 1)))
    cre = tuple(ladder(NUCLEON, True, labels[i]) for i in range(n_cre))
    ann = tuple(ladder(NUCLEON, False, labels[i]) for i in range(n_ann))
    return WickTerm(labels=labels, remainder=cre + ann)


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_composition_term_count(a1, c1, a2, c2):
    d1 = two_dimensionalize(None, _term(a1, c1, 0))
    d2 = two_dimensionalize(None, _term(a2, c2, 10))
    fs = compose_sequential(d1, d2)
    expected = sum(math.comb(a2, j) * math.comb(c1, j) * math.factorial(j) for j in range(min(a2, c1) + 1))
    assert len(fs) == expected


def test_identity_composition():
    d = translate(example_graph("nn_tree"))
    ident = translate(example_graph("through_leg"))
    for first, second in ((ident, d), (d, ident)):
        fs = compose_sequential(first, second)
        assert len(fs) == 1
        assert linearize(fs.terms[0][1]).canonical().text() == NN


def test_render_dot_is_deterministic():
    d = translate(example_graph("meson_loop"))
    a, b = render_dot(d), render_dot(translate(example_graph("meson_loop")))
    assert a == b
    assert a.startswith("digraph catdiagram {")
    assert a.count("shape=circle") == 4
    fs = compose_sequential(translate(example_graph("nn_tree")), translate(example_graph("nn_tree")))
    assert render_dot(fs).count("subgraph cluster_") == 7


def test_render_text():
    out = render_text(translate(example_graph("nn_tree")))
    assert "branches: 2" in out and f"term: {NN}" in out


def test_numeric_composition_on_small_lattice(tiny, theory):
    # D links appear, so the check covers both kernels
    layout = FockLayout.yukawa(tiny, theory)
    basis = FockBasis(layout, max_particles=2, species=[NUCLEON]).restrict(lambda o: sum(o) == 2)
    d1 = two_dimensionalize(None, parse_term("(-i*g) * sum[x] w_uv^-4 * N+d(x) N+(x)"))
    d2 = translate(example_graph("nn_tree"))
    fs = compose_sequential(d1, d2)
    assert {new_propagator_count(t) for _, t in fs} == {0, 1}
    a = evaluate_numeric(d1, tiny, theory, basis=basis)
    b = evaluate_numeric(d2, tiny, theory, basis=basis)
    s = evaluate_numeric(fs, tiny, theory, basis=basis)
    assert np.abs(s - b @ a).max() <= 1e-8
    assert np.abs(b @ a).max() > 1e-3
