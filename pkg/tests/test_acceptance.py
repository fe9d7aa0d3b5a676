"""Acceptance criteria 1-9 at desk scale (15 x 15 spacetime lattice, masses 1)."""

import numpy as np
import pytest

from catfeyn.amplitude import amplitude_from_categorical, canonicalize, equivalent, feynman_rules, parse_amplitude
from catfeyn.diagram.ir import (
    compose_sequential,
    evaluate_numeric,
    linearize,
    new_propagator_count,
    translate,
    two_dimensionalize,
)
from catfeyn.diagram.numeric import MOMENTUM_METHOD, POSITION_METHOD, TermEvaluator
from catfeyn.examples import example_graph
from catfeyn.fock import NUCLEON, FockBasis, FockLayout, operator_matrix
from catfeyn.lattice import LatticeParams
from catfeyn.opalg import OperatorString, parse_term, phi, wick_expand
from catfeyn.splitmerge import LITERAL, enumerate_partitions, isometry_defect, merge_matrix, split_matrix
from catfeyn.verify import (
    field_commutator_residual,
    inner_product_residuals,
    ladder_commutator_residual,
    propagator_symmetry_residual,
    round_trip_numeric,
    round_trip_symbolic,
    splitmerge_checks,
    yukawa_ladder_terms,
)

DELTA = " * delta4(p1'+p2'-p1-p2)"
NN_DISPLAY = "(-i*g)^2 * [ i/((p1-p1')^2-m^2+i*eps) + i/((p1-p2')^2-m^2+i*eps) ]" + DELTA
NNBAR_DISPLAY = "(-i*g)^2 * i/((p1+p2)^2-m^2+i*eps)" + DELTA
NN_LOOP_DISPLAY = ("(-i*g)^4 * sum[k] w_ir^-4 * i/((p1-p1')^2-m^2+i*eps) * i/(k^2-M^2+i*eps)"
                   " * i/((k+p1-p1')^2-M^2+i*eps) * i/((p2'-p2)^2-m^2+i*eps)" + DELTA)
MESON_LOOP_DISPLAY = ("(-i*g)^4 * sum[k] w_ir^-4 * i/(k^2-M^2+i*eps) * i/((k+p1')^2-M^2+i*eps)"
                      " * i/((k+p1'-p1)^2-M^2+i*eps) * i/((k-p2')^2-M^2+i*eps)" + DELTA)

# normally ordered terms as printed for the four worked translations
PRINTED = {
    "meson_decay": "(-i*g) * sum[x] w_uv^-4 * N+d(x) N-d(x) m(x)",
    "nn_tree": "(-i*g)^2/2 * sum[x1,x2] w_uv^-8 * N+d(x1) N+d(x2) N+(x1) N+(x2) * DF[m](x1-x2)",
    "nnbar_s": "(-i*g)^2/2 * sum[x1,x2] w_uv^-8 * N+d(x2) N-d(x2) N+(x1) N-(x1) * DF[m](x1-x2)",
    "meson_loop": "(-i*g)^4/24 * sum[x1,x2,x3,x4] w_uv^-16 * md(x3) md(x4) m(x1) m(x2)"
                  " * DF[M](x1-x2) DF[M](x2-x4) DF[M](x4-x3) DF[M](x3-x1)",
}

TOL_TIGHT, TOL_OP, TOL_MATRIX = 1e-12, 1e-9, 1e-8


@pytest.fixture(scope="module")
def params():
    return LatticeParams(3, 5)


def _categorical(name):
    g = example_graph(name)
    legs_in = [(l.ladder_species, l.momentum) for l in g.incoming]
    legs_out = [(l.ladder_species, l.momentum) for l in g.outgoing]
    return amplitude_from_categorical(translate(g), legs_in, legs_out)


def test_criterion_1_nn_amplitude(criterion):
    want = canonicalize(parse_amplitude(NN_DISPLAY)).text()
    cat = _categorical("nn_tree").text()
    rules = feynman_rules(example_graph("nn_tree"), symmetrize=True).text()
    criterion(1, f"NN->NN categorical == rules == display: {cat}")
    assert cat == want
    assert rules == want


def test_criterion_2_nnbar_and_loops(criterion):
    nnbar = _categorical("nnbar_s").text()
    nn_loop = equivalent(feynman_rules(example_graph("nn_loop")), parse_amplitude(NN_LOOP_DISPLAY))
    meson_loop = equivalent(feynman_rules(example_graph("meson_loop")), parse_amplitude(MESON_LOOP_DISPLAY))
    criterion(2, f"NNbar s-channel {nnbar}; NN loop match {nn_loop}; meson loop match {meson_loop}")
    assert nnbar == canonicalize(parse_amplitude(NNBAR_DISPLAY)).text()
    assert feynman_rules(example_graph("nnbar_s"), symmetrize=True).text() == nnbar
    assert nn_loop and meson_loop


def _pairings(items):
    if not items:
        return [[]]
    out = []
    for i in range(1, len(items)):
        for rest in _pairings(items[1:i] + items[i + 1:]):
            out.append([(items[0], items[i])] + rest)
    return out


def test_criterion_3_wick_counts(criterion):
    x = ["x1", "x2", "x3", "x4"]
    terms = wick_expand(OperatorString(tuple(phi(v) for v in x)))
    pats = {frozenset((p.a, p.b) for p in t.propagators) for t in terms}
    want = {frozenset()} | {frozenset([(a, b)]) for i, a in enumerate(x) for b in x[i + 1:]}
    want |= {frozenset(m) for m in _pairings(x)}
    counts = {}
    for k in range(1, 6):
        fields = OperatorString(tuple(phi(f"x{i}") for i in range(1, 2 * k + 1)))
        full = sum(1 for t in wick_expand(fields) if not t.remainder)
        counts[k] = (full, len(_pairings(list(range(2 * k)))))
    criterion(3, f"four fields -> {len(terms)} terms; full contractions (got, brute force) {counts}")
    assert len(terms) == 10 and pats == want
    assert all(a == b == int(np.prod(range(1, 2 * k, 2))) for k, (a, b) in counts.items())


def test_criterion_4_commutators_and_inner_products(criterion, params):
    comm = ladder_commutator_residual(params, 2, max_particles=2)
    inner = inner_product_residuals(params)
    criterion(4, f"[a,a+] residual {comm:.2e}; inner products {', '.join(f'{k} {v:.2e}' for k, v in inner.items())}")
    assert comm <= TOL_OP
    assert inner["particle"] <= TOL_OP
    assert max(inner["delta_x"], inner["chi_p"], inner["delta_chi"]) <= TOL_TIGHT


def test_criterion_5_propagators(criterion, params):
    sym = propagator_symmetry_residual(params)
    comm = field_commutator_residual(params, 2, pairs=225)
    criterion(5, f"Delta_F(z)-Delta_F(-z) {sym:.2e}; [phi+(x),phi-(y)]-D(x-y) {comm:.2e}")
    assert sym <= TOL_TIGHT
    assert comm <= TOL_OP


def test_criterion_6_split_merge(criterion, params):
    results = {r.name: r for r in splitmerge_checks(params, max_particles=3, max_branches=3)}
    layout = FockLayout.real_scalar(params)
    basis = FockBasis(layout, max_particles=3)
    s, _ = split_matrix(basis, 2, LITERAL)
    ms = merge_matrix(basis, 2, LITERAL) @ s
    theta = np.array([len(enumerate_partitions(o, 2)) for o in basis.occupancies])
    _, hi = isometry_defect(FockBasis(layout, max_particles=2), 2, LITERAL)
    criterion(6, "; ".join(f"{name} {r.residual:.2e}" for name, r in results.items() if not r.waived)
              + f"; literal merge.split = |Theta| (not an isometry, top singular value {hi:.2f})")
    for name, r in results.items():
        assert r.passed or r.waived, name
    assert np.abs(ms - np.diag(theta)).max() <= TOL_TIGHT


def test_criterion_7_round_trip(criterion, params, theory):
    terms = yukawa_ladder_terms(2)
    examples = [linearize(translate(example_graph(n))) for n in PRINTED]
    bad = round_trip_symbolic(terms + examples)
    small = round_trip_numeric(terms, LatticeParams(1, 3), theory)
    # desk scale: the printed examples with at most two vertices, on a spread of input states
    layout = FockLayout.yukawa(params, theory)
    desk = 0.0
    for name in ("meson_decay", "nn_tree", "nnbar_s"):
        t = linearize(translate(example_graph(name))).canonical()
        species = sorted({f.species for f in t.remainder})
        n_in = len(t.annihilators)
        src = FockBasis(layout, max_particles=n_in, species=species).restrict(lambda o: sum(o) == n_in)
        src = FockBasis(layout, occupancies=src.occupancies[::7])
        out_n = len(t.creators)
        dst = FockBasis(layout, max_particles=out_n, species=species).restrict(lambda o: sum(o) == out_n)
        a = evaluate_numeric(two_dimensionalize(None, t), params, theory, basis=src, out_basis=dst,
                             method=POSITION_METHOD)
        b = operator_matrix(TermEvaluator(t, params, theory, method=MOMENTUM_METHOD), src, dst)
        desk = max(desk, float(np.abs(a - b).max()))
    criterion(7, f"{len(terms)} Wick terms + {len(examples)} examples, {bad} symbolic failures; "
                 f"matrix residual small lattice {small:.2e}, desk scale {desk:.2e}")
    assert bad == 0
    assert small <= TOL_MATRIX and desk <= TOL_MATRIX


def test_criterion_8_composition(criterion, params, theory):
    d = translate(example_graph("nn_tree"))
    fs = compose_sequential(d, d)
    counts = [new_propagator_count(t) for _, t in fs]
    shape = [counts.count(j) for j in range(3)]
    layout = FockLayout.yukawa(params, theory)
    basis = FockBasis(layout, max_particles=2, species=[NUCLEON]).restrict(lambda o: sum(o) == 2)
    e = evaluate_numeric(d, params, theory, basis=basis, method=MOMENTUM_METHOD)
    s = evaluate_numeric(fs, params, theory, basis=basis, method=MOMENTUM_METHOD)
    resid = float(np.abs(s - e @ e).max())
    criterion(8, f"NN.NN -> {len(fs)} terms, by new propagators {shape}; "
                 f"|sum - product| {resid:.2e} on {len(basis)} two-nucleon states")
    assert len(fs) == 7 and shape == [1, 4, 2]
    assert resid <= TOL_MATRIX
    assert np.abs(e @ e).max() > 1e-6


def test_criterion_9_translation(criterion):
    got = {n: linearize(translate(example_graph(n))).canonical().text() for n in PRINTED}
    want = {n: parse_term(t).canonical().text() for n, t in PRINTED.items()}
    matches = sum(got[n] == want[n] for n in PRINTED)
    criterion(9, f"{matches}/{len(PRINTED)} translations reproduce the printed operator strings and prefactors")
    assert got == want
