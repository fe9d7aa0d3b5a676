import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catfeyn.fock import MESON, NUCLEON, ANTINUCLEON, FockLayout, TheoryParams, basis_vector, vacuum
from catfeyn.lattice import LatticeParams
from catfeyn.opalg import (
    OperatorError,
    OperatorString,
    Prefactor,
    Propagator,
    WickTerm,
    apply_operator_string,
    channel_species,
    expand_term,
    field_parts,
    is_normal_ordered,
    ladder,
    normal_order,
    parse_symbol,
    parse_term,
    phi,
    psi,
    psid,
    select_channel,
    smatrix_term,
    wick_expand,
    wick_term_count,
)


def brute_pairings(items):
    """All perfect matchings of a list, by recursion on the first element."""
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for i, partner in enumerate(rest):
        for m in brute_pairings(rest[:i] + rest[i + 1:]):
            out.append([(first, partner)] + m)
    return out


def contraction_sets(terms):
    return {frozenset((p.a, p.b) for p in t.propagators) for t in terms}


def real_fields(n):
    return OperatorString(tuple(phi(f"x{i}") for i in range(1, n + 1)))


def test_four_real_fields_patterns():
    terms = wick_expand(real_fields(4))
    assert len(terms) == 10
    pats = contraction_sets(terms)
    x = [f"x{i}" for i in range(1, 5)]
    expected = {frozenset()}
    expected |= {frozenset([pair]) for pair in itertools.combinations(x, 2)}
    expected |= {frozenset(m) for m in brute_pairings(x)}
    assert pats == expected
    # the empty pattern keeps every field inside the normal ordering
    assert terms[0].text() == ":phi(x1) phi(x2) phi(x3) phi(x4):"


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_full_contraction_count(k):
    n = 2 * k
    full = [t for t in wick_expand(real_fields(n)) if not t.remainder]
    assert len(full) == len(brute_pairings(list(range(n)))) == math.prod(range(1, n, 2))


@given(st.integers(0, 8))
def test_partial_pairing_count(n):
    assert len(wick_expand(real_fields(n))) == wick_term_count(n)


def test_complex_fields_only_pair_across():
    s = OperatorString((psid("x1"), psi("x2"), psid("x3"), psi("x4")))
    terms = wick_expand(s)
    # 1 + 4 single contractions + 2 double
    assert len(terms) == 7
    for t in terms:
        for p in t.propagators:
            assert p.mass == "M"


def test_yukawa_order_two_has_no_vanishing_pairs():
    terms = wick_expand(smatrix_term(2))
    for t in terms:
        for i, j in t.contractions:
            assert {smatrix_term(2).factors[i].name, smatrix_term(2).factors[j].name} in ({"phi"}, {"psi", "psid"})


def test_smatrix_term_text():
    assert smatrix_term(2).text() == "(-i*g)^2/2 * sum[x1,x2] w_uv^-8 * T{psid(x1) psi(x1) phi(x1) psid(x2) psi(x2) phi(x2)}"
    assert smatrix_term(0).text() == "1"


def test_field_parts():
    plus, minus = field_parts(phi("x"))
    assert plus == ladder(MESON, False, "x") and minus == ladder(MESON, True, "x")
    # psi destroys a nucleon and creates an antinucleon
    a, c = field_parts(psi("x"))
    assert a.species == NUCLEON and not a.is_creation and c.species == ANTINUCLEON and c.is_creation


def test_normal_order_is_stable():
    s = (ladder(NUCLEON, False, "x1"), ladder(MESON, True, "x2"), ladder(NUCLEON, True, "x1"))
    out = normal_order(s)
    assert [f.text() for f in out] == ["md(x2)", "N+d(x1)", "N+(x1)"]
    assert is_normal_ordered(out) and not is_normal_ordered(s)
    with pytest.raises(OperatorError):
        normal_order((phi("x"),))


@given(st.lists(st.tuples(st.sampled_from([MESON, NUCLEON, ANTINUCLEON]), st.booleans()), max_size=6))
def test_normal_order_idempotent(spec):
    s = tuple(ladder(sp, d, f"x{i}") for i, (sp, d) in enumerate(spec))
    once = normal_order(s)
    assert normal_order(once) == once
    assert sorted(map(str, once)) == sorted(map(str, s))


def test_expand_term_counts():
    t = wick_expand(smatrix_term(1))[0]
    assert len(expand_term(t)) == 8


def test_select_channel_nn():
    terms = wick_expand(smatrix_term(2))
    nn = select_channel(terms, [NUCLEON, NUCLEON], [NUCLEON, NUCLEON])
    keys = {t.key() for t in nn}
    assert "(-i*g)^2/2 * sum[x1,x2] w_uv^-8 * N+d(x1) N+d(x2) N+(x1) N+(x2) * DF[m](x1-x2)" in keys


def test_channel_species():
    assert channel_species("NN->NN") == ([NUCLEON, NUCLEON], [NUCLEON, NUCLEON])
    assert channel_species("m->NA") == ([MESON], [NUCLEON, ANTINUCLEON])
    assert channel_species("NNbar->0") == ([NUCLEON, ANTINUCLEON], [])
    with pytest.raises(OperatorError):
        channel_species("NN")
    with pytest.raises(OperatorError):
        channel_species("NX->NN")


@pytest.mark.parametrize("text", [
    "1",
    "N+d(x1) N+(x2) * DF[m](x1-x2)",
    "sum[x] w_uv^-4 * N+d(x) N+(x)",
    "(-i*g)^2/2 * sum[x1,x2] w_uv^-8 * N+d(x1) N+d(x2) N+(x1) N+(x2) * DF[m](x1-x2)",
    "-(-i*g)^3*2/3 * sum[x1] w_uv^-4 * md(x1) * D[M](x1-x2)",
])
def test_parse_term_round_trip(text):
    assert parse_term(text).text() == text


def test_parse_errors():
    with pytest.raises(OperatorError):
        parse_symbol("Q(x)")
    with pytest.raises(OperatorError):
        parse_term("bogus * N+(x)")


def test_prefactor_algebra():
    a = Prefactor(1, Fraction(1, 2))
    b = Prefactor(2, 3)
    assert (a * b) == Prefactor(3, Fraction(3, 2))
    assert a.numeric(2.0) == pytest.approx(-1j)
    with pytest.raises(OperatorError):
        Prefactor(-1)


def test_propagator_canonical_symmetry():
    assert Propagator("F", "m", "x2", "x1").canonical() == Propagator("F", "m", "x1", "x2")
    # the commutator function is not symmetric
    assert Propagator("D", "m", "x2", "x1").canonical() == Propagator("D", "m", "x2", "x1")


def test_orbit_key_and_automorphisms():
    t = parse_term("(-i*g)^2/2 * sum[x1,x2] w_uv^-8 * N+d(x1) N+d(x2) N+(x1) N+(x2) * DF[m](x1-x2)")
    assert t.automorphisms() == 2
    u = t.relabel({"x1": "x2", "x2": "x1"})
    assert u.orbit_key() == t.orbit_key()


def test_apply_operator_string_matches_ladders():
    params = LatticeParams(1, 3)
    layout = FockLayout.real_scalar(params)
    v = vacuum(layout)
    s = OperatorString((ladder(MESON, False, "x"), ladder(MESON, True, "y")))
    out = apply_operator_string(s, v, {"x": (0, 0), "y": (0, 0)})
    # <0| phi+(0) phi-(0) |0> = D(0) = 1/2 on this lattice
    assert out.amplitudes[(0, 0, 0)] == pytest.approx(0.5)
    with pytest.raises(OperatorError):
        apply_operator_string(s, v, {"x": (0, 0)})


def test_time_ordering_sorts_latest_left():
    params = LatticeParams(1, 3)
    layout = FockLayout.real_scalar(params)
    v = vacuum(layout)
    t_ord = OperatorString((phi("x"), phi("y")), time_ordered=True)
    early_late = apply_operator_string(t_ord, v, {"x": (-1, 0), "y": (1, 0)})
    plain = apply_operator_string(OperatorString((phi("y"), phi("x"))), v, {"x": (-1, 0), "y": (1, 0)})
    assert np.isclose(early_late.inner(early_late), plain.inner(plain))
    assert early_late.amplitudes.keys() == plain.amplitudes.keys()
    for k in plain.amplitudes:
        assert early_late.amplitudes[k] == pytest.approx(plain.amplitudes[k])
