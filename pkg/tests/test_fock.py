import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catfeyn.fock import (
    MESON,
    NUCLEON,
    FockBasis,
    FockError,
    FockLayout,
    ResourceError,
    Truncation,
    annihilate,
    basis_vector,
    compose,
    create,
    feynman_propagator,
    field_minus,
    field_plus,
    hamiltonian_phase,
    operator_matrix,
    particle_norm2,
    particle_state,
    propagator_D,
    propagator_kernel,
    vacuum,
)
from catfeyn.lattice import MOMENTUM, POSITION, LatticeParams, LatticePoint, spacetime_points


@pytest.fixture
def layout(tiny):
    return FockLayout.real_scalar(tiny)


def _p(params, c):
    return LatticePoint((c,), MOMENTUM, params)


def test_create_and_annihilate_on_basis_vector(layout, tiny):
    v = basis_vector(layout, (0, 2, 0))
    up = create(_p(tiny, 0), MESON)(v)
    assert up.amplitudes == {(0, 3, 0): pytest.approx(math.sqrt(3) * math.sqrt(3))}
    down = annihilate(_p(tiny, 0), MESON)(v)
    assert down.amplitudes == {(0, 1, 0): pytest.approx(math.sqrt(3) * math.sqrt(2))}
    assert annihilate(_p(tiny, 1), MESON)(v).is_zero()


def test_annihilate_vacuum_is_zero(layout, tiny):
    assert annihilate(_p(tiny, -1))(vacuum(layout)).is_zero()


def test_truncation_tracks_ladders(layout, tiny):
    v = vacuum(layout)
    assert v.truncation == Truncation((0, 0, 0))
    w = create(_p(tiny, 1))(v)
    assert w.truncation == Truncation((0, 0, 1))
    # lowering the vacuum gives a zero-dimensional space
    z = annihilate(_p(tiny, 1))(v)
    assert z.truncation.is_zero_space and not z.amplitudes
    with pytest.raises(FockError):
        basis_vector(layout, (0, 2, 0), Truncation((0, 1, 0)))


@given(st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_particle_norm_closed_form(occ):
    layout = FockLayout.real_scalar(LatticeParams(1, 3))
    v = particle_state(layout, occ)
    assert v.inner(v).real == pytest.approx(particle_norm2(layout, occ))


@given(st.integers(-1, 1), st.integers(-1, 1), st.lists(st.integers(0, 2), min_size=3, max_size=3))
def test_commutator_on_safe_states(a, b, occ):
    params = LatticeParams(1, 3)
    layout = FockLayout.real_scalar(params)
    v = basis_vector(layout, occ)
    pa, pb = _p(params, a), _p(params, b)
    lhs = annihilate(pa)(create(pb)(v)) - create(pb)(annihilate(pa)(v))
    expected = 3 * (a == b)
    for occ_out, amp in lhs.pruned(1e-12).amplitudes.items():
        assert occ_out == tuple(occ)
        assert amp == pytest.approx(expected)
    if expected == 0:
        assert lhs.is_zero()


def test_one_particle_state_from_vacuum(layout, tiny):
    p = _p(tiny, 1)
    v = create(p)(vacuum(layout))
    e = layout.energies[layout.slot(MESON, p)]
    # |p> = sqrt(2E) a^dagger(p)|0>, so <p|p> = 2 E omega_ir
    assert 2 * e * v.inner(v).real == pytest.approx(2 * e * 3)


def test_feynman_propagator_is_even(oracle):
    for z in spacetime_points(oracle):
        neg = tuple(-c for c in z.coords)
        assert abs(feynman_propagator(z.coords, 1, oracle) - feynman_propagator(neg, 1, oracle)) < 1e-12


def test_D_closed_form_at_origin(tiny):
    # D(0) = sum_p omega_ir^-1 / (2 E_p), energies 1, 1, 1 for p = -1/3, 0, 1/3 (floor(3*sqrt(10/9)) = 3)
    assert propagator_D((0, 0), 1, tiny) == pytest.approx(3 / 3 / 2)


def test_field_commutator_on_vacuum(tiny):
    layout = FockLayout.real_scalar(tiny)
    x = LatticePoint((1, -1), POSITION, tiny)
    y = LatticePoint((0, 1), POSITION, tiny)
    v = vacuum(layout)
    lhs = field_plus(x)(field_minus(y)(v)) - field_minus(y)(field_plus(x)(v))
    z = tuple(tiny.wrap(a - b) for a, b in zip(x.coords, y.coords))
    assert lhs.amplitudes[(0, 0, 0)] == pytest.approx(propagator_D(z, 1, tiny))


def test_propagator_kernel_kinds(tiny):
    k = propagator_kernel(tiny, 1, "F")
    assert k.shape == (9,)
    assert np.allclose(k, [feynman_propagator(z.coords, 1, tiny) for z in spacetime_points(tiny)])
    mom = propagator_kernel(tiny, 1, "Fmom", epsilon=0.1)
    assert mom.shape == (9,)
    with pytest.raises(FockError):
        propagator_kernel(tiny, 1, "X")


def test_hamiltonian_phase_is_diagonal(layout):
    v = basis_vector(layout, (1, 0, 1))
    out = hamiltonian_phase(1)(v)
    # E = 1 + 1 = 2; exp(i 2 pi 2) = 1
    assert out.amplitudes[(1, 0, 1)] == pytest.approx(1)
    half = hamiltonian_phase("1/4")(v)
    assert half.amplitudes[(1, 0, 1)] == pytest.approx(-1)


def test_basis_and_matrix(layout, tiny):
    basis = FockBasis(layout, max_particles=2)
    assert len(basis) == 10  # C(3 + 2, 2)
    a = operator_matrix(annihilate(_p(tiny, 0)), basis, strict=False)
    ad = operator_matrix(create(_p(tiny, 0)), basis, strict=False)
    assert np.allclose(a.conj().T[:4, :4], ad[:4, :4])


def test_basis_budget(oracle, theory):
    layout = FockLayout.yukawa(oracle, theory)
    with pytest.raises(ResourceError):
        FockBasis(layout, max_particles=3)


def test_compose_order(layout, tiny):
    v = vacuum(layout)
    op = compose(annihilate(_p(tiny, 0)), create(_p(tiny, 0)))
    assert op(v).amplitudes[(0, 0, 0)] == pytest.approx(3)


def test_species_are_separate(tiny, theory):
    layout = FockLayout.yukawa(tiny, theory)
    v = create(_p(tiny, 0), NUCLEON)(vacuum(layout))
    assert annihilate(_p(tiny, 0), MESON)(v).is_zero()
