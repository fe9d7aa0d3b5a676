from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catfeyn.lattice import (
    MOMENTUM,
    POSITION,
    FourMomentum,
    LatticeError,
    LatticeParams,
    LatticePoint,
    chi4_state,
    chi_state,
    control_inner,
    delta_state,
    dispersion_energy,
    flat_index,
    minkowski_square,
    spacetime_points,
)

odd = st.integers(0, 3).map(lambda k: 2 * k + 1)


def test_rejects_even_cutoffs():
    with pytest.raises(LatticeError):
        LatticeParams(2, 5)
    with pytest.raises(LatticeError):
        LatticeParams(3, 5, n_space=0)


def test_sizes(oracle):
    assert oracle.two_omega_plus_one == 15
    assert oracle.omega == 7
    assert len(oracle.points()) == 15
    assert len(spacetime_points(oracle)) == 225


def test_point_out_of_range(oracle):
    with pytest.raises(LatticeError):
        LatticePoint((8,), POSITION, oracle)


@given(odd, odd, st.integers(-50, 50))
def test_wrap_is_a_representative(uv, ir, j):
    p = LatticeParams(uv, ir)
    w = p.wrap(j)
    assert -p.omega <= w <= p.omega
    assert (w - j) % p.two_omega_plus_one == 0


@given(odd, odd)
def test_dual_is_an_involution(uv, ir):
    p = LatticeParams(uv, ir, 2)
    assert p.dual().dual() == p
    assert p.dual().omega_uv == ir


@given(st.integers(-7, 7), st.integers(-7, 7), st.integers(-7, 7))
def test_group_laws(a, b, c):
    p = LatticeParams(3, 5)
    x, y, z = (LatticePoint((v,), MOMENTUM, p) for v in (a, b, c))
    zero = LatticePoint((0,), MOMENTUM, p)
    assert (x + y) + z == x + (y + z)
    assert x + y == y + x
    assert x + zero == x
    assert x + (-x) == zero
    assert x - y == x + (-y)


def test_mixed_lattices_do_not_add(oracle):
    with pytest.raises(LatticeError):
        LatticePoint((1,), MOMENTUM, oracle) + LatticePoint((1,), POSITION, oracle)


def test_dispersion_energy_values(oracle):
    # floor(5 * sqrt(p^2 + 1)) / 5, worked by hand
    assert dispersion_energy(LatticePoint((0,), MOMENTUM, oracle), 1) == 1
    assert dispersion_energy(LatticePoint((1,), MOMENTUM, oracle), 1) == Fraction(1)  # 5*sqrt(26/25)=5.099
    assert dispersion_energy(LatticePoint((3,), MOMENTUM, oracle), 1) == Fraction(1)  # sqrt(34)=5.83
    assert dispersion_energy(LatticePoint((5,), MOMENTUM, oracle), 1) == Fraction(7, 5)  # sqrt(50)=7.07
    assert dispersion_energy(LatticePoint((0,), MOMENTUM, oracle), 2) == 2
    with pytest.raises(LatticeError):
        dispersion_energy(LatticePoint((0,), POSITION, oracle), 1)


@given(st.integers(-7, 7), st.integers(0, 3))
def test_dispersion_energy_is_floor(c, m):
    p = LatticeParams(3, 5)
    e = dispersion_energy(LatticePoint((c,), MOMENTUM, p), m)
    exact = (Fraction(c, 5) ** 2 + m * m)
    assert e * 5 == int(e * 5)
    assert e ** 2 <= exact < (e + Fraction(1, 5)) ** 2


def test_four_momentum(oracle):
    k = FourMomentum.on_shell(LatticePoint((0,), MOMENTUM, oracle), 1)
    assert minkowski_square(k) == 1
    assert k.indices() == (5, 0)
    with pytest.raises(LatticeError):
        FourMomentum(LatticePoint((0,), MOMENTUM, oracle), Fraction(1, 3))


def test_flat_index_matches_point_order(oracle):
    for i, x in enumerate(spacetime_points(oracle)):
        assert flat_index(x) == i


def test_control_inner_products(oracle):
    x = LatticePoint((2,), POSITION, oracle)
    p = LatticePoint((-3,), MOMENTUM, oracle)
    assert control_inner(delta_state(x), delta_state(x)) == pytest.approx(3)
    assert control_inner(chi_state(p), chi_state(p)) == pytest.approx(5)
    expected = np.exp(2j * np.pi * (-3 * 2) / 15)
    assert abs(control_inner(delta_state(x), chi_state(p)) - expected) < 1e-12


def test_chi4_reduces_to_chi_at_time_zero(oracle):
    p = LatticePoint((2,), MOMENTUM, oracle)
    k = FourMomentum.on_shell(p, 1)
    # x -> exp(-i 2 pi (E t - p x)); at t = 0 it is exp(+i 2 pi p x)
    full = chi4_state(k).amplitudes.reshape(15, 15)
    assert np.allclose(full[7], chi_state(p).amplitudes)
