"""Finite position/momentum lattices, plane waves and the dispersion relation.

Positions live on ``(1/omega_uv) Z_{2w+1}^n`` and momenta on the dual lattice
``(1/omega_ir) Z_{2w+1}^n`` with ``2w+1 = omega_uv * omega_ir``.  Coordinates
are stored as integer representatives in ``{-w, ..., +w}`` so that all group
arithmetic is exact; the physical value of coordinate ``j`` is ``j/omega_uv``
(positions) or ``j/omega_ir`` (momenta).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Mapping

import numpy as np

POSITION = "position"
MOMENTUM = "momentum"


class LatticeError(ValueError):
    """Raised on mismatched lattices or malformed lattice data."""


@dataclass(frozen=True)
class LatticeParams:
    omega_uv: int
    omega_ir: int
    n_space: int = 1
    includes_time: bool = True

    def __post_init__(self):
        for name in ("omega_uv", "omega_ir"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1 or value % 2 == 0:
                raise LatticeError(f"{name} must be an odd positive integer, got {value!r}")
        if self.n_space < 1:
            raise LatticeError("n_space must be >= 1")

    @property
    def two_omega_plus_one(self) -> int:
        return self.omega_uv * self.omega_ir

    @property
    def omega(self) -> int:
        return (self.two_omega_plus_one - 1) // 2

    @property
    def spacetime_dim(self) -> int:
        """Number of components of a 4-position (time first)."""
        return self.n_space + 1

    def dual(self) -> "LatticeParams":
        """Swap the two cut-offs; applying it twice is the identity."""
        return LatticeParams(self.omega_ir, self.omega_uv, self.n_space, self.includes_time)

    def wrap(self, j: int) -> int:
        """Representative of ``j`` modulo 2w+1 in ``{-w, ..., +w}``."""
        n = self.two_omega_plus_one
        return (j + self.omega) % n - self.omega

    def coordinates(self) -> range:
        return range(-self.omega, self.omega + 1)

    def points(self, scale: str = POSITION, ndim: int | None = None) -> list["LatticePoint"]:
        """All lattice points in deterministic (lexicographic) order."""
        ndim = self.n_space if ndim is None else ndim
        return [LatticePoint(c, scale, self) for c in itertools.product(self.coordinates(), repeat=ndim)]

    def volume(self, scale: str = POSITION) -> int:
        """Norm squared of a delta/plane-wave state: ``omega_uv^n`` or ``omega_ir^n``."""
        base = self.omega_uv if scale == POSITION else self.omega_ir
        return base ** self.n_space

    def dirac(self, p, q) -> int:
        """Discretised momentum delta ``delta(p - q) = omega_ir^n delta_pq``."""
        return self.omega_ir ** self.n_space if p == q else 0


@dataclass(frozen=True)
class LatticePoint:
    coords: tuple[int, ...]
    scale: str
    params: LatticeParams = field(compare=True, repr=False)

    def __post_init__(self):
        if self.scale not in (POSITION, MOMENTUM):
            raise LatticeError(f"unknown scale {self.scale!r}")
        coords = tuple(int(c) for c in self.coords)
        w = self.params.omega
        if any(abs(c) > w for c in coords):
            raise LatticeError(f"coordinates {coords} outside {{-{w},...,{w}}}")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def wrapped(cls, coords, scale: str, params: LatticeParams) -> "LatticePoint":
        return cls(tuple(params.wrap(c) for c in coords), scale, params)

    @property
    def step(self) -> int:
        return self.params.omega_uv if self.scale == POSITION else self.params.omega_ir

    @property
    def value(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, self.step) for c in self.coords)

    def norm2(self) -> Fraction:
        return sum((v * v for v in self.value), Fraction(0))

    def __add__(self, other: "LatticePoint") -> "LatticePoint":
        return group_add(self, other)

    def __neg__(self) -> "LatticePoint":
        return LatticePoint.wrapped([-c for c in self.coords], self.scale, self.params)

    def __sub__(self, other: "LatticePoint") -> "LatticePoint":
        return group_add(self, -other)

    def __str__(self):
        vals = ",".join(str(v) for v in self.value)
        return f"({vals})"


def group_add(a: LatticePoint, b: LatticePoint) -> LatticePoint:
    """Componentwise addition modulo 2w+1."""
    if a.scale != b.scale or a.params != b.params or len(a.coords) != len(b.coords):
        raise LatticeError("cannot add points from different lattices")
    return LatticePoint.wrapped([x + y for x, y in zip(a.coords, b.coords)], a.scale, a.params)


def _floor_sqrt(q: Fraction) -> int:
    # floor(sqrt(q)) == isqrt(floor(q)) for rational q >= 0
    return math.isqrt(q.numerator // q.denominator)


def dispersion_energy(p: LatticePoint, mass) -> Fraction:
    """On-shell energy floored onto the dual time lattice.

    ``E_p = floor(omega_ir * sqrt(|p|^2 + m^2)) / omega_ir``, computed exactly.
    """
    if p.scale != MOMENTUM:
        raise LatticeError("dispersion_energy needs a momentum-lattice point")
    ir = p.params.omega_ir
    s = p.norm2() + Fraction(mass) ** 2
    return Fraction(_floor_sqrt(s * ir * ir), ir)


@dataclass(frozen=True)
class FourMomentum:
    """Spatial momentum plus an (exact rational) energy on the dual time lattice."""

    spatial: LatticePoint
    energy: Fraction

    def __post_init__(self):
        if self.spatial.scale != MOMENTUM:
            raise LatticeError("FourMomentum needs a momentum-lattice spatial part")
        e = Fraction(self.energy)
        if (e * self.spatial.params.omega_ir).denominator != 1:
            raise LatticeError(f"energy {e} is not on the dual time lattice")
        object.__setattr__(self, "energy", e)

    @classmethod
    def on_shell(cls, spatial: LatticePoint, mass) -> "FourMomentum":
        return cls(spatial, dispersion_energy(spatial, mass))

    @property
    def params(self) -> LatticeParams:
        return self.spatial.params

    @property
    def energy_index(self) -> int:
        return int(self.energy * self.params.omega_ir)

    def indices(self) -> tuple[int, ...]:
        """Integer indices (energy first), *not* wrapped."""
        return (self.energy_index,) + self.spatial.coords

    def __str__(self):
        return f"(E={self.energy}, p={self.spatial})"


def minkowski_square(k: FourMomentum) -> Fraction:
    """``E^2 - |k|^2`` as an exact rational."""
    return k.energy ** 2 - k.spatial.norm2()


def minkowski_phase_index(p_idx, x_idx) -> int:
    """Integer ``m`` with ``p.x = m / (2w+1)`` for Minkowski ``p.x = E t - p.x``."""
    return p_idx[0] * x_idx[0] - sum(a * b for a, b in zip(p_idx[1:], x_idx[1:]))


@dataclass(frozen=True)
class ControlVector:
    """Function on a position lattice, stored by value at every lattice point.

    ``ndim`` is ``n_space`` for 3-position controls and ``n_space + 1`` for
    4-position controls (time is coordinate 0).  The inner product carries the
    volume element ``1/omega_uv^ndim``.
    """

    amplitudes: np.ndarray
    params: LatticeParams
    ndim: int

    @cached_property
    def points(self) -> list[LatticePoint]:
        return self.params.points(POSITION, self.ndim)

    def __add__(self, other: "ControlVector") -> "ControlVector":
        _check_same(self, other)
        return ControlVector(self.amplitudes + other.amplitudes, self.params, self.ndim)

    def __rmul__(self, c) -> "ControlVector":
        return ControlVector(c * self.amplitudes, self.params, self.ndim)

    def at(self, x: LatticePoint) -> complex:
        return complex(self.amplitudes[flat_index(x)])

    @classmethod
    def zero(cls, params: LatticeParams, ndim: int | None = None) -> "ControlVector":
        ndim = params.n_space if ndim is None else ndim
        return cls(np.zeros(params.two_omega_plus_one ** ndim, complex), params, ndim)


def flat_index(x: LatticePoint) -> int:
    """Position of ``x`` in ``params.points(scale, len(x.coords))``."""
    n = x.params.two_omega_plus_one
    idx = 0
    for c in x.coords:
        idx = idx * n + (c + x.params.omega)
    return idx


def _check_same(a: ControlVector, b: ControlVector):
    if a.params != b.params or a.ndim != b.ndim:
        raise LatticeError("control vectors live on different lattices")


def delta_state(x: LatticePoint) -> ControlVector:
    """Position eigenstate: ``omega_uv^ndim`` at ``x``, zero elsewhere."""
    ndim = len(x.coords)
    v = ControlVector.zero(x.params, ndim)
    v.amplitudes[flat_index(x)] = x.params.omega_uv ** ndim
    return v


def _coordinate_table(params: LatticeParams, ndim: int) -> np.ndarray:
    return np.array(list(itertools.product(params.coordinates(), repeat=ndim)), dtype=np.int64)


def chi_state(p: LatticePoint) -> ControlVector:
    """Momentum eigenstate ``x -> exp(i 2 pi p.x)`` on the spatial lattice."""
    if p.scale != MOMENTUM:
        raise LatticeError("chi_state needs a momentum-lattice point")
    params = p.params
    phase = _coordinate_table(params, len(p.coords)) @ np.array(p.coords)
    return ControlVector(np.exp(2j * np.pi * phase / params.two_omega_plus_one), params, len(p.coords))


def chi4_state(k: FourMomentum) -> ControlVector:
    """4-momentum eigenstate ``x -> exp(-i 2 pi k.x)`` (Minkowski product).

    At ``t = 0`` this agrees with :func:`chi_state` of the spatial part.
    """
    params = k.params
    table = _coordinate_table(params, params.spacetime_dim)
    idx = np.array(k.indices())
    phase = table[:, 0] * idx[0] - table[:, 1:] @ idx[1:]
    return ControlVector(np.exp(-2j * np.pi * phase / params.two_omega_plus_one), params, params.spacetime_dim)


def relativistic_chi_state(p: LatticePoint, mass) -> ControlVector:
    """``sqrt(2 E_p) chi_p``."""
    e = dispersion_energy(p, mass)
    return math.sqrt(2 * e) * chi_state(p)


def control_inner(a: ControlVector, b: ControlVector) -> complex:
    _check_same(a, b)
    w = a.params.omega_uv ** a.ndim
    return complex(np.vdot(a.amplitudes, b.amplitudes) / w)


def spacetime_points(params: LatticeParams) -> list[LatticePoint]:
    """4-positions ``(t, x...)`` in the order used by every position-indexed array."""
    return params.points(POSITION, params.spacetime_dim)


def spacetime_momenta(params: LatticeParams) -> list[tuple[int, ...]]:
    """Integer indices ``(k0, k...)`` of all off-shell lattice 4-momenta."""
    return [tuple(c) for c in itertools.product(params.coordinates(), repeat=params.spacetime_dim)]
