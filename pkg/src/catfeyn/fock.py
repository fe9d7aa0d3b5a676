"""Truncated Fock spaces and the operators acting on them.

This is the numerical oracle.  States are sparse maps from occupancy tuples to
complex amplitudes in the orthonormal product basis ``|beta_n>``; one slot per
(species, momentum mode).  Ladder operators shift the truncation exactly as
``a^dagger : H^(tau) -> H^(tau + delta_p)``, so no truncation artefacts arise
while applying operators; they only appear when results are read off on a
finite basis (see :class:`FockBasis`).
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .lattice import (
    MOMENTUM,
    POSITION,
    ControlVector,
    FourMomentum,
    LatticeError,
    LatticeParams,
    LatticePoint,
    dispersion_energy,
    minkowski_phase_index,
    spacetime_points,
)

MESON = "m"
NUCLEON = "n+"
ANTINUCLEON = "n-"


class FockError(ValueError):
    pass


class ResourceError(RuntimeError):
    """A requested matrix would exceed the desk-scale dimension budget."""


MAX_DIMENSION = 4096


@dataclass(frozen=True)
class TheoryParams:
    meson_mass: Fraction = Fraction(1)
    nucleon_mass: Fraction = Fraction(1)
    coupling: float = 1.0
    epsilon: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "meson_mass", Fraction(self.meson_mass))
        object.__setattr__(self, "nucleon_mass", Fraction(self.nucleon_mass))
        if self.meson_mass < 0 or self.nucleon_mass < 0:
            raise FockError("masses must be non-negative")
        if not self.epsilon > 0:
            raise FockError("epsilon must be positive")

    def mass(self, species: str) -> Fraction:
        return self.meson_mass if species == MESON else self.nucleon_mass


@dataclass(frozen=True)
class FockLayout:
    """Which species exist and how occupancy slots are laid out.

    Slot ``s * n_modes + i`` holds the occupation of mode ``i`` (in
    ``params.points(MOMENTUM)`` order) of species ``s``.
    """

    params: LatticeParams
    species: tuple[str, ...] = (MESON,)
    masses: tuple[Fraction, ...] = (Fraction(1),)

    @classmethod
    def real_scalar(cls, params: LatticeParams, mass=1) -> "FockLayout":
        return cls(params, (MESON,), (Fraction(mass),))

    @classmethod
    def complex_scalar(cls, params: LatticeParams, mass=1) -> "FockLayout":
        return cls(params, (NUCLEON, ANTINUCLEON), (Fraction(mass), Fraction(mass)))

    @classmethod
    def yukawa(cls, params: LatticeParams, theory: TheoryParams) -> "FockLayout":
        return cls(
            params,
            (MESON, NUCLEON, ANTINUCLEON),
            (theory.meson_mass, theory.nucleon_mass, theory.nucleon_mass),
        )

    @cached_property
    def modes(self) -> list[LatticePoint]:
        return self.params.points(MOMENTUM)

    @cached_property
    def _mode_index(self) -> dict[tuple[int, ...], int]:
        return {p.coords: i for i, p in enumerate(self.modes)}

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def n_slots(self) -> int:
        return len(self.species) * self.n_modes

    def species_index(self, species: str) -> int:
        try:
            return self.species.index(species)
        except ValueError:
            raise FockError(f"species {species!r} not in layout {self.species}") from None

    def slot(self, species: str, p: LatticePoint) -> int:
        if p.scale != MOMENTUM or p.params != self.params:
            raise FockError(f"{p} is not a mode of this momentum lattice")
        return self.species_index(species) * self.n_modes + self._mode_index[p.coords]

    def mass_of(self, species: str) -> Fraction:
        return self.masses[self.species_index(species)]

    @cached_property
    def energies(self) -> np.ndarray:
        """On-shell energy of every slot (as floats)."""
        return np.array([float(dispersion_energy(p, m)) for m in self.masses for p in self.modes])

    @cached_property
    def energy_indices(self) -> np.ndarray:
        ir = self.params.omega_ir
        return np.array([int(dispersion_energy(p, m) * ir) for m in self.masses for p in self.modes])

    def slot_momentum(self, slot: int) -> tuple[int, ...]:
        """Integer 4-momentum indices ``(E*omega_ir, p...)`` of a slot."""
        return (int(self.energy_indices[slot]),) + self.modes[slot % self.n_modes].coords

    def slots_of(self, species: str) -> range:
        s = self.species_index(species)
        return range(s * self.n_modes, (s + 1) * self.n_modes)

    def ladder_norm(self) -> float:
        """``sqrt(omega_ir^n)``."""
        return math.sqrt(self.params.omega_ir ** self.params.n_space)

    def dirac_delta(self, p: LatticePoint, q: LatticePoint) -> int:
        return self.params.dirac(p, q)


@dataclass(frozen=True)
class Truncation:
    per_mode: tuple[int, ...]

    @classmethod
    def uniform(cls, layout: FockLayout, tau: int) -> "Truncation":
        return cls((tau,) * layout.n_slots)

    def shift(self, slot: int, delta: int) -> "Truncation":
        t = list(self.per_mode)
        t[slot] += delta
        return Truncation(tuple(t))

    @cached_property
    def is_zero_space(self) -> bool:
        return min(self.per_mode, default=0) < 0

    def join(self, other: "Truncation") -> "Truncation":
        return Truncation(tuple(max(a, b) for a, b in zip(self.per_mode, other.per_mode)))

    def admits(self, occ: Sequence[int]) -> bool:
        return all(0 <= n <= t for n, t in zip(occ, self.per_mode))


@dataclass(frozen=True)
class FockVector:
    """Sparse vector ``sum_n c_n |beta_n>``; occupancies are plain int tuples."""

    amplitudes: Mapping[tuple[int, ...], complex]
    truncation: Truncation
    layout: FockLayout = field(repr=False)

    def __post_init__(self):
        if self.truncation.is_zero_space and self.amplitudes:
            raise FockError("non-zero vector in a zero-dimensional space")

    def __add__(self, other: "FockVector") -> "FockVector":
        amps = dict(self.amplitudes)
        for k, a in other.amplitudes.items():
            amps[k] = amps.get(k, 0) + a
        return FockVector(amps, _safe_join(self.truncation, other.truncation), self.layout)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + (-1) * other

    def __rmul__(self, c) -> "FockVector":
        return FockVector({k: c * a for k, a in self.amplitudes.items()}, self.truncation, self.layout)

    def inner(self, other: "FockVector") -> complex:
        """``<self|other>`` in the orthonormal beta basis."""
        return sum((a.conjugate() * other.amplitudes.get(k, 0) for k, a in self.amplitudes.items()), 0j)

    def norm(self) -> float:
        return math.sqrt(abs(self.inner(self)))

    def pruned(self, tol: float = 0.0) -> "FockVector":
        return FockVector({k: a for k, a in self.amplitudes.items() if abs(a) > tol}, self.truncation, self.layout)

    def is_zero(self, tol: float = 1e-12) -> bool:
        return all(abs(a) <= tol for a in self.amplitudes.values())


def _safe_join(a: Truncation, b: Truncation) -> Truncation:
    if a.is_zero_space:
        return b
    if b.is_zero_space:
        return a
    return a.join(b)


def basis_vector(layout: FockLayout, occ: Sequence[int], truncation: Truncation | None = None) -> FockVector:
    occ = tuple(occ)
    truncation = truncation or Truncation(occ)
    if not truncation.admits(occ):
        raise FockError(f"occupancy {occ} exceeds truncation")
    return FockVector({occ: 1.0 + 0j}, truncation, layout)


def vacuum(layout: FockLayout, truncation: Truncation | None = None) -> FockVector:
    truncation = truncation or Truncation((0,) * layout.n_slots)
    return basis_vector(layout, (0,) * layout.n_slots, truncation)


def _ladder(v: FockVector, slot: int, dagger: bool) -> FockVector:
    norm = v.layout.ladder_norm()
    out: dict[tuple[int, ...], complex] = {}
    for occ, a in v.amplitudes.items():
        n = occ[slot]
        if dagger:
            coeff = norm * math.sqrt(n + 1)
            new = occ[:slot] + (n + 1,) + occ[slot + 1:]
        else:
            if n == 0:
                continue
            coeff = norm * math.sqrt(n)
            new = occ[:slot] + (n - 1,) + occ[slot + 1:]
        out[new] = out.get(new, 0) + coeff * a
    trunc = v.truncation.shift(slot, 1 if dagger else -1)
    if trunc.is_zero_space:
        out = {}
    return FockVector(out, trunc, v.layout)


def create(p: LatticePoint, species: str = MESON) -> Callable[[FockVector], FockVector]:
    """``a^dagger(p)``: ``|beta_n> -> sqrt(omega_ir^n) sqrt(n_p + 1) |beta_{n + delta_p}>``."""

    def op(v: FockVector) -> FockVector:
        return _ladder(v, v.layout.slot(species, p), dagger=True)

    return op


def annihilate(p: LatticePoint, species: str = MESON) -> Callable[[FockVector], FockVector]:
    """``a(p)``: ``|beta_n> -> sqrt(omega_ir^n) sqrt(n_p) |beta_{n - delta_p}>``."""

    def op(v: FockVector) -> FockVector:
        return _ladder(v, v.layout.slot(species, p), dagger=False)

    return op


def particle_state(layout: FockLayout, occ: Sequence[int], truncation: Truncation | None = None) -> FockVector:
    """Relativistically normalised particle state ``|n>``.

    ``prod_p sqrt(2 E_p omega_ir^n)^{n_p} sqrt(n_p!)`` times ``|beta_n>``.
    """
    occ = tuple(occ)
    truncation = truncation or Truncation(occ)
    if not truncation.admits(occ):
        raise FockError(f"occupancy {occ} exceeds truncation")
    w = layout.params.omega_ir ** layout.params.n_space
    coeff = 1.0
    for n, e in zip(occ, layout.energies):
        if n:
            coeff *= math.sqrt(2 * e * w) ** n * math.sqrt(math.factorial(n))
    return FockVector({occ: complex(coeff)}, truncation, layout)


def particle_norm2(layout: FockLayout, occ: Sequence[int]) -> float:
    """Closed form ``<n|n> = prod_p (2 E_p omega_ir^n)^{n_p} n_p!``."""
    w = layout.params.omega_ir ** layout.params.n_space
    out = 1.0
    for n, e in zip(occ, layout.energies):
        out *= (2 * e * w) ** n * math.factorial(n)
    return out


def one_particle(layout: FockLayout, species: str, p: LatticePoint) -> tuple[int, ...]:
    occ = [0] * layout.n_slots
    occ[layout.slot(species, p)] = 1
    return tuple(occ)


def occupancy_from_particles(layout: FockLayout, particles: Iterable[tuple[str, LatticePoint]]) -> tuple[int, ...]:
    occ = [0] * layout.n_slots
    for species, p in particles:
        occ[layout.slot(species, p)] += 1
    return tuple(occ)


# -- position-space operators -------------------------------------------------


def _as_spacetime_indices(x) -> tuple[int, ...]:
    if isinstance(x, LatticePoint):
        if x.scale != POSITION:
            raise FockError("fields take position-lattice arguments")
        coords = x.coords
        if len(coords) == x.params.n_space:
            coords = (0,) + coords
        return coords
    return tuple(x)


def field_coefficients(layout: FockLayout, species: str, x, dagger: bool) -> np.ndarray:
    """Coefficient of each mode's ladder operator in a field part at ``x``.

    ``dagger=False``: ``omega_ir^-n (2E_p)^-1/2 exp(-i 2 pi p.x)`` (annihilation part);
    ``dagger=True``: the same with ``exp(+i 2 pi p.x)`` (creation part).
    """
    params = layout.params
    xi = _as_spacetime_indices(x)
    sign = 1 if dagger else -1
    n = params.two_omega_plus_one
    w = params.omega_ir ** params.n_space
    out = np.empty(layout.n_modes, complex)
    for i, slot in enumerate(layout.slots_of(species)):
        phase = minkowski_phase_index(layout.slot_momentum(slot), xi)
        out[i] = cmath.exp(sign * 2j * cmath.pi * phase / n) / (w * math.sqrt(2 * layout.energies[slot]))
    return out


def _smeared(v: FockVector, species: str, coeffs: np.ndarray, dagger: bool) -> FockVector:
    total: FockVector | None = None
    for slot, c in zip(v.layout.slots_of(species), coeffs):
        if c == 0:
            continue
        term = c * _ladder(v, slot, dagger)
        total = term if total is None else total + term
    if total is None:
        return 0 * v
    return total


def ladder_field(species: str, dagger: bool, x) -> Callable[[FockVector], FockVector]:
    """Coherent ladder box fed the position eigenstate at ``x``.

    Annihilation box = positive-frequency part, creation box = negative-frequency part.
    """

    def op(v: FockVector) -> FockVector:
        return _smeared(v, species, field_coefficients(v.layout, species, x, dagger), dagger)

    return op


def field_plus(x, species: str = MESON) -> Callable[[FockVector], FockVector]:
    """``phi^+(x) = sum_p omega_ir^-n (2E_p)^-1/2 a(p) exp(-i 2 pi p.x)``."""
    return ladder_field(species, False, x)


def field_minus(x, species: str = MESON) -> Callable[[FockVector], FockVector]:
    """``phi^-(x) = sum_p omega_ir^-n (2E_p)^-1/2 a^dagger(p) exp(+i 2 pi p.x)``."""
    return ladder_field(species, True, x)


def field(x, species: str = MESON) -> Callable[[FockVector], FockVector]:
    plus, minus = field_plus(x, species), field_minus(x, species)
    return lambda v: plus(v) + minus(v)


def hamiltonian_phase(t) -> Callable[[FockVector], FockVector]:
    """``exp(i 2 pi H t)`` with ``H`` diagonal, eigenvalue ``sum_p n_p E_p``."""
    t = Fraction(t)

    def op(v: FockVector) -> FockVector:
        ir = v.layout.params.omega_ir
        e_idx = v.layout.energy_indices
        out = {}
        for occ, a in v.amplitudes.items():
            energy = Fraction(int(np.dot(occ, e_idx)), ir)
            out[occ] = a * cmath.exp(2j * cmath.pi * float(energy * t))
        return FockVector(out, v.truncation, v.layout)

    return op


def coherent_ladder(species: str, dagger: bool, control: ControlVector) -> Callable[[FockVector], FockVector]:
    """Coherently controlled ladder operator with the control plugged in.

    The creation box is linear in the control:
    ``sum_x omega_uv^-d c(x) phi^-(x)``.  The annihilation box is its adjoint, so
    its control leg reads the control as a costate:
    ``sum_x omega_uv^-d c(x)^* phi^+(x)``.  Either way ``delta_x`` yields the
    field part at ``x`` and a relativistic spatial plane wave yields the bare
    ladder operator.
    """
    params = control.params
    d = control.ndim
    if d not in (params.n_space, params.spacetime_dim):
        raise LatticeError("control must live on the 3-position or 4-position lattice")
    weight = params.omega_uv ** d
    amps = control.amplitudes if dagger else control.amplitudes.conj()
    support = np.nonzero(amps)[0]
    points = control.points

    def op(v: FockVector) -> FockVector:
        coeffs = np.zeros(v.layout.n_modes, complex)
        for i in support:
            coeffs += amps[i] / weight * field_coefficients(v.layout, species, points[i].coords if d == params.spacetime_dim else (0,) + points[i].coords, dagger)
        return _smeared(v, species, coeffs, dagger)

    return op


# -- propagators ---------------------------------------------------------------


def propagator_D(z, mass, params: LatticeParams) -> complex:
    """``D(z) = sum_p omega_ir^-n (2E_p)^-1 exp(-i 2 pi p.z)``."""
    zi = _as_spacetime_indices(z)
    n = params.two_omega_plus_one
    w = params.omega_ir ** params.n_space
    total = 0j
    for p in params.points(MOMENTUM):
        e = dispersion_energy(p, mass)
        idx = (int(e * params.omega_ir),) + p.coords
        total += cmath.exp(-2j * cmath.pi * minkowski_phase_index(idx, zi) / n) / (2 * float(e))
    return total / w


def feynman_propagator(z, mass, params: LatticeParams) -> complex:
    """Time-ordered propagator; equal times use ``(D(z) + D(-z)) / 2``."""
    zi = _as_spacetime_indices(z)
    neg = tuple(params.wrap(-c) for c in zi)
    if zi[0] > 0:
        return propagator_D(zi, mass, params)
    if zi[0] < 0:
        return propagator_D(neg, mass, params)
    return (propagator_D(zi, mass, params) + propagator_D(neg, mass, params)) / 2


def propagator_kernel(params: LatticeParams, mass, kind: str = "F", epsilon: float = 1e-6) -> np.ndarray:
    """A propagator evaluated at every 4-position difference.

    ``kind`` is ``"F"`` (time-ordered), ``"D"`` (commutator function) or
    ``"Fmom"`` (momentum representation
    ``sum_k omega_ir^-d i exp(-i 2 pi k.z) / (k^2 - m^2 + i eps)`` over all
    off-shell lattice 4-momenta).  The array is indexed like
    :func:`spacetime_points`.
    """
    pts = spacetime_points(params)
    if kind == "D":
        return np.array([propagator_D(z.coords, mass, params) for z in pts])
    if kind == "F":
        return np.array([feynman_propagator(z.coords, mass, params) for z in pts])
    if kind == "Fmom":
        d = params.spacetime_dim
        coords = np.array([z.coords for z in pts], dtype=np.int64)
        ir = params.omega_ir
        k2 = (coords[:, 0] ** 2 - (coords[:, 1:] ** 2).sum(axis=1)) / ir ** 2
        weights = 1j / (k2 - float(mass) ** 2 + 1j * epsilon) / ir ** d
        # coords doubles as the momentum index table
        phase = np.outer(coords[:, 0], coords[:, 0]) - coords[:, 1:] @ coords[:, 1:].T
        return np.exp(-2j * np.pi * phase / params.two_omega_plus_one).T @ weights
    raise FockError(f"unknown propagator kind {kind!r}")


# -- finite bases and matrices ----------------------------------------------------


class FockBasis:
    """Finite list of occupancies used to read operators off as matrices.

    ``max_particles`` bounds the total particle number (per the whole layout);
    ``species`` restricts which species may be occupied.
    """

    def __init__(self, layout: FockLayout, truncation: Truncation | None = None, max_particles: int | None = None,
                 species: Sequence[str] | None = None, occupancies: Iterable[Sequence[int]] | None = None):
        self.layout = layout
        if occupancies is not None:
            occs = [tuple(o) for o in occupancies]
        else:
            occs = list(_enumerate_occupancies(layout, truncation, max_particles, species))
        if len(occs) > MAX_DIMENSION:
            raise ResourceError(f"basis dimension {len(occs)} exceeds budget {MAX_DIMENSION}")
        self.occupancies = occs
        self.index = {o: i for i, o in enumerate(occs)}
        if truncation is None and occs:
            truncation = Truncation(tuple(max(col) for col in zip(*occs)))
        self.truncation = truncation

    def __len__(self):
        return len(self.occupancies)

    def vector(self, i: int) -> FockVector:
        return basis_vector(self.layout, self.occupancies[i], self.truncation)

    def coordinates(self, v: FockVector, strict: bool = True, tol: float = 1e-12) -> np.ndarray:
        out = np.zeros(len(self), complex)
        for occ, a in v.amplitudes.items():
            i = self.index.get(occ)
            if i is None:
                if strict and abs(a) > tol:
                    raise FockError(f"component {occ} outside the basis")
                continue
            out[i] += a
        return out

    def restrict(self, predicate: Callable[[tuple[int, ...]], bool]) -> "FockBasis":
        return FockBasis(self.layout, occupancies=[o for o in self.occupancies if predicate(o)])


def _enumerate_occupancies(layout, truncation, max_particles, species):
    slots = list(range(layout.n_slots))
    if species is not None:
        allowed = set(itertools.chain.from_iterable(layout.slots_of(s) for s in species))
    else:
        allowed = set(slots)
    caps = [0] * layout.n_slots
    for s in allowed:
        caps[s] = truncation.per_mode[s] if truncation is not None else (max_particles or 0)
    if max_particles is None:
        if truncation is None:
            raise FockError("need a truncation or max_particles")
        total = 1
        for c in caps:
            total *= c + 1
            if total > MAX_DIMENSION:
                raise ResourceError(f"basis dimension exceeds budget {MAX_DIMENSION}")
        yield from itertools.product(*(range(c + 1) for c in caps))
        return
    # all occupancies with total <= max_particles, lexicographic by slot
    active = [s for s in slots if caps[s] > 0]

    def rec(i, remaining, occ):
        if i == len(active):
            yield tuple(occ)
            return
        s = active[i]
        for k in range(min(caps[s], remaining) + 1):
            occ[s] = k
            yield from rec(i + 1, remaining - k, occ)
        occ[s] = 0

    yield from sorted(rec(0, max_particles, [0] * layout.n_slots), key=lambda o: (sum(o), o))


def operator_matrix(op: Callable[[FockVector], FockVector], in_basis: FockBasis,
                    out_basis: FockBasis | None = None, strict: bool = True) -> np.ndarray:
    out_basis = out_basis or in_basis
    mat = np.zeros((len(out_basis), len(in_basis)), complex)
    for j in range(len(in_basis)):
        mat[:, j] = out_basis.coordinates(op(in_basis.vector(j)), strict=strict)
    return mat


def compose(*ops: Callable[[FockVector], FockVector]) -> Callable[[FockVector], FockVector]:
    """``compose(A, B)(v) == A(B(v))``."""

    def op(v):
        for f in reversed(ops):
            v = f(v)
        return v

    return op
