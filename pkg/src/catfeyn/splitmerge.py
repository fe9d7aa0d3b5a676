"""Split and merge maps between a Fock space and k parallel copies of it.

A split map sends ``|beta_n>`` to a combination of ``|beta_i1> (x) ... (x)
|beta_ik>`` over all partitions ``(i_1, ..., i_k)`` of the particle content
``n``; the merge map is its exact adjoint.  Two weightings are available:

``literal``
    unit coefficients in the ``beta`` basis, i.e. the particle-state
    coefficient ``sqrt<n|n> / prod_j sqrt<i_j|i_j>``.  Then
    ``merge . split = |Theta_n^k|`` on each basis state.
``multinomial``
    ``beta`` coefficient ``sqrt(prod_p n_p! / prod_j (i_j)_p!)``, i.e. the
    multinomial ``prod_p n_p! / prod_j (i_j)_p!`` in particle-state units.
    Annihilators then slide exactly onto every branch.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .fock import FockBasis, FockLayout, FockVector, Truncation, basis_vector

LITERAL = "literal"
MULTINOMIAL = "multinomial"
WEIGHTINGS = (LITERAL, MULTINOMIAL)

Occupancy = tuple[int, ...]
Branches = tuple[Occupancy, ...]


class SplitMergeError(ValueError):
    pass


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """Ways to write n as an ordered sum of k non-negative parts, first part largest first."""
    if k == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class PartitionSet:
    source: Occupancy
    branches: int
    elements: tuple[Branches, ...]

    def __len__(self):
        return len(self.elements)

    @staticmethod
    def expected_size(source: Sequence[int], k: int) -> int:
        return math.prod(math.comb(n + k - 1, k - 1) for n in source)


def enumerate_partitions(n: Sequence[int], k: int) -> PartitionSet:
    """All k-tuples of occupancies summing to ``n`` mode-wise, deterministic order."""
    if k < 1:
        raise SplitMergeError("need at least one branch")
    return _partitions(tuple(n), k)


@functools.lru_cache(maxsize=65536)
def _partitions(n: Occupancy, k: int) -> PartitionSet:
    per_mode = [list(_compositions(c, k)) for c in n]
    elements = []
    for choice in itertools.product(*per_mode):
        elements.append(tuple(tuple(comp[j] for comp in choice) for j in range(k)))
    return PartitionSet(n, k, tuple(elements))


def split_coefficient(n: Occupancy, parts: Branches, weighting: str) -> float:
    """``beta``-basis coefficient of ``(x)_j |beta_{i_j}>`` in ``split |beta_n>``."""
    if weighting == LITERAL:
        return 1.0
    if weighting == MULTINOMIAL:
        num = math.prod(math.factorial(c) for c in n)
        den = math.prod(math.factorial(c) for part in parts for c in part)
        return math.sqrt(num / den)
    raise SplitMergeError(f"unknown weighting {weighting!r}")


@dataclass(frozen=True)
class TensorFockVector:
    """Sparse vector on the k-fold tensor power, keyed by k-tuples of occupancies."""

    amplitudes: Mapping[Branches, complex]
    k: int
    layout: FockLayout

    def __add__(self, other: "TensorFockVector") -> "TensorFockVector":
        amps = dict(self.amplitudes)
        for key, a in other.amplitudes.items():
            amps[key] = amps.get(key, 0) + a
        return TensorFockVector(amps, self.k, self.layout)

    def __rmul__(self, c) -> "TensorFockVector":
        return TensorFockVector({key: c * a for key, a in self.amplitudes.items()}, self.k, self.layout)

    def __sub__(self, other):
        return self + (-1) * other

    def inner(self, other: "TensorFockVector") -> complex:
        return sum((a.conjugate() * other.amplitudes.get(key, 0) for key, a in self.amplitudes.items()), 0j)

    def norm(self) -> float:
        return math.sqrt(abs(self.inner(self)))


@functools.lru_cache(maxsize=65536)
def _split_terms(occ: Occupancy, k: int, weighting: str) -> tuple[tuple[Branches, float], ...]:
    return tuple((parts, split_coefficient(occ, parts, weighting)) for parts in _partitions(occ, k).elements)


def split(v: FockVector, k: int, weighting: str = MULTINOMIAL) -> TensorFockVector:
    if k < 1:
        raise SplitMergeError("need at least one branch")
    out: dict[Branches, complex] = {}
    for occ, a in v.amplitudes.items():
        for parts, c in _split_terms(occ, k, weighting):
            out[parts] = out.get(parts, 0) + a * c
    return TensorFockVector(out, k, v.layout)


def merge(w: TensorFockVector, k: int | None = None, weighting: str = MULTINOMIAL) -> FockVector:
    """Exact adjoint of :func:`split` (the coefficients are real)."""
    k = w.k if k is None else k
    if k != w.k:
        raise SplitMergeError(f"vector has {w.k} branches, merge expects {k}")
    out: dict[Occupancy, complex] = {}
    for parts, a in w.amplitudes.items():
        n = tuple(sum(col) for col in zip(*parts))
        out[n] = out.get(n, 0) + a * split_coefficient(n, parts, weighting)
    trunc = Truncation(tuple(max(col) for col in zip(*out))) if out else Truncation((0,) * w.layout.n_slots)
    return FockVector(out, trunc, w.layout)


def on_branch(op: Callable[[FockVector], FockVector], j: int) -> Callable[[TensorFockVector], TensorFockVector]:
    """Lift a single-copy operator to branch ``j`` of the tensor power.

    ``op`` must be pure: its images of basis vectors are cached.
    """

    images: dict[Occupancy, FockVector] = {}

    def lifted(w: TensorFockVector) -> TensorFockVector:
        out: dict[Branches, complex] = {}
        for parts, a in w.amplitudes.items():
            image = images.get(parts[j])
            if image is None:
                image = images[parts[j]] = op(basis_vector(w.layout, parts[j]))
            for occ, b in image.amplitudes.items():
                key = parts[:j] + (occ,) + parts[j + 1:]
                out[key] = out.get(key, 0) + a * b
        return TensorFockVector(out, w.k, w.layout)

    return lifted


def tensor_basis(basis: FockBasis, k: int) -> list[Branches]:
    """Ambient basis: every partition of every occupancy in ``basis``, in order."""
    seen, out = set(), []
    for occ in basis.occupancies:
        for parts in enumerate_partitions(occ, k).elements:
            if parts not in seen:
                seen.add(parts)
                out.append(parts)
    return out


def _tensor_coordinates(w: TensorFockVector, index: Mapping[Branches, int], size: int) -> np.ndarray:
    out = np.zeros(size, complex)
    for key, a in w.amplitudes.items():
        if abs(a) == 0:
            continue
        if key not in index:
            raise SplitMergeError(f"component {key} outside the tensor basis")
        out[index[key]] += a
    return out


def split_matrix(basis: FockBasis, k: int, weighting: str) -> tuple[np.ndarray, list[Branches]]:
    tb = tensor_basis(basis, k)
    index = {key: i for i, key in enumerate(tb)}
    mat = np.zeros((len(tb), len(basis)), complex)
    for j in range(len(basis)):
        mat[:, j] = _tensor_coordinates(split(basis.vector(j), k, weighting), index, len(tb))
    return mat, tb


def merge_matrix(basis: FockBasis, k: int, weighting: str) -> np.ndarray:
    tb = tensor_basis(basis, k)
    mat = np.zeros((len(basis), len(tb)), complex)
    for j, parts in enumerate(tb):
        w = TensorFockVector({parts: 1.0 + 0j}, k, basis.layout)
        mat[:, j] = basis.coordinates(merge(w, k, weighting))
    return mat


def sliding_residual(op: Callable[[FockVector], FockVector], j: int, k: int, weighting: str,
                     basis: FockBasis, creation: bool = False) -> float:
    """Largest norm of the sliding defect over the states of a test space.

    Annihilation side: ``split . a - a_j . split`` on each state of ``basis``.
    Creation side (``creation=True``): ``merge . a^dagger_j - a^dagger . merge``
    on each state of the tensor basis over ``basis``.
    """
    if not 0 <= j < k:
        raise SplitMergeError(f"branch {j} out of range for {k} branches")
    lifted = on_branch(op, j)
    worst = 0.0
    if not creation:
        for i in range(len(basis)):
            v = basis.vector(i)
            worst = max(worst, (split(op(v), k, weighting) - lifted(split(v, k, weighting))).norm())
    else:
        for parts in tensor_basis(basis, k):
            w = TensorFockVector({parts: 1.0 + 0j}, k, basis.layout)
            worst = max(worst, (merge(lifted(w), k, weighting) - op(merge(w, k, weighting))).norm())
    return worst


def merge_split_factor(occ: Sequence[int], k: int, weighting: str) -> float:
    """Diagonal entry of ``merge . split`` on ``|beta_n>``."""
    return sum(split_coefficient(tuple(occ), parts, weighting) ** 2 for parts in enumerate_partitions(occ, k).elements)


def isometry_defect(basis: FockBasis, k: int, weighting: str) -> tuple[float, float]:
    """Extreme singular values of the merge map on the tensor basis over ``basis``.

    An isometry would give ``(1, 1)``.
    """
    s = np.linalg.svd(merge_matrix(basis, k, weighting), compute_uv=False)
    return float(s.min()), float(s.max())
