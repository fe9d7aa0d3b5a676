"""Numeric semantics of ladder-level Wick terms on the Fock oracle.

A term ``c * sum_x omega_uv^-d [creators][annihilators] prod K(x_a - x_b)`` acts
on a Fock vector by expanding every position-labelled ladder symbol into
momentum modes.  For fixed modes the position sums factor out as

    W(Q) = sum_x prod_l omega_uv^-d exp(i 2 pi Q_l.x_l) prod_c K_c(x_a - x_b)

where ``Q_l`` is the net 4-momentum index (created minus annihilated) at label
``l``.  Two independent evaluators of ``W`` are provided: a position-space
tensor contraction and a momentum-space one (discrete Fourier transform of
every kernel plus delta elimination along a spanning forest).
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..fock import (
    MAX_DIMENSION,
    FockVector,
    ResourceError,
    TheoryParams,
    Truncation,
    propagator_kernel,
)
from ..lattice import LatticeParams, LatticePoint, spacetime_points
from ..opalg import MESON_LINE, OperatorError, WickTerm

POSITION_METHOD = "position"
MOMENTUM_METHOD = "momentum"


class _Kernels:
    """Propagator kernels on one lattice, computed once and shared."""

    def __init__(self, params: LatticeParams, theory: TheoryParams):
        self.params = params
        self.theory = theory
        pts = spacetime_points(params)
        self.coords = np.array([p.coords for p in pts], dtype=np.int64)
        self.n_points = len(pts)
        if self.n_points > MAX_DIMENSION:
            raise ResourceError(f"control lattice has {self.n_points} points, budget {MAX_DIMENSION}")
        n = params.two_omega_plus_one
        d = params.spacetime_dim
        # flat index of the wrapped difference x - y
        diff = (self.coords[:, None, :] - self.coords[None, :, :] + params.omega) % n
        self.diff_index = np.zeros((self.n_points, self.n_points), dtype=np.int64)
        for axis in range(d):
            self.diff_index = self.diff_index * n + diff[:, :, axis]
        self.mink = np.outer(self.coords[:, 0], self.coords[:, 0]) - self.coords[:, 1:] @ self.coords[:, 1:].T
        self._cache: dict = {}

    def values(self, kind: str, mass_tag: str, epsilon: float) -> np.ndarray:
        key = ("z", kind, mass_tag, epsilon)
        if key not in self._cache:
            mass = self.theory.meson_mass if mass_tag == MESON_LINE else self.theory.nucleon_mass
            self._cache[key] = propagator_kernel(self.params, mass, kind, epsilon)
        return self._cache[key]

    def matrix(self, kind, mass_tag, epsilon) -> np.ndarray:
        key = ("xy", kind, mass_tag, epsilon)
        if key not in self._cache:
            self._cache[key] = self.values(kind, mass_tag, epsilon)[self.diff_index]
        return self._cache[key]

    def fourier(self, kind, mass_tag, epsilon) -> np.ndarray:
        """``Kt(k) = N^-d sum_z K(z) exp(+i 2 pi k.z / N)``, indexed like the points."""
        key = ("k", kind, mass_tag, epsilon)
        if key not in self._cache:
            n = self.params.two_omega_plus_one
            dft = np.exp(2j * np.pi * self.mink / n)
            self._cache[key] = dft @ self.values(kind, mass_tag, epsilon) / self.n_points
        return self._cache[key]


_KERNEL_CACHE: dict = {}


def _kernels(params: LatticeParams, theory: TheoryParams) -> _Kernels:
    key = (params, theory.meson_mass, theory.nucleon_mass)
    if key not in _KERNEL_CACHE:
        _KERNEL_CACHE[key] = _Kernels(params, theory)
    return _KERNEL_CACHE[key]


@dataclass
class _Edge:
    a: int
    b: int
    kind: str
    mass: str


class TermEvaluator:
    """Callable ``FockVector -> FockVector`` for one ladder-level Wick term.

    ``feynman_kernel`` selects how time-ordered propagator symbols are realised:
    ``"F"`` (lattice time-ordered sum) or ``"Fmom"`` (momentum representation
    with the given ``epsilon``).  Commutator symbols always use ``D``.
    """

    def __init__(self, term: WickTerm, params: LatticeParams, theory: TheoryParams | None = None,
                 method: str = POSITION_METHOD, feynman_kernel: str = "F", epsilon: float | None = None,
                 include_prefactor: bool = True):
        if not term.is_ladder_term:
            raise OperatorError("evaluate ladder-level terms; expand full fields first")
        if method not in (POSITION_METHOD, MOMENTUM_METHOD):
            raise ValueError(f"unknown method {method!r}")
        self.term = term
        self.params = params
        self.theory = theory or TheoryParams()
        self.method = method
        self.epsilon = self.theory.epsilon if epsilon is None else epsilon
        self.kernels = _kernels(params, self.theory)
        labels = list(term.labels)
        for f in term.remainder:
            if f.label is not None and f.label not in labels:
                labels.append(f.label)
        for p in term.propagators:
            for x in (p.a, p.b):
                if x not in labels:
                    labels.append(x)
        self.labels = labels
        self.index = {x: i for i, x in enumerate(labels)}
        self.edges = [
            _Edge(self.index[p.a], self.index[p.b], "D" if p.kind == "D" else feynman_kernel, p.mass)
            for p in term.propagators
        ]
        # bound labels carry the measure; free labels would need concrete values
        missing = set(labels) - set(term.labels)
        if missing:
            raise OperatorError(f"labels {sorted(missing)} are not bound by a sum")
        self.scale = term.prefactor.numeric(self.theory.coupling) if include_prefactor else 1.0
        self._w_cache: dict = {}
        self._prepare_forest()

    # -- mode expansion ----------------------------------------------------

    def __call__(self, v: FockVector) -> FockVector:
        layout = v.layout
        if layout.params != self.params:
            raise OperatorError("vector lives on a different lattice")
        n = self.params.two_omega_plus_one
        d = self.params.spacetime_dim
        w = self.params.omega_ir ** self.params.n_space
        sqrt_w = math.sqrt(w)
        field_norm = 1.0 / w
        zero_q = tuple((0,) * d for _ in self.labels)
        states = defaultdict(complex)
        for occ, amp in v.amplitudes.items():
            states[(occ, zero_q)] += amp
        for f in reversed(self.term.remainder):
            nxt = defaultdict(complex)
            dagger = f.is_creation
            if f.label is None:
                slots = [layout.slot(f.species, f.arg)]
            else:
                slots = list(layout.slots_of(f.species))
                li = self.index[f.label]
            for (occ, q), amp in states.items():
                for slot in slots:
                    k = occ[slot]
                    if not dagger and k == 0:
                        continue
                    c = sqrt_w * math.sqrt(k + 1 if dagger else k)
                    new_occ = occ[:slot] + (k + 1 if dagger else k - 1,) + occ[slot + 1:]
                    new_q = q
                    if f.label is not None:
                        c *= field_norm / math.sqrt(2 * layout.energies[slot])
                        p = layout.slot_momentum(slot)
                        sign = 1 if dagger else -1
                        ql = tuple((a + sign * b + self.params.omega) % n - self.params.omega for a, b in zip(q[li], p))
                        new_q = q[:li] + (ql,) + q[li + 1:]
                    nxt[(new_occ, new_q)] += amp * c
            states = nxt
        out = defaultdict(complex)
        for (occ, q), amp in states.items():
            wq = self.weight(q)
            if wq != 0:
                out[occ] += self.scale * amp * wq
        trunc = v.truncation
        if out:
            top = tuple(max(col) for col in zip(*out))
            trunc = Truncation(tuple(max(a, b) for a, b in zip(trunc.per_mode, top))) if not trunc.is_zero_space \
                else Truncation(top)
        return FockVector(dict(out), trunc, layout)

    # -- position sums -------------------------------------------------------

    def weight(self, q) -> complex:
        """``W(Q)`` for a tuple of per-label 4-momentum indices."""
        if q not in self._w_cache:
            if self.method == POSITION_METHOD:
                self._w_cache[q] = self._weight_position(q)
            else:
                self._w_cache[q] = self._weight_momentum(q)
        return self._w_cache[q]

    def _weight_position(self, q) -> complex:
        if not self.labels:
            return 1.0
        kern = self.kernels
        n = self.params.two_omega_plus_one
        d = self.params.spacetime_dim
        measure = float(self.params.omega_uv) ** (-d)
        operands, subs = [], []
        letters = [chr(ord("a") + i) for i in range(len(self.labels))]
        for i, ql in enumerate(q):
            ql = np.array(ql)
            phase = kern.coords[:, 0] * ql[0] - kern.coords[:, 1:] @ ql[1:]
            operands.append(measure * np.exp(2j * np.pi * phase / n))
            subs.append(letters[i])
        for e in self.edges:
            operands.append(kern.matrix(e.kind, e.mass, self.epsilon))
            subs.append(letters[e.a] + letters[e.b])
        expr = ",".join(subs) + "->"
        return complex(np.einsum(expr, *operands, optimize="greedy"))

    def _prepare_forest(self):
        parent = list(range(len(self.labels)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        self.self_loops, self.loop_edges, tree = [], [], []
        for e in self.edges:
            if e.a == e.b:
                self.self_loops.append(e)
                continue
            ra, rb = find(e.a), find(e.b)
            if ra == rb:
                self.loop_edges.append(e)
            else:
                parent[ra] = rb
                tree.append(e)
        # leaf-first elimination order per component
        adj = defaultdict(list)
        for e in tree:
            adj[e.a].append(e)
            adj[e.b].append(e)
        seen, self.elimination, self.roots = set(), [], []
        for root in range(len(self.labels)):
            if root in seen:
                continue
            self.roots.append(root)
            order, stack = [], [(root, None)]
            seen.add(root)
            while stack:
                node, via = stack.pop()
                order.append((node, via))
                for e in adj[node]:
                    other = e.b if e.a == node else e.a
                    if other not in seen:
                        seen.add(other)
                        stack.append((other, e))
            for node, via in reversed(order):
                if via is not None:
                    self.elimination.append((node, via))
        n_loops = len(self.loop_edges)
        if self.kernels.n_points ** n_loops > 10 ** 6:
            raise ResourceError(f"{n_loops} independent loops are too many for the momentum evaluator")

    def _weight_momentum(self, q) -> complex:
        kern = self.kernels
        n = self.params.two_omega_plus_one
        d = self.params.spacetime_dim
        omega = self.params.omega
        vol = float(self.params.omega_ir) ** d
        n_loop = len(self.loop_edges)
        if n_loop:
            grid = np.array(list(itertools.product(range(kern.n_points), repeat=n_loop)), dtype=np.int64)
        else:
            grid = np.zeros((1, 0), dtype=np.int64)
        count = grid.shape[0]
        qs = [np.tile(np.array(ql, dtype=np.int64), (count, 1)) for ql in q]
        weight = np.ones(count, complex)
        for e in self.self_loops:
            weight *= kern.values(e.kind, e.mass, self.epsilon)[_origin_index(self.params)]
        for j, e in enumerate(self.loop_edges):
            k = kern.coords[grid[:, j]]
            weight *= kern.fourier(e.kind, e.mass, self.epsilon)[grid[:, j]]
            qs[e.a] = qs[e.a] - k
            qs[e.b] = qs[e.b] + k
        for node, e in self.elimination:
            k = qs[node] if node == e.a else -qs[node]
            weight *= vol * kern.fourier(e.kind, e.mass, self.epsilon)[_flat(k, n, omega)]
            other = e.b if node == e.a else e.a
            qs[other] = qs[other] + qs[node]
        for r in self.roots:
            weight *= vol * np.all((qs[r] % n) == 0, axis=1)
        return complex(weight.sum())


def _origin_index(params: LatticeParams) -> int:
    n = params.two_omega_plus_one
    idx = 0
    for _ in range(params.spacetime_dim):
        idx = idx * n + params.omega
    return idx


def _flat(k: np.ndarray, n: int, omega: int) -> np.ndarray:
    wrapped = (k + omega) % n
    idx = np.zeros(k.shape[0], dtype=np.int64)
    for axis in range(k.shape[1]):
        idx = idx * n + wrapped[:, axis]
    return idx


def evaluate_term(term: WickTerm, v: FockVector, theory: TheoryParams | None = None, **kwargs) -> FockVector:
    return TermEvaluator(term, v.layout.params, theory, **kwargs)(v)


def bruteforce_term(term: WickTerm, v: FockVector, theory: TheoryParams | None = None) -> FockVector:
    """Reference evaluation: explicit sum over every label assignment.

    Applies the concrete field parts with :func:`apply_operator_string`; only
    feasible on very small lattices.
    """
    from ..opalg import apply_operator_string

    theory = theory or TheoryParams()
    params = v.layout.params
    pts = [p.coords for p in spacetime_points(params)]
    labels = list(term.labels)
    if len(pts) ** len(labels) > 10 ** 5:
        raise ResourceError("brute-force label sum too large")
    measure = float(params.omega_uv) ** (-params.spacetime_dim * len(labels))
    total = None
    for assignment in itertools.product(pts, repeat=len(labels)):
        w = apply_operator_string(term, v, dict(zip(labels, assignment)), theory)
        total = w if total is None else total + w
    if total is None:
        total = apply_operator_string(term, v, {}, theory)
    return (term.prefactor.numeric(theory.coupling) * measure) * total
