"""Invariant suite behind ``catfeyn verify``.

Each check returns a :class:`CheckResult` with the measured residual.  Checks
marked ``waived`` report a known, documented failure (the literal split/merge
weighting is not an isometry) without failing the run.
"""

from __future__ import annotations

import cmath
import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import RunConfig
from .diagram.ir import compose_sequential, evaluate_numeric, linearize, new_propagator_count, translate, \
    two_dimensionalize
from .diagram.numeric import MOMENTUM_METHOD, POSITION_METHOD, TermEvaluator
from .examples import example_graph
from .fock import (
    MESON,
    NUCLEON,
    FockBasis,
    FockLayout,
    Truncation,
    annihilate,
    create,
    field_minus,
    field_plus,
    operator_matrix,
    particle_state,
    one_particle,
    propagator_D,
    propagator_kernel,
)
from .lattice import (
    MOMENTUM,
    POSITION,
    LatticeParams,
    chi_state,
    control_inner,
    delta_state,
    dispersion_energy,
    spacetime_points,
)
from .opalg import expand_term, smatrix_term, wick_expand
from .splitmerge import LITERAL, MULTINOMIAL, WEIGHTINGS, merge_matrix, merge_split_factor, \
    sliding_residual, split_matrix

TOL_TIGHT = 1e-12
TOL_OP = 1e-9
TOL_MATRIX = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    waived: bool = False
    detail: str = ""

    def line(self) -> str:
        status = "WAIVED" if self.waived else ("PASS" if self.passed else "FAIL")
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status:6s} {self.name}: residual {self.residual:.3e} (tol {self.tolerance:.0e}){extra}"


def _result(name, residual, tol, detail="") -> CheckResult:
    return CheckResult(name, bool(residual <= tol), float(residual), tol, detail=detail)


# -- oracle ------------------------------------------------------------------------------


def ladder_commutator_residual(params: LatticeParams, tau: int, max_particles: int | None = None) -> float:
    """``max |[a(p), a^dagger(q)] - omega_ir^n delta_pq|`` on the truncation-safe subspace."""
    layout = FockLayout.real_scalar(params)
    basis = FockBasis(layout, Truncation.uniform(layout, tau), max_particles=max_particles)
    w = params.omega_ir ** params.n_space
    worst = 0.0
    modes = layout.modes
    mats = {p: (operator_matrix(annihilate(p), basis, strict=False), operator_matrix(create(p), basis, strict=False))
            for p in modes}
    for i, p in enumerate(modes):
        for j, q in enumerate(modes):
            a, _ = mats[p]
            _, ad = mats[q]
            comm = a @ ad - ad @ a
            # rows/columns where a^dagger(q) stays inside the truncation
            safe = [k for k, occ in enumerate(basis.occupancies) if occ[j] < tau
                    and (max_particles is None or sum(occ) < max_particles)]
            if not safe:
                continue
            block = comm[np.ix_(safe, safe)] - (w if i == j else 0) * np.eye(len(safe))
            worst = max(worst, float(np.abs(block).max()))
    return worst


def inner_product_residuals(params: LatticeParams, mass=1) -> dict[str, float]:
    layout = FockLayout.real_scalar(params, mass)
    w = params.omega_ir ** params.n_space
    res = {"particle": 0.0, "delta_x": 0.0, "chi_p": 0.0, "delta_chi": 0.0}
    states = {p: particle_state(layout, one_particle(layout, MESON, p)) for p in layout.modes}
    for p, q in itertools.product(layout.modes, repeat=2):
        got = states[p].inner(states[q])
        want = 2 * float(dispersion_energy(p, mass)) * w if p == q else 0.0
        res["particle"] = max(res["particle"], abs(got - want))
    n = params.two_omega_plus_one
    for x in params.points(POSITION):
        dx = delta_state(x)
        res["delta_x"] = max(res["delta_x"], abs(control_inner(dx, dx) - params.omega_uv ** params.n_space))
        for p in params.points(MOMENTUM):
            cp = chi_state(p)
            phase = sum(a * b for a, b in zip(p.coords, x.coords))
            res["delta_chi"] = max(res["delta_chi"], abs(control_inner(dx, cp) - cmath.exp(2j * cmath.pi * phase / n)))
    for p in params.points(MOMENTUM):
        cp = chi_state(p)
        res["chi_p"] = max(res["chi_p"], abs(control_inner(cp, cp) - params.omega_ir ** params.n_space))
    return res


def propagator_symmetry_residual(params: LatticeParams, mass=1) -> float:
    kern = propagator_kernel(params, mass, "F")
    pts = spacetime_points(params)
    index = {z.coords: i for i, z in enumerate(pts)}
    worst = 0.0
    for i, z in enumerate(pts):
        j = index[tuple(params.wrap(-c) for c in z.coords)]
        worst = max(worst, abs(kern[i] - kern[j]))
    return worst


def field_commutator_residual(params: LatticeParams, tau: int = 1, pairs: int | None = None, mass=1) -> float:
    """``max |[phi^+(x), phi^-(y)] - D(x - y)|`` on states one quantum below the truncation."""
    layout = FockLayout.real_scalar(params, mass)
    basis = FockBasis(layout, Truncation.uniform(layout, tau), max_particles=1)
    pts = spacetime_points(params)
    chosen = list(itertools.product(pts, repeat=2))
    if pairs is not None:
        step = max(1, len(chosen) // pairs)
        chosen = chosen[::step][:pairs]
    worst = 0.0
    for x, y in chosen:
        plus, minus = field_plus(x.coords), field_minus(y.coords)
        z = tuple(params.wrap(a - b) for a, b in zip(x.coords, y.coords))
        d = propagator_D(z, mass, params)
        for k in range(len(basis)):
            v = basis.vector(k)
            if any(n >= tau for n in basis.occupancies[k]):
                continue
            diff = plus(minus(v)) - minus(plus(v)) - d * v
            worst = max(worst, max((abs(a) for a in diff.amplitudes.values()), default=0.0))
    return worst


# -- split/merge ----------------------------------------------------------------------------


def splitmerge_checks(params: LatticeParams, max_particles: int = 3, max_branches: int = 3) -> list[CheckResult]:
    layout = FockLayout.real_scalar(params)
    basis = FockBasis(layout, max_particles=max_particles)
    create_basis = FockBasis(layout, max_particles=max(max_particles - 1, 0))
    out = []
    for weighting in WEIGHTINGS:
        adj = 0.0
        for k in range(1, max_branches + 1):
            s, _ = split_matrix(basis, k, weighting)
            m = merge_matrix(basis, k, weighting)
            adj = max(adj, float(np.abs(s.conj().T - m).max()))
        out.append(_result(f"split/merge adjointness [{weighting}]", adj, TOL_TIGHT))
    slide = 0.0
    for k in range(1, max_branches + 1):
        for p in layout.modes:
            for j in range(k):
                slide = max(slide, sliding_residual(annihilate(p), j, k, MULTINOMIAL, basis))
                slide = max(slide, sliding_residual(create(p), j, k, MULTINOMIAL, create_basis, creation=True))
    out.append(_result("sliding residual [multinomial]", slide, TOL_TIGHT))
    worst, factors = 0.0, set()
    for k in range(1, max_branches + 1):
        s, _ = split_matrix(basis, k, LITERAL)
        ms = merge_matrix(basis, k, LITERAL) @ s
        want = np.diag([merge_split_factor(o, k, LITERAL) for o in basis.occupancies])
        worst = max(worst, float(np.abs(ms - want).max()))
        factors.update(int(round(x)) for x in np.diag(want).real)
        iso = float(np.abs(ms - np.eye(len(basis))).max())
    out.append(_result("literal merge.split = |Theta| * id", worst, TOL_TIGHT,
                       detail=f"|Theta| values {sorted(factors)}"))
    out.append(CheckResult("literal merge.split isometry", False, iso, TOL_TIGHT, waived=True,
                           detail="merge.split scales by |Theta_n^k|; documented deviation"))
    return out


# -- diagrams ---------------------------------------------------------------------------------


def yukawa_ladder_terms(max_order: int = 2):
    """Every ladder-level Wick term of the Yukawa S-matrix up to ``max_order``."""
    out = []
    for n in range(max_order + 1):
        for t in wick_expand(smatrix_term(n)):
            out.extend(expand_term(t))
    return out


def round_trip_symbolic(terms) -> int:
    """Number of terms whose round trip fails."""
    bad = 0
    for t in terms:
        c = t.canonical()
        back = linearize(two_dimensionalize(None, c)).canonical()
        if back.key() != c.key():
            bad += 1
    return bad


def _sector(layout: FockLayout, counts) -> list[tuple[int, ...]]:
    """All occupancies with the given particle number per species."""
    per_species = []
    for n in counts:
        opts = []
        for modes in itertools.combinations_with_replacement(range(layout.n_modes), n):
            occ = [0] * layout.n_modes
            for i in modes:
                occ[i] += 1
            opts.append(tuple(occ))
        per_species.append(opts)
    return [sum(parts, ()) for parts in itertools.product(*per_species)]


def _counts(layout: FockLayout, occ) -> tuple[int, ...]:
    m = layout.n_modes
    return tuple(sum(occ[s * m:(s + 1) * m]) for s in range(len(layout.species)))


def round_trip_numeric(terms, params: LatticeParams, theory, max_in: int = 2) -> float:
    """Max difference between the diagram (position engine) and the string (momentum engine).

    Inputs are all states with at most ``max_in`` particles; outputs are the
    sectors each term can reach from them.
    """
    layout = FockLayout.yukawa(params, theory)
    in_counts = sorted({_counts(layout, o) for o in FockBasis(layout, max_particles=max_in).occupancies})
    worst = 0.0
    for t in terms:
        c = t.canonical()
        shift = [0] * len(layout.species)
        for f in c.remainder:
            shift[layout.species_index(f.species)] += 1 if f.is_creation else -1
        d = two_dimensionalize(None, c)
        direct = TermEvaluator(c, params, theory, method=MOMENTUM_METHOD)
        # particle number per species changes by a fixed amount, so compare sector by sector
        for n in in_counts:
            out = tuple(a + b for a, b in zip(n, shift))
            if min(out) < 0:
                continue
            src = FockBasis(layout, occupancies=_sector(layout, n))
            dst = FockBasis(layout, occupancies=_sector(layout, out))
            a = evaluate_numeric(d, params, theory, basis=src, out_basis=dst, method=POSITION_METHOD)
            b = operator_matrix(direct, src, dst)
            worst = max(worst, float(np.abs(a - b).max()))
    return worst


def composition_check(params: LatticeParams, theory, max_particles: int = 2) -> tuple[list[int], float]:
    d = translate(example_graph("nn_tree"))
    fs = compose_sequential(d, d)
    counts = [new_propagator_count(t) for _, t in fs]
    layout = FockLayout.yukawa(params, theory)
    basis = FockBasis(layout, max_particles=max_particles, species=[NUCLEON]).restrict(
        lambda o: sum(o) == max_particles)
    e = evaluate_numeric(d, params, theory, basis=basis, method=MOMENTUM_METHOD)
    s = evaluate_numeric(fs, params, theory, basis=basis, method=MOMENTUM_METHOD)
    return counts, float(np.abs(s - e @ e).max())


# -- driver ---------------------------------------------------------------------------------


def run_verification(cfg: RunConfig, log: Callable[[str], None] | None = None) -> list[CheckResult]:
    """Run every check at the configured lattice; the numeric round trip over all terms uses a small one."""
    params, theory = cfg.lattice, cfg.theory
    tau = cfg.truncation
    small = LatticeParams(1, 3, params.n_space)
    results: list[CheckResult] = []

    def add(r: CheckResult):
        results.append(r)
        if log:
            log(r.line())

    t0 = time.time()
    add(_result("ladder commutator [a, a^dagger] = omega_ir delta",
                ladder_commutator_residual(params, tau, max_particles=cfg.max_particles), TOL_OP))
    inner = inner_product_residuals(params)
    add(_result("<delta_p|delta_q> = 2E omega_ir delta", inner["particle"], TOL_OP))
    add(_result("<delta_x|delta_x> = omega_uv", inner["delta_x"], TOL_TIGHT))
    add(_result("<chi_p|chi_p> = omega_ir", inner["chi_p"], TOL_TIGHT))
    add(_result("<delta_x|chi_p> = exp(i 2 pi p.x)", inner["delta_chi"], TOL_TIGHT))
    add(_result("Delta_F(z) = Delta_F(-z)", propagator_symmetry_residual(params), TOL_TIGHT))
    add(_result("[phi+(x), phi-(y)] = D(x-y)", field_commutator_residual(params, max(tau, 1), pairs=60), TOL_OP))
    for r in splitmerge_checks(params, max_particles=min(3, max(cfg.max_particles, 0) + 1)):
        add(r)
    terms = yukawa_ladder_terms(2)
    add(_result(f"round trip (symbolic, {len(terms)} terms)", round_trip_symbolic(terms), 0))
    add(_result("round trip (numeric, small lattice)",
                round_trip_numeric(terms, small, theory, max_in=min(cfg.max_particles, 2)), TOL_MATRIX))
    counts, resid = composition_check(params, theory, max_particles=min(cfg.max_particles, 2))
    shape = [counts.count(j) for j in range(3)]
    add(CheckResult("NN.NN composition has 1+4+2 terms", shape == [1, 4, 2], 0.0, 0.0, detail=f"counts {shape}"))
    add(_result("NN.NN composition = product of evaluations", resid, TOL_MATRIX))
    if log:
        log(f"# {len(results)} checks in {time.time() - t0:.1f}s")
    return results


def exit_code(results: list[CheckResult]) -> int:
    return 0 if all(r.passed or r.waived for r in results) else 1
