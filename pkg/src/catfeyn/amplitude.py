"""Scattering amplitudes: symbolic expressions, Feynman rules, the categorical pipeline.

An :class:`AmplitudeExpr` is a sum of :class:`AmpTerm` products::

    coeff * (-i g)^n * sum_k w_ir^-4 * prod i/(q^2 - mu^2 + i eps) * prod delta4(q)

where every ``q`` is a :class:`LinComb` of momentum labels with rational
coefficients.  ``delta4`` is the lattice delta, ``omega_ir^d`` times a
Kronecker delta, so ``sum_k w_ir^-4 delta4(k - p) f(k) = f(p)``.

Canonical form: the overall deltas eliminate the greatest external label
that appears with coefficient +-1, propagator momenta are sign-normalised
(``(-q)^2 = q^2``), loop momenta are shifted/flipped and renamed to the
lexicographically smallest rendering, and equal terms are merged.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .fock import ANTINUCLEON, MESON, NUCLEON, TheoryParams
from .lattice import FourMomentum, LatticeParams
from .opalg import MESON_LINE, NUCLEON_LINE, SYMBOLIC_DIM, WickTerm, label_key

LOOP_NAMES = ("k", "l", "q", "r")
_SPECIES_ALIASES = {
    "m": MESON, "meson": MESON, "phi": MESON,
    "n+": NUCLEON, "N": NUCLEON, "nucleon": NUCLEON,
    "n-": ANTINUCLEON, "A": ANTINUCLEON, "Nbar": ANTINUCLEON, "antinucleon": ANTINUCLEON,
}


class AmplitudeError(ValueError):
    pass


class PoleError(AmplitudeError):
    """A propagator denominator vanished (within 1e-12) at the requested momenta."""


def species_of(name: str) -> str:
    try:
        return _SPECIES_ALIASES[name]
    except KeyError:
        raise AmplitudeError(f"unknown particle species {name!r}") from None


# -- linear momentum combinations ----------------------------------------------------


@dataclass(frozen=True)
class LinComb:
    """``sum_i c_i * label_i`` with rational ``c_i``; zero coefficients are dropped."""

    items: tuple[tuple[str, Fraction], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, object]) -> "LinComb":
        clean = {k: Fraction(v) for k, v in mapping.items() if Fraction(v) != 0}
        return cls(tuple(sorted(clean.items(), key=lambda kv: label_key(kv[0]))))

    @classmethod
    def label(cls, name: str, c=1) -> "LinComb":
        return cls.of({name: c})

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self.items)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.items)

    def coeff(self, name: str) -> Fraction:
        return self.as_dict().get(name, Fraction(0))

    def __bool__(self):
        return bool(self.items)

    def __add__(self, other: "LinComb") -> "LinComb":
        out = self.as_dict()
        for k, v in other.items:
            out[k] = out.get(k, 0) + v
        return LinComb.of(out)

    def __neg__(self) -> "LinComb":
        return LinComb(tuple((k, -v) for k, v in self.items))

    def __sub__(self, other: "LinComb") -> "LinComb":
        return self + (-other)

    def scaled(self, c) -> "LinComb":
        return LinComb.of({k: v * Fraction(c) for k, v in self.items})

    def substitute(self, name: str, value: "LinComb") -> "LinComb":
        c = self.coeff(name)
        if c == 0:
            return self
        rest = LinComb.of({k: v for k, v in self.items if k != name})
        return rest + value.scaled(c)

    def rename(self, mapping: Mapping[str, str]) -> "LinComb":
        return LinComb.of({mapping.get(k, k): v for k, v in self.items})

    def ordered(self, first: Iterable[str] = ()) -> list[tuple[str, Fraction]]:
        first = set(first)
        return sorted(self.items, key=lambda kv: (kv[0] not in first, label_key(kv[0])))

    def sign_normalized(self, first: Iterable[str] = ()) -> "LinComb":
        ordered = self.ordered(first)
        if ordered and ordered[0][1] < 0:
            return -self
        return self

    def text(self, first: Iterable[str] = ()) -> str:
        if not self.items:
            return "0"
        out = []
        for i, (k, v) in enumerate(self.ordered(first)):
            sign = "-" if v < 0 else ("+" if i else "")
            mag = abs(v)
            out.append(sign + (k if mag == 1 else f"{mag}*{k}"))
        return "".join(out)

    def latex(self, first: Iterable[str] = ()) -> str:
        if not self.items:
            return "0"
        out = []
        for i, (k, v) in enumerate(self.ordered(first)):
            sign = " - " if v < 0 else (" + " if i else "")
            if i == 0 and v < 0:
                sign = "-"
            mag = abs(v)
            name = _latex_label(k)
            out.append(sign + (name if mag == 1 else f"{_latex_fraction(mag)} {name}"))
        return "".join(out)


def _latex_label(name: str) -> str:
    m = re.fullmatch(r"([A-Za-z]+)(\d*)('*)", name)
    if not m:
        return name
    base, sub, primes = m.groups()
    return base + primes + (f"_{{{sub}}}" if sub else "")


def _latex_fraction(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else rf"\frac{{{c.numerator}}}{{{c.denominator}}}"


_LABEL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*'*")
_NUM_RE = re.compile(r"\d+(?:/\d+)?")


def parse_lincomb(text: str) -> LinComb:
    """Parse ``k+p1'-p1``, ``2*p1-1/2*p2`` and similar."""
    s = text.replace(" ", "")
    if not s:
        raise AmplitudeError("empty momentum expression")
    if s == "0":
        return LinComb()
    pos, out = 0, {}
    while pos < len(s):
        sign = 1
        if s[pos] in "+-":
            sign = -1 if s[pos] == "-" else 1
            pos += 1
        elif pos:
            raise AmplitudeError(f"expected + or - at {pos} in {text!r}")
        c = Fraction(1)
        m = _NUM_RE.match(s, pos)
        if m:
            c = Fraction(m.group(0))
            pos = m.end()
            if not s.startswith("*", pos):
                raise AmplitudeError(f"expected '*' after coefficient in {text!r}")
            pos += 1
        m = _LABEL_RE.match(s, pos)
        if not m:
            raise AmplitudeError(f"expected a momentum label at {pos} in {text!r}")
        out[m.group(0)] = out.get(m.group(0), 0) + sign * c
        pos = m.end()
    return LinComb.of(out)


# -- expression tree --------------------------------------------------------------------


@dataclass(frozen=True)
class AmpPropagator:
    """``i / (q^2 - mu^2 + i eps)``; ``mass`` is ``"m"`` (meson) or ``"M"`` (nucleon)."""

    momentum: LinComb
    mass: str

    def __post_init__(self):
        if self.mass not in (MESON_LINE, NUCLEON_LINE):
            raise AmplitudeError(f"mass tag must be 'm' or 'M', got {self.mass!r}")

    def text(self, loops: Iterable[str] = ()) -> str:
        q = self.momentum
        qt = q.text(loops)
        if len(q.items) == 1 and q.items[0][1] in (1, -1):
            qt = q.items[0][0]
            return f"i/({qt}^2-{self.mass}^2+i*eps)"
        return f"i/(({qt})^2-{self.mass}^2+i*eps)"

    def latex(self, loops: Iterable[str] = ()) -> str:
        q = self.momentum
        if len(q.items) == 1 and q.items[0][1] in (1, -1):
            sq = _latex_label(q.items[0][0]) + "^2"
        else:
            sq = f"({q.latex(loops)})^2"
        return rf"\frac{{i}}{{{sq} - {self.mass}^2 + i\epsilon}}"


@dataclass(frozen=True)
class AmpTerm:
    coeff: Fraction = Fraction(1)
    order: int = 0
    loops: tuple[str, ...] = ()
    props: tuple[AmpPropagator, ...] = ()
    deltas: tuple[LinComb, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeff", Fraction(self.coeff))

    def __mul__(self, other: "AmpTerm") -> "AmpTerm":
        clash = set(self.loops) & set(other.loops)
        if clash:
            taken = set(self.loops) | set(other.loops) | self.labels() | other.labels()
            other = other.rename_loops({k: _fresh(taken, k) for k in clash})
        return AmpTerm(self.coeff * other.coeff, self.order + other.order, self.loops + other.loops,
                       self.props + other.props, self.deltas + other.deltas)

    def labels(self) -> set[str]:
        out = set(self.loops)
        for p in self.props:
            out.update(p.momentum.labels)
        for d in self.deltas:
            out.update(d.labels)
        return out

    def external_labels(self) -> set[str]:
        return self.labels() - set(self.loops)

    def substitute(self, name: str, value: LinComb) -> "AmpTerm":
        props = tuple(AmpPropagator(p.momentum.substitute(name, value), p.mass) for p in self.props)
        deltas = tuple(d.substitute(name, value) for d in self.deltas)
        return AmpTerm(self.coeff, self.order, self.loops, props, deltas)

    def rename_loops(self, mapping: Mapping[str, str]) -> "AmpTerm":
        props = tuple(AmpPropagator(p.momentum.rename(mapping), p.mass) for p in self.props)
        deltas = tuple(d.rename(mapping) for d in self.deltas)
        return AmpTerm(self.coeff, self.order, tuple(mapping.get(k, k) for k in self.loops), props, deltas)

    def with_coeff(self, c) -> "AmpTerm":
        return AmpTerm(Fraction(c), self.order, self.loops, self.props, self.deltas)

    def body_text(self, with_coupling: bool = True, with_deltas: bool = True) -> str:
        """Everything but the rational coefficient."""
        parts = []
        if with_coupling and self.order:
            parts.append("(-i*g)" if self.order == 1 else f"(-i*g)^{self.order}")
        if self.loops:
            parts.append(f"sum[{','.join(self.loops)}] w_ir^-{SYMBOLIC_DIM * len(self.loops)}")
        parts += [p.text(self.loops) for p in self.props]
        if with_deltas:
            parts += [f"delta4({d.text()})" for d in self.deltas]
        return " * ".join(parts)

    def text(self, with_coupling: bool = True, with_deltas: bool = True) -> str:
        body = self.body_text(with_coupling, with_deltas)
        c = self.coeff
        if not body:
            return str(c)
        if c == 1:
            return body
        if c == -1:
            return "-" + body
        return f"{c} * {body}"

    def latex(self, with_coupling: bool = True, with_deltas: bool = True) -> str:
        parts = []
        c = self.coeff
        if c != 1:
            parts.append("-" if c == -1 else (_latex_fraction(c) if c > 0 else "-" + _latex_fraction(-c)))
        if with_coupling and self.order:
            parts.append("(-ig)" if self.order == 1 else f"(-ig)^{{{self.order}}}")
        if self.loops:
            parts.append(r"\sum_{" + ",".join(self.loops) + r"} \frac{1}{\omega_{ir}^{"
                         + str(SYMBOLIC_DIM * len(self.loops)) + "}}")
        parts += [p.latex(self.loops) for p in self.props]
        if with_deltas:
            parts += [rf"\delta^{{(4)}}({d.latex()})" for d in self.deltas]
        return " ".join(parts) if parts else "1"


def _fresh(taken: set, base: str) -> str:
    n = 1
    while f"{base}{n}" in taken:
        n += 1
    taken.add(f"{base}{n}")
    return f"{base}{n}"


@dataclass(frozen=True)
class AmplitudeExpr:
    terms: tuple[AmpTerm, ...] = ()

    @classmethod
    def one(cls) -> "AmplitudeExpr":
        return cls((AmpTerm(),))

    @classmethod
    def zero(cls) -> "AmplitudeExpr":
        return cls(())

    def __add__(self, other: "AmplitudeExpr") -> "AmplitudeExpr":
        return AmplitudeExpr(self.terms + other.terms)

    def __mul__(self, other: "AmplitudeExpr") -> "AmplitudeExpr":
        return AmplitudeExpr(tuple(a * b for a in self.terms for b in other.terms))

    def scaled(self, c) -> "AmplitudeExpr":
        return AmplitudeExpr(tuple(t.with_coeff(t.coeff * Fraction(c)) for t in self.terms))

    def is_zero(self) -> bool:
        return not self.canonical().terms

    def canonical(self) -> "AmplitudeExpr":
        return canonicalize(self)

    def _common(self):
        """(order, deltas) shared by every term, or None."""
        if len(self.terms) < 2:
            return None
        heads = {(t.order, t.deltas) for t in self.terms}
        return heads.pop() if len(heads) == 1 else None

    def text(self) -> str:
        if not self.terms:
            return "0"
        common = self._common()
        if common is None:
            return _join_terms([t.text() for t in self.terms])
        order, deltas = common
        inner = _join_terms([t.text(with_coupling=False, with_deltas=False) for t in self.terms])
        parts = []
        if order:
            parts.append("(-i*g)" if order == 1 else f"(-i*g)^{order}")
        parts.append(f"[ {inner} ]")
        parts += [f"delta4({d.text()})" for d in deltas]
        return " * ".join(parts)

    def latex(self) -> str:
        if not self.terms:
            return "0"
        common = self._common()
        if common is None:
            return _join_terms([t.latex() for t in self.terms])
        order, deltas = common
        inner = _join_terms([t.latex(with_coupling=False, with_deltas=False) for t in self.terms])
        head = "" if not order else ("(-ig)" if order == 1 else f"(-ig)^{{{order}}}")
        tail = "".join(rf" \delta^{{(4)}}({d.latex()})" for d in deltas)
        return rf"{head} \left[ {inner} \right]{tail}".strip()

    __str__ = text

    def to_json(self) -> dict:
        def lc(q: LinComb):
            return {k: str(v) for k, v in q.items}

        return {
            "text": self.text(),
            "terms": [
                {
                    "coeff": str(t.coeff),
                    "coupling_order": t.order,
                    "loops": list(t.loops),
                    "propagators": [{"momentum": lc(p.momentum), "mass": p.mass} for p in t.props],
                    "deltas": [lc(d) for d in t.deltas],
                }
                for t in self.terms
            ],
        }


def _join_terms(texts: Sequence[str]) -> str:
    out = texts[0]
    for t in texts[1:]:
        out += " - " + t[1:] if t.startswith("-") else " + " + t
    return out


# -- canonical form --------------------------------------------------------------------


def _eliminate_externals(term: AmpTerm) -> AmpTerm:
    """Use each pure-external delta to remove its greatest +-1 label from the rest."""
    deltas = list(term.deltas)
    loops = set(term.loops)
    for i in range(len(deltas)):
        d = deltas[i]
        if set(d.labels) & loops or not d:
            continue
        cands = [k for k, v in d.items if abs(v) == 1]
        if not cands:
            continue
        name = max(cands, key=label_key)
        c = d.coeff(name)
        # d = c*name + rest = 0  =>  name = -c*rest
        rest = LinComb.of({k: v for k, v in d.items if k != name})
        value = rest.scaled(-c)
        props = tuple(AmpPropagator(p.momentum.substitute(name, value), p.mass) for p in term.props)
        for j in range(len(deltas)):
            if j != i:
                deltas[j] = deltas[j].substitute(name, value)
        term = AmpTerm(term.coeff, term.order, term.loops, props, term.deltas)
    deltas = tuple(sorted((d.sign_normalized() for d in deltas), key=lambda q: q.text()))
    return AmpTerm(term.coeff, term.order, term.loops, term.props, deltas)


def _normalize_props(term: AmpTerm) -> AmpTerm:
    props = tuple(
        sorted(
            (AmpPropagator(p.momentum.sign_normalized(term.loops), p.mass) for p in term.props),
            key=lambda p: (p.text(term.loops), p.mass),
        )
    )
    return AmpTerm(term.coeff, term.order, term.loops, props, term.deltas)


def _loop_names(term: AmpTerm, n: int) -> list[str]:
    taken = term.external_labels()
    names = [x for x in LOOP_NAMES if x not in taken]
    i = 1
    while len(names) < n:
        if f"k{i}" not in taken:
            names.append(f"k{i}")
        i += 1
    return names[:n]


def _loop_candidates(term: AmpTerm, loop: str) -> list[AmpTerm]:
    """All shifts/flips of ``loop`` that turn one propagator momentum into +-loop."""
    out = []
    for p in term.props:
        c = p.momentum.coeff(loop)
        if abs(c) != 1:
            continue
        rest = LinComb.of({k: v for k, v in p.momentum.items if k != loop})
        for s in (1, -1):
            # c*loop_old + rest = s*loop_new
            value = (LinComb.label(loop, s) - rest).scaled(c)
            out.append(term.substitute(loop, value))
    return out or [term]


def _canonical_term(term: AmpTerm) -> AmpTerm:
    term = _eliminate_externals(term)
    if not term.loops:
        return _normalize_props(term)
    best, best_text = None, None
    names = _loop_names(term, len(term.loops))
    tmp = {k: f"__loop{i}" for i, k in enumerate(term.loops)}
    base = term.rename_loops(tmp)
    loops = base.loops
    for perm in itertools.permutations(range(len(loops))):
        variants = [base]
        for k in loops:
            variants = [v2 for v in variants for v2 in _loop_candidates(v, k)]
        for v in variants:
            mapping = {loops[j]: names[perm[j]] for j in range(len(loops))}
            cand = _normalize_props(v.rename_loops(mapping))
            cand = AmpTerm(cand.coeff, cand.order, tuple(sorted(cand.loops, key=label_key)), cand.props, cand.deltas)
            text = cand.text()
            if best_text is None or text < best_text:
                best, best_text = cand, text
    return best


def canonicalize(e: AmplitudeExpr) -> AmplitudeExpr:
    merged: dict[str, AmpTerm] = {}
    for t in e.terms:
        c = _canonical_term(t)
        key = c.body_text()
        if key in merged:
            merged[key] = merged[key].with_coeff(merged[key].coeff + c.coeff)
        else:
            merged[key] = c
    terms = [t for t in merged.values() if t.coeff != 0]
    terms.sort(key=lambda t: (t.order, len(t.loops), t.body_text()))
    return AmplitudeExpr(tuple(terms))


def equivalent(a: AmplitudeExpr, b: AmplitudeExpr) -> bool:
    return canonicalize(a).text() == canonicalize(b).text()


# -- parser ---------------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.s = text.replace(" ", "").replace("\n", "")
        self.pos = 0

    def error(self, msg: str):
        raise AmplitudeError(f"{msg} at position {self.pos} in amplitude text")

    def peek(self, lit: str) -> bool:
        return self.s.startswith(lit, self.pos)

    def take(self, lit: str) -> bool:
        if self.peek(lit):
            self.pos += len(lit)
            return True
        return False

    def expect(self, lit: str):
        if not self.take(lit):
            self.error(f"expected {lit!r}")

    def until(self, closing: str) -> str:
        depth, start = 0, self.pos
        while self.pos < len(self.s):
            ch = self.s[self.pos]
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0 and closing == ")":
                    out = self.s[start:self.pos]
                    self.pos += 1
                    return out
                depth -= 1
            elif ch == closing and depth == 0:
                out = self.s[start:self.pos]
                self.pos += 1
                return out
            self.pos += 1
        self.error(f"missing {closing!r}")

    def expr(self) -> AmplitudeExpr:
        sign = -1 if self.take("-") else 1
        out = self.product().scaled(sign)
        while self.pos < len(self.s) and self.s[self.pos] in "+-":
            sign = -1 if self.s[self.pos] == "-" else 1
            self.pos += 1
            out = out + self.product().scaled(sign)
        return out

    def product(self) -> AmplitudeExpr:
        out = self.factor()
        while self.take("*"):
            out = out * self.factor()
        return out

    def factor(self) -> AmplitudeExpr:
        if self.take("(-i*g)"):
            n = self.integer() if self.take("^") else 1
            return AmplitudeExpr((AmpTerm(order=n),))
        if self.take("sum["):
            loops = tuple(x for x in self.until("]").split(",") if x)
            if not loops:
                self.error("empty loop sum")
            self.expect(f"w_ir^-{SYMBOLIC_DIM * len(loops)}")
            return AmplitudeExpr((AmpTerm(loops=loops),))
        if self.take("i/("):
            if self.take("("):
                q = parse_lincomb(self.until(")"))
            else:
                m = _LABEL_RE.match(self.s, self.pos)
                if not m:
                    self.error("expected a momentum")
                q = LinComb.label(m.group(0))
                self.pos = m.end()
            self.expect("^2-")
            mass = self.s[self.pos:self.pos + 1]
            self.pos += 1
            self.expect("^2+i*eps)")
            return AmplitudeExpr((AmpTerm(props=(AmpPropagator(q, mass),)),))
        if self.take("delta4("):
            return AmplitudeExpr((AmpTerm(deltas=(parse_lincomb(self.until(")")),)),))
        if self.take("["):
            inner = self.expr()
            self.expect("]")
            return inner
        m = _NUM_RE.match(self.s, self.pos)
        if m:
            self.pos = m.end()
            return AmplitudeExpr((AmpTerm(coeff=Fraction(m.group(0))),))
        self.error("unexpected token")

    def integer(self) -> int:
        m = re.compile(r"\d+").match(self.s, self.pos)
        if not m:
            self.error("expected an integer")
        self.pos = m.end()
        return int(m.group(0))


def parse_amplitude(text: str) -> AmplitudeExpr:
    """Parse the canonical text form (factored ``[ ... ]`` groups allowed)."""
    p = _Parser(text)
    if p.s == "0":
        return AmplitudeExpr.zero()
    out = p.expr()
    if p.pos != len(p.s):
        p.error("trailing input")
    return out


# -- Feynman rules -----------------------------------------------------------------------------


def _solve_edges(graph) -> tuple[list[LinComb], list[str], list[LinComb]]:
    """Edge momenta (flowing ``u -> v``), the free loop labels, and leftover deltas."""
    vertices = list(graph.vertices)
    vidx = {x: i for i, x in enumerate(vertices)}
    n_e = len(graph.edges)
    # row: sum_e a[e] q_e + rhs = 0, rhs over external labels
    rows = []
    for x in vertices:
        a = [Fraction(0)] * n_e
        for j, e in enumerate(graph.edges):
            if e.v == x:
                a[j] += 1
            if e.u == x:
                a[j] -= 1
        rhs = {}
        for leg in graph.legs:
            if leg.vertex != x:
                continue
            s = 1 if leg.direction == "in" else -1
            rhs[leg.momentum] = rhs.get(leg.momentum, 0) + s
        rows.append([a, LinComb.of(rhs)])
    pivots = {}
    r = 0
    for col in range(n_e):
        piv = next((i for i in range(r, len(rows)) if rows[i][0][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        a, rhs = rows[r]
        inv = 1 / a[col]
        rows[r] = [[v * inv for v in a], rhs.scaled(inv)]
        for i in range(len(rows)):
            if i != r and rows[i][0][col] != 0:
                f = rows[i][0][col]
                rows[i] = [[u - f * v for u, v in zip(rows[i][0], rows[r][0])], rows[i][1] - rows[r][1].scaled(f)]
        pivots[col] = r
        r += 1
    free = [c for c in range(n_e) if c not in pivots]
    taken = {leg.momentum for leg in graph.legs}
    loop_names = [x for x in LOOP_NAMES if x not in taken]
    while len(loop_names) < len(free):
        loop_names.append(_fresh(taken, "k"))
    loops = {c: loop_names[i] for i, c in enumerate(free)}
    momenta = [LinComb()] * n_e
    for c in free:
        momenta[c] = LinComb.label(loops[c])
    for c, i in pivots.items():
        a, rhs = rows[i]
        # q_c + sum_free a_f q_f + rhs = 0
        val = -rhs
        for f in free:
            if a[f] != 0:
                val = val - LinComb.label(loops[f], a[f])
        momenta[c] = val
    deltas = []
    for a, rhs in rows[r:]:
        if rhs:
            deltas.append(-rhs)  # sum_out - sum_in
        else:
            raise AmplitudeError("momentum system is over-constrained: a component has no external legs")
    return momenta, [loops[c] for c in free], deltas


def feynman_rules(graph, symmetrize: bool = False) -> AmplitudeExpr:
    """``i A * delta4(p_F - p_I)`` of one Feynman graph.

    ``symmetrize=True`` sums the distinct expressions obtained by permuting
    the momentum labels of identical external particles.
    """
    graph.validate()
    momenta, loops, deltas = _solve_edges(graph)
    props = tuple(
        AmpPropagator(q, MESON_LINE if e.species == "meson" else NUCLEON_LINE)
        for q, e in zip(momenta, graph.edges)
    )
    term = AmpTerm(1, graph.order, tuple(loops), props, tuple(deltas))
    base = AmplitudeExpr((term,))
    if not symmetrize:
        return base.canonical()
    groups: dict[tuple, list[str]] = {}
    for leg in graph.legs:
        if leg.direction != "through":
            groups.setdefault((leg.species, leg.direction), []).append(leg.momentum)
    perms = [list(itertools.permutations(v)) for v in groups.values()]
    seen, total = set(), AmplitudeExpr.zero()
    for choice in itertools.product(*perms):
        mapping = {}
        for labels, perm in zip(groups.values(), choice):
            mapping.update(dict(zip(labels, perm)))
        renamed = _rename_externals(term, mapping)
        c = AmplitudeExpr((renamed,)).canonical()
        if c.text() not in seen:
            seen.add(c.text())
            total = total + c
    return total.canonical()


def _rename_externals(term: AmpTerm, mapping: Mapping[str, str]) -> AmpTerm:
    props = tuple(AmpPropagator(p.momentum.rename(mapping), p.mass) for p in term.props)
    deltas = tuple(d.rename(mapping) for d in term.deltas)
    return AmpTerm(term.coeff, term.order, term.loops, props, deltas)


# -- categorical pipeline --------------------------------------------------------------------------


def wick_multiplicity(term: WickTerm) -> int:
    """Number of position relabellings of ``term`` that give distinct Wick terms."""
    return math.factorial(len(term.labels)) // term.automorphisms()


def _assignments(ops, particles) -> list[list[tuple[object, str]]] | None:
    """All species-respecting bijections between ladder symbols and particles.

    ``None`` means more operators than particles (the matrix element vanishes).
    """
    by_species: dict[str, list] = {}
    for f in ops:
        by_species.setdefault(f.species, []).append(f)
    parts: dict[str, list[str]] = {}
    for sp, label in particles:
        parts.setdefault(sp, []).append(label)
    if any(len(parts.get(sp, [])) < len(v) for sp, v in by_species.items()):
        return None
    for sp, labels in parts.items():
        if len(by_species.get(sp, [])) < len(labels):
            raise AmplitudeError(
                f"leftover uncontracted {sp} particle(s): the diagram does not connect every external leg"
            )
    species = sorted(by_species)
    choices = [list(itertools.permutations(parts[sp])) for sp in species]
    out = []
    for combo in itertools.product(*choices):
        pairs = []
        for sp, perm in zip(species, combo):
            pairs += list(zip(by_species[sp], perm))
        out.append(pairs)
    return out


def _term_amplitude(t: WickTerm, incoming, outgoing, multiplicity: int) -> AmplitudeExpr:
    if not t.is_ladder_term:
        raise AmplitudeError("amplitudes need a ladder-level term")
    for p in t.propagators:
        if p.kind != "F":
            raise AmplitudeError("commutator propagators D have no momentum-space factor in this layer")
    for f in t.remainder:
        if f.label is None:
            raise AmplitudeError("ladder symbols must carry position labels")
    ann = _assignments(t.annihilators, incoming)
    cre = _assignments(t.creators, outgoing)
    if ann is None or cre is None:
        return AmplitudeExpr.zero()
    taken = {lab for _, lab in list(incoming) + list(outgoing)}
    edge_loops = [_fresh(taken, "k") for _ in t.propagators]
    total = AmplitudeExpr.zero()
    for a_pairs in ann:
        for c_pairs in cre:
            phase = {x: {} for x in t.labels}
            for f, p in a_pairs:
                phase[f.label][p] = phase[f.label].get(p, 0) - 1
            for f, p in c_pairs:
                phase[f.label][p] = phase[f.label].get(p, 0) + 1
            props = []
            for k, prop in zip(edge_loops, t.propagators):
                # i e^{-i 2 pi k.(a - b)} / (k^2 - mu^2)
                phase[prop.a][k] = phase[prop.a].get(k, 0) - 1
                phase[prop.b][k] = phase[prop.b].get(k, 0) + 1
                props.append(AmpPropagator(LinComb.label(k), prop.mass))
            deltas = [LinComb.of(phase[x]) for x in t.labels]
            term = AmpTerm(t.prefactor.coeff * multiplicity, t.prefactor.order, tuple(edge_loops),
                           tuple(props), tuple(deltas))
            total = total + AmplitudeExpr((_collapse_loops(term),))
    return total


def _collapse_loops(term: AmpTerm) -> AmpTerm:
    """Execute ``sum_k w_ir^-4 delta4(k - ...)`` wherever a delta fixes a loop momentum."""
    while True:
        loops = list(term.loops)
        hit = None
        for i, d in enumerate(term.deltas):
            for k in sorted(set(d.labels) & set(loops), key=label_key):
                if abs(d.coeff(k)) == 1:
                    hit = (i, k)
                    break
            if hit:
                break
        if hit is None:
            break
        i, k = hit
        d = term.deltas[i]
        c = d.coeff(k)
        rest = LinComb.of({x: v for x, v in d.items if x != k})
        value = rest.scaled(-c)
        deltas = term.deltas[:i] + term.deltas[i + 1:]
        reduced = AmpTerm(term.coeff, term.order, tuple(x for x in loops if x != k), term.props, deltas)
        term = reduced.substitute(k, value)
    for d in term.deltas:
        if not d:
            raise AmplitudeError("a delta collapsed to delta4(0): disconnected vacuum piece")
        if set(d.labels) & set(term.loops):
            raise AmplitudeError("a loop momentum is fixed with a non-unit coefficient")
    return term


def _as_particles(side) -> list[tuple[str, str]]:
    out = []
    for item in side:
        if isinstance(item, str):
            sp, label = item.split(":") if ":" in item else item.split()
        else:
            sp, label = item
        out.append((species_of(sp), label))
    return out


def amplitude_from_categorical(d, incoming, outgoing, check_symmetry: bool = True) -> AmplitudeExpr:
    """``i A * delta4`` of a categorical diagram (or formal sum) between particle states.

    ``incoming``/``outgoing`` list ``(species, momentum label)`` pairs.  A single
    diagram stands for its whole orbit of relabelled Wick terms, so its
    prefactor is multiplied by :func:`wick_multiplicity`; formal sums are
    taken verbatim.
    """
    from .diagram.ir import CatDiagram, FormalSum, linearize

    incoming, outgoing = _as_particles(incoming), _as_particles(outgoing)
    if isinstance(d, FormalSum):
        items = [(Fraction(c), linearize(t), 1) for c, t in d.terms]
    elif isinstance(d, CatDiagram):
        t = linearize(d)
        items = [(Fraction(1), t, wick_multiplicity(t))]
    elif isinstance(d, WickTerm):
        items = [(Fraction(1), d, wick_multiplicity(d))]
    else:
        raise AmplitudeError(f"cannot take the amplitude of {type(d).__name__}")
    total = AmplitudeExpr.zero()
    for c, t, mult in items:
        _check_species(t, incoming, outgoing)
        total = total + _term_amplitude(t, incoming, outgoing, mult).scaled(c)
    out = total.canonical()
    if check_symmetry:
        for term in out.terms:
            if term.coeff.denominator != 1:
                raise AmplitudeError(
                    f"symmetry factor mismatch: coefficient {term.coeff} left after multiplicity cancellation"
                )
    return out


def _check_species(t: WickTerm, incoming, outgoing):
    for ops, side, name in ((t.annihilators, incoming, "incoming"), (t.creators, outgoing, "outgoing")):
        have = {f.species for f in ops}
        want = {sp for sp, _ in side}
        if have - want:
            raise AmplitudeError(f"species mismatch: diagram has {sorted(have)} {name}, states have {sorted(want)}")


def extract_conservation(e: AmplitudeExpr) -> tuple[AmplitudeExpr, AmplitudeExpr]:
    """Split ``e = iA * delta4(...)`` into ``(iA, delta4(...))``."""
    e = e.canonical()
    if not e.terms:
        return e, AmplitudeExpr.one()
    deltas = {t.deltas for t in e.terms}
    if len(deltas) != 1:
        raise AmplitudeError("terms carry different momentum deltas")
    (ds,) = deltas
    if len(ds) > 1:
        raise AmplitudeError(f"{len(ds)} un-absorbed deltas: disconnected components")
    stripped = AmplitudeExpr(tuple(AmpTerm(t.coeff, t.order, t.loops, t.props, ()) for t in e.terms))
    delta = AmplitudeExpr((AmpTerm(deltas=ds),)) if ds else AmplitudeExpr.one()
    return stripped.canonical(), delta


# -- numeric evaluation ---------------------------------------------------------------------------------


@dataclass
class MomentumAssignment:
    """Concrete lattice 4-momenta for every external label.

    ``loop_cutoff`` bounds each loop-momentum index component (default: the
    whole lattice).  ``wrap=True`` reduces every momentum combination onto the
    periodic lattice before evaluating it, mirroring the position-space oracle.
    """

    momenta: Mapping[str, FourMomentum]
    params: LatticeParams
    loop_cutoff: int | None = None
    wrap: bool = False
    off_shell: frozenset = field(default_factory=frozenset)

    def check_on_shell(self, masses: Mapping[str, Fraction]):
        from .lattice import dispersion_energy

        for label, p in self.momenta.items():
            if label in self.off_shell or label not in masses:
                continue
            if p.energy != dispersion_energy(p.spatial, masses[label]):
                raise AmplitudeError(f"momentum {label} is off shell")

    def index(self, label: str) -> np.ndarray:
        try:
            return np.array(self.momenta[label].indices(), dtype=np.int64)
        except KeyError:
            raise AmplitudeError(f"no momentum assigned to {label!r}") from None


def eval_amplitude(e: AmplitudeExpr, a: MomentumAssignment, epsilon: float = 1e-6,
                   theory: TheoryParams | None = None) -> complex:
    """Numeric value of ``e``; loop sums run over the lattice and deltas are lattice deltas."""
    theory = theory or TheoryParams()
    params = a.params
    n = params.two_omega_plus_one
    ir = params.omega_ir
    d = params.spacetime_dim
    omega = params.omega
    cutoff = omega if a.loop_cutoff is None else min(a.loop_cutoff, omega)
    masses = {MESON_LINE: float(theory.meson_mass), NUCLEON_LINE: float(theory.nucleon_mass)}
    total = 0j
    for t in e.terms:
        n_loop = len(t.loops)
        axis = np.arange(-cutoff, cutoff + 1)
        if n_loop:
            grid = np.array(list(itertools.product(axis, repeat=d * n_loop)), dtype=np.int64).reshape(-1, n_loop, d)
        else:
            grid = np.zeros((1, 0, d), dtype=np.int64)
        loop_pos = {k: i for i, k in enumerate(t.loops)}

        def combo(q: LinComb) -> np.ndarray:
            out = np.zeros((grid.shape[0], d), dtype=object)
            for label, c in q.items:
                vec = grid[:, loop_pos[label], :] if label in loop_pos else np.broadcast_to(a.index(label), (grid.shape[0], d))
                out = out + vec.astype(object) * c
            for row in out.flat:
                if Fraction(row).denominator != 1:
                    raise AmplitudeError("momentum combination is off the lattice")
            out = out.astype(np.int64)
            if a.wrap:
                out = (out + omega) % n - omega
            return out

        weight = np.full(grid.shape[0], complex(t.coeff) * (-1j * theory.coupling) ** t.order)
        weight *= float(ir) ** (-d * n_loop)
        for p in t.props:
            q = combo(p.momentum)
            q2 = (q[:, 0] ** 2 - (q[:, 1:] ** 2).sum(axis=1)) / ir ** 2
            den = q2 - masses[p.mass] ** 2 + 1j * epsilon
            if np.any(np.abs(den) < 1e-12):
                raise PoleError(f"propagator {p.text(t.loops)} hits its pole")
            weight *= 1j / den
        for q in t.deltas:
            v = combo(q)
            hit = np.all((v % n) == 0, axis=1) if a.wrap else np.all(v == 0, axis=1)
            weight *= float(ir) ** d * hit
        total += complex(weight.sum())
    return total
