"""Symbolic operator algebra for scalar Yukawa theory.

Strings of field and ladder symbols carry an exact prefactor
``coeff * (-i g)^order`` and a list of bound position labels, each with the
implicit lattice sum ``sum_x omega_uv^-4``.  Wick expansion enumerates legal
contraction patterns; contracted pairs become propagator symbols.

Field decompositions used throughout::

    phi  = m(x)   + m^dagger(x)
    psi  = n+(x)  + n-^dagger(x)
    psi^ = n+^dagger(x) + n-(x)

A ladder symbol with a position argument stands for the coherent ladder box
fed a position eigenstate, i.e. the corresponding frequency part of the field.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .fock import (
    ANTINUCLEON,
    MESON,
    NUCLEON,
    FockVector,
    TheoryParams,
    annihilate,
    create,
    feynman_propagator,
    ladder_field,
    propagator_D,
)
from .lattice import MOMENTUM, LatticePoint

PHI = "phi"
PSI = "psi"
PSIBAR = "psid"

FIELD = "field"
CREATE = "create"
ANNIHILATE = "annihilate"

# exponent of omega_uv per bound label in printed sums (4-position measure)
SYMBOLIC_DIM = 4

SPECIES_RANK = {NUCLEON: 0, ANTINUCLEON: 1, MESON: 2}
_SPECIES_TEXT = {MESON: "m", NUCLEON: "N+", ANTINUCLEON: "N-"}
_TEXT_SPECIES = {v: k for k, v in _SPECIES_TEXT.items()}

# mass tags of propagators: meson lines carry m, nucleon lines carry M
MESON_LINE = "m"
NUCLEON_LINE = "M"


class OperatorError(ValueError):
    pass


def label_key(label) -> tuple:
    """Natural sort key: ``x2 < x10``; concrete tuples sort after strings."""
    if isinstance(label, str):
        parts = re.split(r"(\d+)", label)
        return (0, tuple((int(p), "") if p.isdigit() else (-1, p) for p in parts if p))
    return (1, tuple(label))


def _arg_text(arg) -> str:
    if isinstance(arg, str):
        return arg
    if isinstance(arg, LatticePoint):
        return "p[" + ",".join(str(c) for c in arg.coords) + "]"
    return "[" + ",".join(str(c) for c in arg) + "]"


@dataclass(frozen=True)
class FieldSymbol:
    """A field (``phi``, ``psi``, ``psid``) or ladder (``m``, ``n+``, ``n-``) symbol.

    ``arg`` is a position label (str), a concrete 4-position (tuple of ints) or,
    for bare ladder operators, a momentum :class:`LatticePoint`.
    """

    name: str
    kind: str
    arg: object

    def __post_init__(self):
        if self.kind == FIELD:
            if self.name not in (PHI, PSI, PSIBAR):
                raise OperatorError(f"unknown field {self.name!r}")
        elif self.kind in (CREATE, ANNIHILATE):
            if self.name not in SPECIES_RANK:
                raise OperatorError(f"unknown species {self.name!r}")
        else:
            raise OperatorError(f"unknown symbol kind {self.kind!r}")
        if isinstance(self.arg, LatticePoint) and (self.kind == FIELD or self.arg.scale != MOMENTUM):
            raise OperatorError("lattice-point arguments are reserved for bare ladder momenta")

    @property
    def is_ladder(self) -> bool:
        return self.kind != FIELD

    @property
    def is_creation(self) -> bool:
        return self.kind == CREATE

    @property
    def species(self) -> str:
        if not self.is_ladder:
            raise OperatorError("full fields have no single species")
        return self.name

    @property
    def label(self):
        """Position label, or None for bare momentum ladders."""
        return None if isinstance(self.arg, LatticePoint) else self.arg

    def sort_key(self) -> tuple:
        arg = (2, self.arg.coords) if isinstance(self.arg, LatticePoint) else label_key(self.arg)
        return (0 if self.is_creation else 1, SPECIES_RANK.get(self.name, 3), arg)

    def relabel(self, mapping) -> "FieldSymbol":
        if isinstance(self.arg, LatticePoint):
            return self
        return replace(self, arg=mapping.get(self.arg, self.arg))

    def text(self) -> str:
        if self.kind == FIELD:
            return f"{self.name}({_arg_text(self.arg)})"
        dagger = "d" if self.is_creation else ""
        return f"{_SPECIES_TEXT[self.name]}{dagger}({_arg_text(self.arg)})"

    __str__ = text


def phi(x) -> FieldSymbol:
    return FieldSymbol(PHI, FIELD, x)


def psi(x) -> FieldSymbol:
    return FieldSymbol(PSI, FIELD, x)


def psid(x) -> FieldSymbol:
    return FieldSymbol(PSIBAR, FIELD, x)


def ladder(species: str, dagger: bool, arg) -> FieldSymbol:
    return FieldSymbol(species, CREATE if dagger else ANNIHILATE, arg)


def parse_symbol(text: str) -> FieldSymbol:
    """Inverse of :meth:`FieldSymbol.text` for label arguments."""
    m = re.fullmatch(r"\s*(phi|psid|psi|m|N\+|N-)(d?)\((\w+)\)\s*", text)
    if not m:
        raise OperatorError(f"cannot parse symbol {text!r}")
    head, dagger, arg = m.groups()
    if head in (PHI, PSI, PSIBAR):
        if dagger:
            raise OperatorError(f"cannot parse symbol {text!r}")
        return FieldSymbol(head, FIELD, arg)
    return ladder(_TEXT_SPECIES[head], bool(dagger), arg)


def field_parts(f: FieldSymbol) -> tuple[FieldSymbol, FieldSymbol]:
    """(annihilation part, creation part) of a full field."""
    x = f.arg
    if f.name == PHI:
        return ladder(MESON, False, x), ladder(MESON, True, x)
    if f.name == PSI:
        return ladder(NUCLEON, False, x), ladder(ANTINUCLEON, True, x)
    if f.name == PSIBAR:
        return ladder(ANTINUCLEON, False, x), ladder(NUCLEON, True, x)
    raise OperatorError(f"{f} is not a full field")


@dataclass(frozen=True)
class Prefactor:
    """``coeff * (-i g)^order``."""

    order: int = 0
    coeff: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "coeff", Fraction(self.coeff))
        if self.order < 0:
            raise OperatorError("negative coupling order")

    def __mul__(self, other: "Prefactor") -> "Prefactor":
        return Prefactor(self.order + other.order, self.coeff * other.coeff)

    def scaled(self, c) -> "Prefactor":
        return Prefactor(self.order, self.coeff * Fraction(c))

    def numeric(self, coupling: float) -> complex:
        return float(self.coeff) * (-1j * coupling) ** self.order

    def text(self) -> str:
        c = self.coeff
        if self.order == 0:
            return str(c)
        head = "(-i*g)" if self.order == 1 else f"(-i*g)^{self.order}"
        if c < 0:
            head, c = "-" + head, -c
        if c == 1:
            return head
        if c.numerator == 1:
            return f"{head}/{c.denominator}"
        return f"{head}*{c}"

    __str__ = text


@dataclass(frozen=True)
class Propagator:
    """Scalar propagator symbol between two position labels.

    ``kind`` is ``"F"`` (time-ordered, symmetric) or ``"D"`` (commutator
    function ``D(a - b)``, not symmetric).  ``mass`` is ``"m"`` or ``"M"``.
    """

    kind: str
    mass: str
    a: object
    b: object

    def __post_init__(self):
        if self.kind not in ("F", "D"):
            raise OperatorError(f"unknown propagator kind {self.kind!r}")
        if self.mass not in (MESON_LINE, NUCLEON_LINE):
            raise OperatorError(f"unknown propagator mass {self.mass!r}")

    def canonical(self) -> "Propagator":
        if self.kind == "F" and label_key(self.b) < label_key(self.a):
            return Propagator(self.kind, self.mass, self.b, self.a)
        return self

    def relabel(self, mapping) -> "Propagator":
        return Propagator(self.kind, self.mass, mapping.get(self.a, self.a), mapping.get(self.b, self.b))

    def sort_key(self) -> tuple:
        return (self.kind, self.mass, label_key(self.a), label_key(self.b))

    def text(self) -> str:
        name = "DF" if self.kind == "F" else "D"
        return f"{name}[{self.mass}]({_arg_text(self.a)}-{_arg_text(self.b)})"

    __str__ = text


def parse_propagator(text: str) -> Propagator:
    m = re.fullmatch(r"\s*(DF|D)\[(m|M)\]\((\w+)-(\w+)\)\s*", text)
    if not m:
        raise OperatorError(f"cannot parse propagator {text!r}")
    name, mass, a, b = m.groups()
    return Propagator("F" if name == "DF" else "D", mass, a, b)


def _labels_text(labels: Sequence) -> str:
    return ",".join(_arg_text(x) for x in labels)


def _measure_text(labels: Sequence) -> str:
    if not labels:
        return ""
    return f"sum[{_labels_text(labels)}] w_uv^-{SYMBOLIC_DIM * len(labels)}"


@dataclass(frozen=True)
class OperatorString:
    """Ordered product of symbols with prefactor and bound labels.

    ``time_ordered`` marks a formal ``T{...}``; its numeric meaning is only
    realised by :func:`apply_operator_string`.
    """

    factors: tuple[FieldSymbol, ...] = ()
    prefactor: Prefactor = field(default_factory=Prefactor)
    labels: tuple = ()
    time_ordered: bool = False

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise OperatorError("bound labels must be distinct")

    def text(self) -> str:
        body = " ".join(f.text() for f in self.factors)
        if self.time_ordered and body:
            body = "T{" + body + "}"
        return _join_text(self.prefactor, self.labels, body, ())

    __str__ = text


def _join_text(prefactor: Prefactor, labels, ops_text: str, props) -> str:
    bare = prefactor.order == 0 and prefactor.coeff == 1 and (labels or ops_text or props)
    pieces = [] if bare else [prefactor.text()]
    if labels:
        pieces.append(_measure_text(labels))
    if ops_text:
        pieces.append(ops_text)
    if props:
        pieces.append(" ".join(p.text() for p in props))
    return " * ".join(pieces)


@dataclass(frozen=True)
class WickTerm:
    """One term of a Wick expansion.

    ``remainder`` holds the uncontracted symbols (full fields inside an implicit
    ``:...:``, or ladder symbols already in normal order); ``propagators`` one
    symbol per contraction; ``contractions`` the index pairs into the source
    string that produced them.
    """

    prefactor: Prefactor = field(default_factory=Prefactor)
    labels: tuple = ()
    remainder: tuple[FieldSymbol, ...] = ()
    propagators: tuple[Propagator, ...] = ()
    contractions: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        for name in ("labels", "remainder", "propagators", "contractions"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def is_ladder_term(self) -> bool:
        return all(f.is_ladder for f in self.remainder)

    @property
    def creators(self) -> tuple[FieldSymbol, ...]:
        return tuple(f for f in self.remainder if f.is_ladder and f.is_creation)

    @property
    def annihilators(self) -> tuple[FieldSymbol, ...]:
        return tuple(f for f in self.remainder if f.is_ladder and not f.is_creation)

    def canonical(self) -> "WickTerm":
        """Sorted labels, sorted ladders (creators first), sorted propagators."""
        rem = self.remainder
        if self.is_ladder_term:
            rem = tuple(sorted(rem, key=FieldSymbol.sort_key))
        props = tuple(sorted((p.canonical() for p in self.propagators), key=Propagator.sort_key))
        labels = tuple(sorted(self.labels, key=label_key))
        return WickTerm(self.prefactor, labels, rem, props, ())

    def key(self) -> str:
        return self.canonical().text()

    def relabel(self, mapping) -> "WickTerm":
        return WickTerm(
            self.prefactor,
            tuple(mapping.get(x, x) for x in self.labels),
            tuple(f.relabel(mapping) for f in self.remainder),
            tuple(p.relabel(mapping) for p in self.propagators),
            self.contractions,
        )

    def orbit_key(self) -> str:
        """Key invariant under renaming of the bound labels."""
        labels = sorted(self.labels, key=label_key)
        best = None
        for perm in itertools.permutations(labels):
            k = self.relabel(dict(zip(labels, perm))).key()
            if best is None or k < best:
                best = k
        return best if best is not None else self.key()

    def automorphisms(self) -> int:
        """Number of label permutations fixing the canonical term."""
        labels = sorted(self.labels, key=label_key)
        ref = self.key()
        return sum(1 for perm in itertools.permutations(labels) if self.relabel(dict(zip(labels, perm))).key() == ref)

    def text(self) -> str:
        if self.is_ladder_term:
            ops = " ".join(f.text() for f in self.remainder)
        else:
            ops = ":" + " ".join(f.text() for f in self.remainder) + ":"
        return _join_text(self.prefactor, self.labels, ops, self.propagators)

    __str__ = text


def parse_term(text: str) -> WickTerm:
    """Parse the canonical text form of a ladder-level :class:`WickTerm`."""
    pieces = [p.strip() for p in text.split(" * ")]
    head = pieces[0]
    if head.startswith("sum[") or re.match(r"[A-Z:]|md?\(", head):
        prefactor = Prefactor()
    else:
        prefactor = _parse_prefactor(pieces.pop(0))
    labels: tuple = ()
    if pieces and pieces[0].startswith("sum["):
        m = re.fullmatch(r"sum\[([\w,]*)\] w_uv\^-(\d+)", pieces.pop(0))
        if not m:
            raise OperatorError(f"cannot parse measure in {text!r}")
        labels = tuple(x for x in m.group(1).split(",") if x)
    rem: list[FieldSymbol] = []
    props: list[Propagator] = []
    for piece in pieces:
        for tok in piece.split():
            if tok.startswith("D"):
                props.append(parse_propagator(tok))
            else:
                rem.append(parse_symbol(tok.strip(":")))
    return WickTerm(prefactor, labels, tuple(rem), tuple(props))


def _parse_prefactor(text: str) -> Prefactor:
    m = re.fullmatch(r"(-?)\(-i\*g\)(?:\^(\d+))?(?:/(\d+)|\*(-?\d+(?:/\d+)?))?", text)
    if m:
        sign, order, den, coeff = m.groups()
        c = Fraction(1, int(den)) if den else Fraction(coeff) if coeff else Fraction(1)
        return Prefactor(int(order) if order else 1, -c if sign else c)
    try:
        return Prefactor(0, Fraction(text))
    except ValueError:
        raise OperatorError(f"cannot parse prefactor {text!r}") from None


# -- S-matrix terms and Wick expansion -----------------------------------------


def smatrix_term(order: int, theory: str = "scalar-yukawa") -> OperatorString:
    """Order-n Dyson term ``(-ig)^n/n! sum_x omega_uv^-4n T{prod psi^ psi phi}``."""
    if order < 0:
        raise OperatorError("order must be non-negative")
    if theory != "scalar-yukawa":
        raise OperatorError(f"no interaction vertex wired in for theory {theory!r}")
    labels = tuple(f"x{i}" for i in range(1, order + 1))
    factors = tuple(f for x in labels for f in (psid(x), psi(x), phi(x)))
    return OperatorString(factors, Prefactor(order, Fraction(1, math.factorial(order))), labels, time_ordered=True)


def contract_pair(f1: FieldSymbol, f2: FieldSymbol) -> Propagator | None:
    """Propagator for a legal contraction, or None where the contraction vanishes."""
    if f1.is_ladder or f2.is_ladder:
        raise OperatorError("contractions are defined on full fields")
    if f1.name == PHI and f2.name == PHI:
        return Propagator("F", MESON_LINE, f1.arg, f2.arg)
    if {f1.name, f2.name} == {PSI, PSIBAR}:
        return Propagator("F", NUCLEON_LINE, f1.arg, f2.arg)
    return None


def _partial_matchings(n: int, legal) -> Iterator[list[tuple[int, int]]]:
    def rec(i, used, acc):
        while i < n and i in used:
            i += 1
        if i >= n:
            yield list(acc)
            return
        yield from rec(i + 1, used | {i}, acc)
        for j in range(i + 1, n):
            if j not in used and legal(i, j):
                acc.append((i, j))
                yield from rec(i + 1, used | {i, j}, acc)
                acc.pop()

    yield from rec(0, frozenset(), [])


def wick_expand(s: OperatorString) -> list[WickTerm]:
    """One term per legal partial contraction pattern, empty pattern first."""
    fs = s.factors
    if any(f.is_ladder for f in fs):
        raise OperatorError("wick_expand needs a product of full fields")
    props = {}
    for i, j in itertools.combinations(range(len(fs)), 2):
        p = contract_pair(fs[i], fs[j])
        if p is not None:
            props[i, j] = p
    terms = []
    for pattern in _partial_matchings(len(fs), lambda i, j: (i, j) in props):
        used = {k for pair in pattern for k in pair}
        remainder = tuple(f for k, f in enumerate(fs) if k not in used)
        terms.append(WickTerm(s.prefactor, s.labels, remainder, tuple(props[p] for p in pattern), tuple(pattern)))
    terms.sort(key=lambda t: len(t.contractions))
    return terms


def wick_term_count(n: int) -> int:
    """Number of partial pairings of n mutually contractible fields."""
    return sum(math.factorial(n) // (2 ** j * math.factorial(j) * math.factorial(n - 2 * j)) for j in range(n // 2 + 1))


def is_normal_ordered(symbols: Sequence[FieldSymbol]) -> bool:
    seen_annihilator = False
    for f in symbols:
        if not f.is_ladder:
            return False
        if f.is_creation and seen_annihilator:
            return False
        seen_annihilator |= not f.is_creation
    return True


def normal_order(s):
    """Stable rearrangement with creators left of annihilators; no commutators."""
    if isinstance(s, OperatorString):
        return replace(s, factors=normal_order(s.factors), time_ordered=False)
    if isinstance(s, WickTerm):
        return replace(s, remainder=normal_order(s.remainder))
    symbols = tuple(s)
    if not all(f.is_ladder for f in symbols):
        raise OperatorError("decompose fields into ladder parts before normal ordering")
    return tuple(f for f in symbols if f.is_creation) + tuple(f for f in symbols if not f.is_creation)


def expand_term(term: WickTerm) -> list[WickTerm]:
    """Split every remaining full field into its frequency parts."""
    if term.is_ladder_term:
        return [term]
    choices = [field_parts(f) if not f.is_ladder else (f,) for f in term.remainder]
    out = []
    for combo in itertools.product(*choices):
        out.append(replace(term, remainder=normal_order(combo)))
    return out


def select_channel(terms: Iterable[WickTerm], incoming: Sequence[str], outgoing: Sequence[str]) -> list[WickTerm]:
    """Ladder terms whose annihilators match ``incoming`` and creators ``outgoing``.

    Species are ``"m"``, ``"n+"``, ``"n-"``.  Results are canonicalised.
    """
    want_in, want_out = Counter(incoming), Counter(outgoing)
    size = len(incoming) + len(outgoing)
    out = []
    for t in terms:
        if len(t.remainder) != size:
            continue
        for lt in expand_term(t):
            if Counter(f.species for f in lt.annihilators) == want_in and \
                    Counter(f.species for f in lt.creators) == want_out:
                out.append(lt.canonical())
    return out


def channel_species(text: str) -> tuple[list[str], list[str]]:
    """Parse ``"NN->NN"``-style channel names.

    Letters: ``N`` nucleon, ``A`` (or ``Nbar``) antinucleon, ``m`` meson,
    ``0`` vacuum.
    """
    try:
        lhs, rhs = text.split("->")
    except ValueError:
        raise OperatorError(f"channel must look like 'NN->NN', got {text!r}") from None

    def side(s):
        s = s.strip().replace("Nbar", "A")
        if s in ("", "0"):
            return []
        table = {"N": NUCLEON, "A": ANTINUCLEON, "m": MESON}
        if any(ch not in table for ch in s):
            raise OperatorError(f"unknown particle in channel {text!r}")
        return [table[ch] for ch in s]

    return side(lhs), side(rhs)


# -- oracle semantics ------------------------------------------------------------


def _concrete(arg, assignment):
    if isinstance(arg, LatticePoint):
        return arg
    if isinstance(arg, str):
        if assignment is None or arg not in assignment:
            raise OperatorError(f"symbolic argument {arg!r} has no concrete value")
        return tuple(assignment[arg])
    return tuple(arg)


def _symbol_operator(f: FieldSymbol, assignment):
    arg = _concrete(f.arg, assignment)
    if f.is_ladder:
        if isinstance(arg, LatticePoint):
            return (create if f.is_creation else annihilate)(arg, f.species)
        return ladder_field(f.species, f.is_creation, arg)
    parts = [_symbol_operator(p, assignment) for p in field_parts(f)]
    return lambda v: parts[0](v) + parts[1](v)


def propagator_value(p: Propagator, assignment, theory: TheoryParams, params) -> complex:
    a, b = _concrete(p.a, assignment), _concrete(p.b, assignment)
    z = tuple(params.wrap(x - y) for x, y in zip(a, b))
    mass = theory.meson_mass if p.mass == MESON_LINE else theory.nucleon_mass
    if p.kind == "F":
        return feynman_propagator(z, mass, params)
    return propagator_D(z, mass, params)


def apply_operator_string(s, v: FockVector, assignment=None, theory: TheoryParams | None = None) -> FockVector:
    """Apply a string (or ladder-level Wick term) right to left at concrete positions.

    Bound labels are *not* summed and the prefactor is not applied; propagator
    symbols of a :class:`WickTerm` are multiplied in as numbers.  Time-ordered
    strings are sorted by time (latest leftmost, ties keep written order).
    """
    if isinstance(s, WickTerm):
        factors, props, ordered = s.remainder, s.propagators, False
    else:
        factors, props, ordered = s.factors, (), s.time_ordered
    if ordered:
        times = [_concrete(f.arg, assignment)[0] for f in factors]
        order = sorted(range(len(factors)), key=lambda k: -times[k])
        factors = tuple(factors[k] for k in order)
    for f in reversed(factors):
        v = _symbol_operator(f, assignment)(v)
    if props:
        theory = theory or TheoryParams()
        c = 1
        for p in props:
            c *= propagator_value(p, assignment, theory, v.layout.params)
        v = c * v
    return v
