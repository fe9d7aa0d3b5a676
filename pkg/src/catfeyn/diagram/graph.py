"""Feynman graphs of scalar Yukawa theory and their text format.

The format has three sections::

    vertices: x1 x2
    edges:
      x1 x2 meson          # v1 v2 species; a nucleon line runs v1 -> v2
    legs:
      x1 nucleon in  p1    # vertex species in|out momentum-label
      x1 nucleon out p1'

Species are ``meson``, ``nucleon`` and ``antinucleon``.  An internal
``antinucleon`` edge ``u v`` is the nucleon edge ``v u``.  A leg with vertex
``-`` and direction ``through`` is a bare line that meets no vertex.  Blank
lines and ``#`` comments are ignored; entries may follow a section header on
the same line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

from ..fock import ANTINUCLEON, MESON, NUCLEON
from ..opalg import MESON_LINE, NUCLEON_LINE, Prefactor, Propagator, WickTerm, ladder, label_key

MESON_LINE_NAME = "meson"
NUCLEON_LINE_NAME = "nucleon"
ANTINUCLEON_LINE_NAME = "antinucleon"
_LINE_SPECIES = {MESON_LINE_NAME: MESON, NUCLEON_LINE_NAME: NUCLEON, ANTINUCLEON_LINE_NAME: ANTINUCLEON}
DIRECTIONS = ("in", "out", "through")


class GraphError(ValueError):
    """Malformed graph text or an invalid graph; carries a source location."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, vertex: str | None = None):
        self.line, self.column, self.vertex = line, column, vertex
        self.message = message
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    species: str  # meson | nucleon (antinucleon edges are stored reversed)
    line: int | None = None


@dataclass(frozen=True)
class Leg:
    vertex: str | None
    species: str  # meson | nucleon | antinucleon
    direction: str
    momentum: str
    line: int | None = None

    @property
    def ladder_species(self) -> str:
        return _LINE_SPECIES[self.species]


@dataclass(frozen=True)
class FeynmanGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...] = ()
    legs: tuple[Leg, ...] = ()

    @property
    def order(self) -> int:
        return len(self.vertices)

    @property
    def incoming(self) -> tuple[Leg, ...]:
        return tuple(l for l in self.legs if l.direction == "in")

    @property
    def outgoing(self) -> tuple[Leg, ...]:
        return tuple(l for l in self.legs if l.direction == "out")

    @property
    def through(self) -> tuple[Leg, ...]:
        return tuple(l for l in self.legs if l.direction == "through")

    def validate(self) -> "FeynmanGraph":
        """Check trivalence and the species pattern at every vertex."""
        if not self.vertices and not self.legs:
            raise GraphError("graph has no vertices and no legs")
        known = set(self.vertices)
        if len(known) != len(self.vertices):
            raise GraphError("duplicate vertex label")
        meson = {x: 0 for x in self.vertices}
        arrow_in = {x: 0 for x in self.vertices}
        arrow_out = {x: 0 for x in self.vertices}
        for e in self.edges:
            for x in (e.u, e.v):
                if x not in known:
                    raise GraphError(f"edge refers to unknown vertex {x!r}", e.line, 1)
            if e.species == MESON_LINE_NAME:
                meson[e.u] += 1
                meson[e.v] += 1
            else:
                arrow_out[e.u] += 1
                arrow_in[e.v] += 1
        momenta = set()
        for leg in self.legs:
            if leg.momentum in momenta:
                raise GraphError(f"momentum label {leg.momentum!r} used twice", leg.line, 1)
            momenta.add(leg.momentum)
            if leg.direction == "through":
                continue
            if leg.vertex not in known:
                raise GraphError(f"leg refers to unknown vertex {leg.vertex!r}", leg.line, 1)
            x = leg.vertex
            if leg.species == MESON_LINE_NAME:
                meson[x] += 1
            elif (leg.species == NUCLEON_LINE_NAME) == (leg.direction == "in"):
                arrow_in[x] += 1
            else:
                arrow_out[x] += 1
        for x in self.vertices:
            if (meson[x], arrow_in[x], arrow_out[x]) != (1, 1, 1):
                raise GraphError(
                    f"vertex {x!r} is not a Yukawa vertex: {meson[x]} meson line(s), "
                    f"{arrow_in[x]} nucleon arrow(s) in, {arrow_out[x]} out",
                    vertex=x,
                )
        return self

    def wick_term(self) -> WickTerm:
        """The normally ordered Wick term this graph stands for."""
        creators = [ladder(l.ladder_species, True, l.vertex) for l in self.outgoing]
        annihilators = [ladder(l.ladder_species, False, l.vertex) for l in self.incoming]
        props = []
        for e in self.edges:
            mass = MESON_LINE if e.species == MESON_LINE_NAME else NUCLEON_LINE
            props.append(Propagator("F", mass, e.u, e.v))
        n = self.order
        prefactor = Prefactor(n, Fraction(1, math.factorial(n)))
        labels = tuple(sorted(self.vertices, key=label_key))
        return WickTerm(prefactor, labels, tuple(creators + annihilators), tuple(props)).canonical()

    def to_text(self) -> str:
        lines = ["vertices: " + " ".join(self.vertices), "edges:"]
        lines += [f"  {e.u} {e.v} {e.species}" for e in self.edges]
        lines.append("legs:")
        lines += [f"  {l.vertex or '-'} {l.species} {l.direction} {l.momentum}" for l in self.legs]
        return "\n".join(lines) + "\n"


_SECTION = re.compile(r"^\s*(vertices|edges|legs)\s*:(.*)$")
_LABEL = re.compile(r"^[A-Za-z_][\w']*$")
_VERTEX = re.compile(r"^[A-Za-z_]\w*$")


def _tokens(text: str, offset: int):
    """(token, 1-based column) pairs of a line fragment starting at ``offset``."""
    return [(m.group(0), offset + m.start() + 1) for m in re.finditer(r"\S+", text)]


def parse_feynman_graph(text: str) -> FeynmanGraph:
    """Parse and validate the graph text format."""
    section = None
    vertices: list[str] = []
    where: dict[str, tuple[int, int]] = {}
    edges: list[Edge] = []
    legs: list[Leg] = []
    seen_sections = set()
    nonblank = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        nonblank = True
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section in seen_sections:
                raise GraphError(f"section {section!r} appears twice", lineno, line.index(section) + 1)
            seen_sections.add(section)
            toks = _tokens(m.group(2), m.start(2))
        else:
            if section is None:
                col = len(line) - len(line.lstrip()) + 1
                raise GraphError("expected a section header (vertices:, edges: or legs:)", lineno, col)
            toks = _tokens(line, 0)
        if not toks:
            continue
        if section == "vertices":
            for tok, col in toks:
                if not _VERTEX.match(tok):
                    raise GraphError(f"bad vertex label {tok!r}", lineno, col)
                if tok in vertices:
                    raise GraphError(f"duplicate vertex {tok!r}", lineno, col)
                vertices.append(tok)
                where[tok] = (lineno, col)
        elif section == "edges":
            if len(toks) != 3:
                raise GraphError("edge needs 'v1 v2 species'", lineno, toks[0][1])
            (u, _), (v, _), (sp, col) = toks
            if sp not in _LINE_SPECIES:
                raise GraphError(f"unknown species {sp!r}", lineno, col)
            if sp == ANTINUCLEON_LINE_NAME:
                u, v, sp = v, u, NUCLEON_LINE_NAME
            for name, c in toks[:2]:
                if name not in vertices:
                    raise GraphError(f"dangling edge: unknown vertex {name!r}", lineno, c)
            edges.append(Edge(u, v, sp, lineno))
        else:
            if len(toks) != 4:
                raise GraphError("leg needs 'vertex species in|out momentum-label'", lineno, toks[0][1])
            (x, xc), (sp, spc), (direction, dc), (mom, mc) = toks
            if sp not in _LINE_SPECIES:
                raise GraphError(f"unknown species {sp!r}", lineno, spc)
            if direction not in DIRECTIONS:
                raise GraphError(f"direction must be in, out or through, got {direction!r}", lineno, dc)
            if not _LABEL.match(mom):
                raise GraphError(f"bad momentum label {mom!r}", lineno, mc)
            if direction == "through":
                if x != "-":
                    raise GraphError("a through leg takes '-' as its vertex", lineno, xc)
                legs.append(Leg(None, sp, direction, mom, lineno))
                continue
            if x not in vertices:
                raise GraphError(f"dangling leg: unknown vertex {x!r}", lineno, xc)
            legs.append(Leg(x, sp, direction, mom, lineno))
    if not nonblank:
        raise GraphError("empty graph description", 1, 1)
    graph = FeynmanGraph(tuple(vertices), tuple(edges), tuple(legs))
    try:
        return graph.validate()
    except GraphError as err:
        if err.line is None and err.vertex in where:
            raise GraphError(err.message, *where[err.vertex], vertex=err.vertex) from None
        raise
