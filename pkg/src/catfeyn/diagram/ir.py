"""Categorical diagram IR: nodes, typed wires and the rewrites between views.

A diagram for a normally ordered term has ``k`` parallel field wires opened by
a split map and closed by a merge map (omitted when ``k <= 1``).  Branch ``j``
carries the ``j``-th annihilation box followed by the ``j``-th creation box.
Every bound position label is one spider on the control wire; spiders connect
to the control ports of ladder boxes and to the two ports of propagator boxes.
The spider measure is ``sum_x omega_uv^-4 |delta_x>...<delta_x|``.

Semantics are fixed by :func:`linearize`: sliding every box off its branch
recovers the operator string, which is then evaluated on the Fock oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ..fock import MESON, FockBasis, FockVector, TheoryParams, operator_matrix
from ..lattice import LatticeParams
from ..opalg import (
    MESON_LINE,
    NUCLEON_LINE,
    OperatorError,
    Prefactor,
    Propagator,
    WickTerm,
    is_normal_ordered,
    label_key,
    ladder,
    normal_order,
)
from ..splitmerge import MULTINOMIAL
from .graph import FeynmanGraph
from .numeric import POSITION_METHOD, TermEvaluator

FIELD_WIRE = "field"
CONTROL_WIRE = "control"
BOUNDARY_IN = "in"
BOUNDARY_OUT = "out"


class DiagramError(ValueError):
    pass


@dataclass(frozen=True)
class SplitNode:
    k: int
    weighting: str = MULTINOMIAL


@dataclass(frozen=True)
class MergeNode:
    k: int
    weighting: str = MULTINOMIAL


@dataclass(frozen=True)
class CoherentLadderBox:
    species: str
    dagger: bool


@dataclass(frozen=True)
class PositionSpider:
    label: str


@dataclass(frozen=True)
class PropagatorBox:
    kind: str  # "F" or "D"
    mass: str  # "m" or "M"


@dataclass(frozen=True)
class StateNode:
    """Control state plugged into a ladder box, e.g. a momentum eigenstate."""

    kind: str
    value: object


@dataclass(frozen=True)
class CostateNode:
    kind: str
    value: object


Node = Union[SplitNode, MergeNode, CoherentLadderBox, PositionSpider, PropagatorBox, StateNode, CostateNode]


@dataclass(frozen=True)
class Wire:
    """Wire from ``(src, src_port)`` to ``(dst, dst_port)``.

    Field wires run from input to output; control wires run from a spider or
    state to the port of a box.
    """

    src: str
    src_port: int
    dst: str
    dst_port: int
    kind: str


@dataclass(frozen=True)
class CatDiagram:
    nodes: tuple[tuple[str, Node], ...] = ()
    wires: tuple[Wire, ...] = ()
    prefactor: Prefactor = field(default_factory=Prefactor)

    @property
    def node_map(self) -> dict[str, Node]:
        return dict(self.nodes)

    def count(self, cls) -> int:
        return sum(1 for _, n in self.nodes if isinstance(n, cls))

    @property
    def branches(self) -> int:
        for _, n in self.nodes:
            if isinstance(n, SplitNode):
                return n.k
        has_field = any(w.kind == FIELD_WIRE for w in self.wires)
        return 1 if has_field else 0

    def check(self) -> "CatDiagram":
        """Well-typed wiring: field wires join field ports, control wires join control ports."""
        nodes = self.node_map
        for w in self.wires:
            for end in (w.src, w.dst):
                if end not in nodes and end not in (BOUNDARY_IN, BOUNDARY_OUT):
                    raise DiagramError(f"wire touches unknown node {end!r}")
            if w.kind == FIELD_WIRE:
                for end in (w.src, w.dst):
                    if end in nodes and not isinstance(nodes[end], (SplitNode, MergeNode, CoherentLadderBox)):
                        raise DiagramError(f"field wire attached to {type(nodes[end]).__name__}")
            elif w.kind == CONTROL_WIRE:
                if not isinstance(nodes.get(w.src), (PositionSpider, StateNode, CostateNode)):
                    raise DiagramError("control wires start at a spider or a state")
                if not isinstance(nodes.get(w.dst), (CoherentLadderBox, PropagatorBox)):
                    raise DiagramError("control wires end at a ladder box or a propagator box")
            else:
                raise DiagramError(f"unknown wire kind {w.kind!r}")
        return self

    def spider_degree(self, node_id: str) -> int:
        return sum(1 for w in self.wires if w.kind == CONTROL_WIRE and w.src == node_id)


@dataclass(frozen=True)
class FormalSum:
    terms: tuple[tuple[object, CatDiagram], ...] = ()

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)


# -- 1-D -> 2-D ------------------------------------------------------------------


def two_dimensionalize(prefactor: Prefactor | None, s: WickTerm, branches: int | None = None) -> CatDiagram:
    """Diagram for a normally ordered ladder term.

    ``prefactor=None`` keeps the term's own prefactor.  ``branches`` may exceed
    ``max(#annihilators, #creators)`` to add bare pass-through wires.
    """
    if not s.is_ladder_term or not is_normal_ordered(s.remainder):
        raise DiagramError("two_dimensionalize needs a normally ordered ladder term")
    prefactor = s.prefactor if prefactor is None else prefactor
    ann, cre = s.annihilators, s.creators
    k = max(len(ann), len(cre))
    if branches is not None:
        if branches < k:
            raise DiagramError(f"{branches} branches cannot hold {k} boxes per side")
        k = branches
    nodes: list[tuple[str, Node]] = []
    wires: list[Wire] = []
    labels = list(s.labels)
    for f in s.remainder:
        if f.label is not None and f.label not in labels:
            raise DiagramError(f"label {f.label!r} is not bound")
    spider_id = {x: f"s_{x}" for x in labels}
    if k > 1:
        nodes.append(("split", SplitNode(k)))
        wires.append(Wire(BOUNDARY_IN, 0, "split", 0, FIELD_WIRE))
    for j in range(k):
        chain = []
        if j < len(ann):
            chain.append((f"a{j}", ann[j]))
        if j < len(cre):
            chain.append((f"c{j}", cre[j]))
        prev, prev_port = ("split", j) if k > 1 else (BOUNDARY_IN, 0)
        for nid, f in chain:
            nodes.append((nid, CoherentLadderBox(f.species, f.is_creation)))
            wires.append(Wire(prev, prev_port, nid, 0, FIELD_WIRE))
            prev, prev_port = nid, 0
        nxt, nxt_port = ("merge", j) if k > 1 else (BOUNDARY_OUT, 0)
        wires.append(Wire(prev, prev_port, nxt, nxt_port, FIELD_WIRE))
    if k > 1:
        nodes.append(("merge", MergeNode(k)))
        wires.append(Wire("merge", 0, BOUNDARY_OUT, 0, FIELD_WIRE))
    for x in labels:
        nodes.append((spider_id[x], PositionSpider(x)))
    for j, f in list(enumerate(ann)) + [(j, f) for j, f in enumerate(cre)]:
        nid = f"{'c' if f.is_creation else 'a'}{j}"
        if f.label is None:
            sid = f"st_{nid}"
            nodes.append((sid, StateNode("momentum", f.arg)))
            wires.append(Wire(sid, 0, nid, 1, CONTROL_WIRE))
        else:
            wires.append(Wire(spider_id[f.label], 0, nid, 1, CONTROL_WIRE))
    for i, p in enumerate(s.propagators):
        nid = f"p{i}"
        nodes.append((nid, PropagatorBox(p.kind, p.mass)))
        wires.append(Wire(spider_id[p.a], 0, nid, 0, CONTROL_WIRE))
        wires.append(Wire(spider_id[p.b], 0, nid, 1, CONTROL_WIRE))
    return CatDiagram(tuple(nodes), tuple(wires), prefactor).check()


def translate(g: FeynmanGraph) -> CatDiagram:
    """Feynman graph to categorical diagram (parallel wires, boxes, spiders, propagators)."""
    g.validate()
    term = g.wick_term()
    through = len(g.through)
    branches = max(len(g.incoming), len(g.outgoing)) + through
    return two_dimensionalize(term.prefactor, term, branches=branches)


# -- 2-D -> 1-D --------------------------------------------------------------------


def _field_successor(d: CatDiagram, node: str, port: int) -> tuple[str, int]:
    hits = [w for w in d.wires if w.kind == FIELD_WIRE and w.src == node and w.src_port == port]
    if len(hits) != 1:
        raise DiagramError(f"field port {node}:{port} has {len(hits)} outgoing wires")
    return hits[0].dst, hits[0].dst_port


def linearize(d: CatDiagram) -> WickTerm:
    """Slide all boxes off the branches and read back the Wick term.

    Boxes on each branch must appear as annihilations followed by creations
    (the shape produced by :func:`two_dimensionalize`); otherwise sliding would
    need commutators and a :class:`DiagramError` is raised.
    """
    d.check()
    nodes = d.node_map
    splits = [n for n in nodes.values() if isinstance(n, SplitNode)]
    merges = [n for n in nodes.values() if isinstance(n, MergeNode)]
    if len(splits) != len(merges) or len(splits) > 1 or (splits and splits[0].k != merges[0].k):
        raise DiagramError("unbalanced split/merge pair")
    control = {}
    for w in d.wires:
        if w.kind == CONTROL_WIRE:
            control.setdefault(w.dst, {})[w.dst_port] = w.src
    chains = []
    if not any(w.kind == FIELD_WIRE for w in d.wires):
        pass
    elif splits:
        split_id = next(i for i, n in d.nodes if isinstance(n, SplitNode))
        merge_id = next(i for i, n in d.nodes if isinstance(n, MergeNode))
        if _field_successor_in(d) != (split_id, 0):
            raise DiagramError("input wire does not enter the split map")
        for j in range(splits[0].k):
            chains.append(_walk(d, split_id, j, merge_id))
    else:
        chains.append(_walk(d, BOUNDARY_IN, 0, BOUNDARY_OUT))
    creators, annihilators = [], []
    for chain in chains:
        kinds = [nodes[nid].dagger for nid in chain]
        if kinds != sorted(kinds):
            raise DiagramError("a creation box precedes an annihilation box on one branch")
        for nid in chain:
            box = nodes[nid]
            src = control.get(nid, {}).get(1)
            if src is None:
                raise DiagramError(f"ladder box {nid} has no control input")
            ctrl = nodes[src]
            arg = ctrl.label if isinstance(ctrl, PositionSpider) else ctrl.value
            (creators if box.dagger else annihilators).append(ladder(box.species, box.dagger, arg))
    props = []
    for nid, n in d.nodes:
        if isinstance(n, PropagatorBox):
            ports = control.get(nid, {})
            if set(ports) != {0, 1}:
                raise DiagramError(f"propagator box {nid} needs two control inputs")
            props.append(Propagator(n.kind, n.mass, nodes[ports[0]].label, nodes[ports[1]].label))
    labels = tuple(n.label for _, n in d.nodes if isinstance(n, PositionSpider))
    return WickTerm(d.prefactor, labels, tuple(creators + annihilators), tuple(props))


def _field_successor_in(d: CatDiagram):
    return _field_successor(d, BOUNDARY_IN, 0)


def _walk(d: CatDiagram, start: str, port: int, stop: str) -> list[str]:
    chain = []
    node, p = _field_successor(d, start, port)
    seen = set()
    while node != stop:
        if node in seen or node in (BOUNDARY_IN, BOUNDARY_OUT):
            raise DiagramError("field wire does not reach the merge map")
        seen.add(node)
        if not isinstance(d.node_map.get(node), CoherentLadderBox):
            raise DiagramError(f"unexpected node {node!r} on a branch")
        chain.append(node)
        node, p = _field_successor(d, node, 0)
    return chain


# -- composition ---------------------------------------------------------------------


def _fresh_labels(taken: set, labels: Sequence[str]) -> dict:
    mapping, n = {}, 1
    for x in sorted(labels, key=label_key):
        if x not in taken:
            continue
        while f"x{n}" in taken or f"x{n}" in labels:
            n += 1
        mapping[x] = f"x{n}"
        taken = taken | {f"x{n}"}
    return mapping


def _commutator_mass(species: str) -> str:
    return MESON_LINE if species == MESON else NUCLEON_LINE


def contract_product(t2: WickTerm, t1: WickTerm) -> list[WickTerm]:
    """Normal-order the product ``t2 . t1`` (t1 acts first).

    Every annihilator left of a same-species creator may be commuted past it,
    spawning ``D(x_ann - x_cre)``; the result lists one term per partial
    matching of such pairs, fewest new propagators first.
    """
    seq = t2.remainder + t1.remainder
    pairs = [
        (i, j)
        for i, j in itertools.combinations(range(len(seq)), 2)
        if not seq[i].is_creation and seq[j].is_creation and seq[i].species == seq[j].species
    ]
    for i, j in pairs:
        if seq[i].label is None or seq[j].label is None:
            raise OperatorError("composition of bare momentum ladders is not supported")
    prefactor = t2.prefactor * t1.prefactor
    labels = tuple(t1.labels) + tuple(t2.labels)
    base_props = tuple(t1.propagators) + tuple(t2.propagators)
    out = []
    for r in range(len(pairs) + 1):
        for chosen in itertools.combinations(pairs, r):
            used = [k for pair in chosen for k in pair]
            if len(set(used)) != len(used):
                continue
            rem = normal_order(tuple(f for k, f in enumerate(seq) if k not in used))
            new = tuple(Propagator("D", _commutator_mass(seq[i].species), seq[i].label, seq[j].label)
                        for i, j in chosen)
            out.append(WickTerm(prefactor, labels, rem, base_props + new))
    return out


def compose_sequential(d1: CatDiagram, d2: CatDiagram) -> FormalSum:
    """``d2`` after ``d1``: all intermediate contractions as a formal sum."""
    t1, t2 = linearize(d1), linearize(d2)
    mapping = _fresh_labels(set(t1.labels), list(t2.labels))
    t2 = t2.relabel(mapping)
    terms = contract_product(t2, t1)
    return FormalSum(tuple((1, two_dimensionalize(None, t.canonical())) for t in terms))


def new_propagator_count(d: CatDiagram) -> int:
    return sum(1 for _, n in d.nodes if isinstance(n, PropagatorBox) and n.kind == "D")


# -- rendering -----------------------------------------------------------------------


def _node_label(n: Node) -> str:
    if isinstance(n, SplitNode):
        return f"split {n.k}"
    if isinstance(n, MergeNode):
        return f"merge {n.k}"
    if isinstance(n, CoherentLadderBox):
        text = {"m": "m", "n+": "n+", "n-": "n-"}[n.species]
        return text + ("†" if n.dagger else "")
    if isinstance(n, PositionSpider):
        return n.label
    if isinstance(n, PropagatorBox):
        return ("ΔF" if n.kind == "F" else "D") + f"[{n.mass}]"
    return f"{n.kind}"


_SHAPES = {
    SplitNode: "triangle",
    MergeNode: "invtriangle",
    CoherentLadderBox: "box",
    PositionSpider: "circle",
    PropagatorBox: "box",
    StateNode: "point",
    CostateNode: "point",
}


def _dot_body(d: CatDiagram, prefix: str, indent: str) -> list[str]:
    lines = []
    for nid, n in d.nodes:
        style = ', style=filled, fillcolor="#9be79b"' if isinstance(n, PositionSpider) else ""
        lines.append(f'{indent}"{prefix}{nid}" [label="{_node_label(n)}", shape={_SHAPES[type(n)]}{style}];')
    for w in d.wires:
        if w.src in (BOUNDARY_IN, BOUNDARY_OUT) or w.dst in (BOUNDARY_IN, BOUNDARY_OUT):
            continue
        style = "" if w.kind == FIELD_WIRE else " [style=dashed, arrowhead=none]"
        lines.append(f'{indent}"{prefix}{w.src}" -> "{prefix}{w.dst}"{style};')
    return lines


def render_dot(d: CatDiagram | FormalSum) -> str:
    """Deterministic DOT text; a formal sum gets one cluster per term."""
    if isinstance(d, FormalSum):
        lines = ["digraph formal_sum {"]
        for i, (coeff, term) in enumerate(d.terms):
            lines.append(f"  subgraph cluster_{i} {{")
            lines.append(f'    label="{coeff} * {term.prefactor.text()}";')
            lines += _dot_body(term, f"t{i}_", "    ")
            lines.append("  }")
        lines.append("}")
        return "\n".join(lines) + "\n"
    lines = ["digraph catdiagram {"]
    if d.nodes:
        lines.append(f'  label="{d.prefactor.text()}";')
        lines.append("  rankdir=BT;")
    lines += _dot_body(d, "", "  ")
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_text(d: CatDiagram | FormalSum) -> str:
    """Short textual description followed by the linearized term."""
    if isinstance(d, FormalSum):
        return "".join(f"[{i}] coeff {c}: {linearize(t).canonical().text()}\n" for i, (c, t) in enumerate(d.terms))
    parts = [
        f"branches: {d.branches}",
        f"annihilation boxes: {sum(1 for _, n in d.nodes if isinstance(n, CoherentLadderBox) and not n.dagger)}",
        f"creation boxes: {sum(1 for _, n in d.nodes if isinstance(n, CoherentLadderBox) and n.dagger)}",
        f"spiders: {d.count(PositionSpider)}",
        f"propagator boxes: {d.count(PropagatorBox)}",
        f"prefactor: {d.prefactor.text()} w_uv^-{4 * d.count(PositionSpider)}",
        f"term: {linearize(d).canonical().text()}",
    ]
    return "\n".join(parts) + "\n"


# -- numeric semantics -------------------------------------------------------------------


class DiagramOperator:
    """Linear map on Fock vectors given by a diagram or a formal sum."""

    def __init__(self, d: CatDiagram | FormalSum, params: LatticeParams, theory: TheoryParams | None = None,
                 method: str = POSITION_METHOD, feynman_kernel: str = "F", epsilon: float | None = None):
        items = d.terms if isinstance(d, FormalSum) else ((1, d),)
        self.parts = [
            (complex(c), TermEvaluator(linearize(t), params, theory, method=method,
                                       feynman_kernel=feynman_kernel, epsilon=epsilon))
            for c, t in items
        ]
        self.params = params

    def __call__(self, v: FockVector) -> FockVector:
        total = 0 * v
        for c, ev in self.parts:
            total = total + c * ev(v)
        return total

    def matrix(self, in_basis: FockBasis, out_basis: FockBasis | None = None, strict: bool = True) -> np.ndarray:
        return operator_matrix(self, in_basis, out_basis, strict=strict)


def evaluate_numeric(d: CatDiagram | FormalSum, params: LatticeParams, theory: TheoryParams | None = None,
                     basis: FockBasis | None = None, out_basis: FockBasis | None = None, **kwargs):
    """Operator of ``d`` on the oracle; with ``basis`` its matrix instead."""
    op = DiagramOperator(d, params, theory, **kwargs)
    if basis is None:
        return op
    return op.matrix(basis, out_basis)
