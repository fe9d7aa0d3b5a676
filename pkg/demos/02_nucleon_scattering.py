"""
Nucleon-nucleon scattering, three ways
======================================

Starting from a small graph description we

1. translate the graph into a string diagram and read back its operator term,
2. extract the amplitude from the diagram and compare it with the Feynman rules,
3. evaluate the diagram as a matrix between lattice particle states and check
   the number against the symbolic amplitude.
"""

from catfeyn.amplitude import (
    MomentumAssignment,
    amplitude_from_categorical,
    eval_amplitude,
    feynman_rules,
    wick_multiplicity,
)
from catfeyn.diagram.graph import parse_feynman_graph
from catfeyn.diagram.ir import evaluate_numeric, linearize, render_text, translate
from catfeyn.fock import FockLayout, TheoryParams, occupancy_from_particles, particle_state
from catfeyn.lattice import MOMENTUM, FourMomentum, LatticeParams, LatticePoint

GRAPH = """
vertices: x1 x2
edges:
  x1 x2 meson
legs:
  x1 nucleon in  p1
  x2 nucleon in  p2
  x1 nucleon out p1'
  x2 nucleon out p2'
"""

# %%
# Graph to diagram to operator term
g = parse_feynman_graph(GRAPH)
d = translate(g)
print(render_text(d))
term = linearize(d)
print("linearized:", term.canonical().text())

# %%
# Symbolic amplitude: diagram route and Feynman rules agree after
# symmetrising over the two outgoing nucleons.
incoming = [(l.ladder_species, l.momentum) for l in g.incoming]
outgoing = [(l.ladder_species, l.momentum) for l in g.outgoing]
cat = amplitude_from_categorical(d, incoming, outgoing)
rules = feynman_rules(g, symmetrize=True)
print("categorical:", cat.text())
print("rules:      ", rules.text())
print("identical:  ", cat.text() == rules.text())

# %%
# Numbers on the 15 x 15 lattice.  A finite epsilon keeps the propagators
# away from their poles.
params = LatticeParams(3, 5)
theory = TheoryParams(1, 1, 1.0, 0.1)
spatial = {"p1": -1, "p2": 1, "p1'": -2, "p2'": 2}
moms = {k: FourMomentum.on_shell(LatticePoint((c,), MOMENTUM, params), 1) for k, c in spatial.items()}
for k, p in moms.items():
    print(f"  {k:4s} {p}")

sym = eval_amplitude(cat, MomentumAssignment(moms, params, wrap=True), epsilon=theory.epsilon, theory=theory)

layout = FockLayout.yukawa(params, theory)
occ_in = occupancy_from_particles(layout, [(l.ladder_species, moms[l.momentum].spatial) for l in g.incoming])
occ_out = occupancy_from_particles(layout, [(l.ladder_species, moms[l.momentum].spatial) for l in g.outgoing])
op = evaluate_numeric(d, params, theory, method="momentum", feynman_kernel="Fmom", epsilon=theory.epsilon)
element = particle_state(layout, occ_out).inner(op(particle_state(layout, occ_in)))
# the diagram stands for every relabelling of its vertices
num = wick_multiplicity(term) * element

print("symbolic amplitude:", sym)
print("matrix element:    ", num)
print("relative difference:", abs(sym - num) / abs(sym))
