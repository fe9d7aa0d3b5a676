"""
Composing two scattering diagrams
=================================

Stacking the one-meson-exchange diagram on top of itself and normal ordering
the result gives a formal sum of seven diagrams.  They are grouped by how many
new contractions join the two layers: none, one or two.  The sum, evaluated
as a matrix on two-nucleon states, equals the product of the two
single-layer matrices.
"""

import time

import numpy as np

from catfeyn.diagram.ir import compose_sequential, evaluate_numeric, linearize, new_propagator_count, translate
from catfeyn.examples import example_graph
from catfeyn.fock import NUCLEON, FockBasis, FockLayout, TheoryParams
from catfeyn.lattice import LatticeParams

d = translate(example_graph("nn_tree"))
fs = compose_sequential(d, d)

# %%
# The seven terms
for coeff, t in fs:
    print(f"[{new_propagator_count(t)} new] {coeff} x {linearize(t).canonical().text()}")
counts = [new_propagator_count(t) for _, t in fs]
print("by new propagators:", [counts.count(j) for j in range(3)])

# %%
# Matrix check on every two-nucleon state of the 15 x 15 lattice
params, theory = LatticeParams(3, 5), TheoryParams()
layout = FockLayout.yukawa(params, theory)
basis = FockBasis(layout, max_particles=2, species=[NUCLEON]).restrict(lambda o: sum(o) == 2)
start = time.perf_counter()
e = evaluate_numeric(d, params, theory, basis=basis, method="momentum")
s = evaluate_numeric(fs, params, theory, basis=basis, method="momentum")
print(f"{len(basis)} states, {time.perf_counter() - start:.1f}s")
print("|sum of terms - product|:", np.abs(s - e @ e).max())
print("largest product entry:   ", np.abs(e @ e).max())
