"""
Splitting a Fock state into parallel branches
=============================================

A split map distributes the particles of a state over k copies of the Fock
space; merge is its adjoint.  Two coefficient choices are compared:

* ``literal`` gives every distribution weight one.  Merging after splitting
  then multiplies a basis state by the number of distributions, so the pair
  is not an isometry.
* ``multinomial`` weights each distribution by a multinomial coefficient.
  An annihilator can then act before the split or on any single branch
  afterwards with identical results ("sliding").
"""

import numpy as np

from catfeyn.fock import FockBasis, FockLayout, annihilate, basis_vector, create
from catfeyn.lattice import MOMENTUM, LatticeParams, LatticePoint
from catfeyn.splitmerge import (
    LITERAL,
    MULTINOMIAL,
    enumerate_partitions,
    merge_matrix,
    merge_split_factor,
    sliding_residual,
    split,
    split_matrix,
)

params = LatticeParams(1, 3)  # three momentum modes keeps the printout short
layout = FockLayout.real_scalar(params)
p = LatticePoint((0,), MOMENTUM, params)

# %%
# Two particles in mode p, one in the next mode, split over two branches
occ = (0, 2, 1)
parts = enumerate_partitions(occ, 2)
print(f"{len(parts)} ways to share {occ} between 2 branches")
for weighting in (LITERAL, MULTINOMIAL):
    w = split(basis_vector(layout, occ), 2, weighting)
    print(weighting)
    for key, a in w.amplitudes.items():
        print(f"   {key[0]} | {key[1]}   {a.real:.4f}")

# %%
# merge . split on basis states
for k in (2, 3):
    print(f"k={k}: literal {merge_split_factor(occ, k, LITERAL):.0f}, "
          f"multinomial {merge_split_factor(occ, k, MULTINOMIAL):.0f}")

# %%
# Both weightings give an exact adjoint pair
basis = FockBasis(layout, max_particles=3)
for weighting in (LITERAL, MULTINOMIAL):
    s, _ = split_matrix(basis, 2, weighting)
    m = merge_matrix(basis, 2, weighting)
    print(f"{weighting}: |merge - split^dagger| = {np.abs(m - s.conj().T).max():.1e}")

# %%
# Sliding an annihilator onto each branch
for weighting in (LITERAL, MULTINOMIAL):
    worst = max(sliding_residual(annihilate(p), j, 2, weighting, basis) for j in range(2))
    print(f"{weighting}: annihilator sliding residual {worst:.2e}")
worst = max(sliding_residual(create(p), j, 2, MULTINOMIAL, FockBasis(layout, max_particles=2), creation=True)
            for j in range(2))
print(f"multinomial: creator sliding through merge {worst:.2e}")
