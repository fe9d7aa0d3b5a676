"""
Wick contractions and the lattice Fock space
============================================

Four real scalar fields expand into ten normally ordered terms: the bare
product, six single contractions and three full pairings.  We then build the
ladder operators on a 15 x 15 lattice and check that they obey the canonical
commutation relation on states where the truncation cannot interfere.
"""

import numpy as np

from catfeyn.fock import FockBasis, FockLayout, annihilate, create, operator_matrix
from catfeyn.lattice import MOMENTUM, LatticeParams, LatticePoint
from catfeyn.opalg import OperatorString, phi, wick_expand

# %%
# Wick expansion of phi(x1) ... phi(x4)
fields = OperatorString(tuple(phi(f"x{i}") for i in range(1, 5)))
terms = wick_expand(fields)
print(f"{len(terms)} terms")
for t in terms:
    print("  ", t.text())

# %%
# Full contractions of 2k fields are counted by (2k-1)!!
for k in range(1, 5):
    s = OperatorString(tuple(phi(f"x{i}") for i in range(1, 2 * k + 1)))
    full = sum(1 for t in wick_expand(s) if not t.remainder)
    print(f"k={k}: {full} full contractions")

# %%
# Ladder operators.  omega_uv=3, omega_ir=5 gives 15 momentum modes.
params = LatticeParams(3, 5)
layout = FockLayout.real_scalar(params)
p = LatticePoint((1,), MOMENTUM, params)
print("one-particle basis:", len(FockBasis(layout, max_particles=1)), "states")

# [a(p), a^dagger(p)] = omega_ir on every state with at most one particle
a, ad = annihilate(p), create(p)
big = FockBasis(layout, max_particles=2)
# strict=False drops components pushed past the two-particle cap
A = operator_matrix(a, big, strict=False)
Ad = operator_matrix(ad, big, strict=False)
comm = A @ Ad - Ad @ A
safe = [i for i, occ in enumerate(big.occupancies) if sum(occ) <= 1]
block = comm[np.ix_(safe, safe)]
print("max |[a,a+] - omega_ir| on safe states:", np.abs(block - params.omega_ir * np.eye(len(safe))).max())
