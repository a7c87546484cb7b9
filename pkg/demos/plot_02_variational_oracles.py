"""
Checking first variations by finite differences
===============================================

Every variational formula in :mod:`hcflab.verify` is compared with a
Richardson-extrapolated central difference along a random Hermitian
direction ``h``.
"""

from hcflab import verify
from hcflab.lattice import Lattice
from hcflab.metrics import hermitian_perturbation

g = hermitian_perturbation(Lattice(2, 16), seed=1, amplitude=0.05)
probe = verify.VariationProbe.random(g, seed=2)

for q in verify.QUANTITIES:
    _, _, rel = verify.check_variation(q, probe)
    print(f"{q:16s} rel_err = {rel:.2e}")

# %%
# Without extrapolation the error is dominated by the ``da**2`` term at a
# coarse step.

coarse = verify.VariationProbe.random(g, seed=2, da=1e-2)
print("Richardson gain on scalar_s:", verify.richardson_gain("scalar_s", coarse))

# %%
# Integration-by-parts identities, normalised by the integral of the
# absolute integrand.

fields = verify.IbpFields.random(g.lattice, seed=1)
for lemma in verify.IBP_LEMMAS:
    print(lemma, verify.check_ibp(lemma, g, fields))
