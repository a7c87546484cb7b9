"""
Curvature and torsion of a perturbed flat metric
================================================

Build a band-limited Hermitian perturbation of the flat metric on the
complex 2-torus, compute its Chern connection data and look at the
structural identities the torsion and curvature satisfy.
"""

import numpy as np

from hcflab import chern, energy, hodge
from hcflab.lattice import Lattice
from hcflab.metrics import hermitian_perturbation, kahler_potential

lat = Lattice(n=2, N=16)
g = hermitian_perturbation(lat, seed=1, amplitude=0.05, bandwidth=1)
pkg = chern.compute_package(g)

print("sup |T|     ", np.max(chern.torsion_norm(pkg)))
print("sup |Omega| ", np.max(chern.curvature_norm(pkg)))
print("total volume", lat.integrate(g.det))

# %%
# The identities hold to roundoff because every derivative is spectral and
# the metric is band-limited.

print("cyclic torsion identity", chern.check_torsion_cyclic(pkg))
print("Bianchi (first, second)", chern.check_bianchi(g))
print("P - S relation         ", chern.check_ps_relation(pkg))

# %%
# The quadratic torsion tensors: Q1 and Q3 are positive semidefinite and the
# trace of the fixed combination Q is a sum of squares.

qp = energy.compute_q(g, pkg)
print("min eigenvalues of Q1, Q3", energy.min_q_eigenvalues(g, qp))
print("trace identity residual  ", energy.trace_identity_residual(g, qp))

# %%
# A metric from a Kähler potential has no torsion, and its form-side speed
# matches the metric-side one.

gk = kahler_potential(lat, seed=3, amplitude=0.05, bandwidth=1)
print("Kähler:", chern.is_kahler(gk), hodge.check_hcf_form_equation(gk))
