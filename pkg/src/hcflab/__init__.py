"""Hermitian curvature flow on flat complex tori.

Periodic grids (:mod:`~hcflab.lattice`), Hermitian tensor fields
(:mod:`~hcflab.fields`), Chern connection data (:mod:`~hcflab.chern`), the
torsion-quadratic tensors and functional (:mod:`~hcflab.energy`), Kähler-form
operators (:mod:`~hcflab.hodge`), the flow integrator (:mod:`~hcflab.flow`),
finite-difference oracles (:mod:`~hcflab.verify`) and a command line
(``python -m hcflab``).
"""

__version__ = "0.1.0"
