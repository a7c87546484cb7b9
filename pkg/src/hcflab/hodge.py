"""Hodge-side operators acting on the Kähler form ``omega = (i/2) g``.

Forms are stored as coefficient arrays in the ``dz`` / ``dzbar`` basis with
the grid axes first:

``(0,1)``  ``a[k]``        coefficient of ``dzbar^k``
``(1,0)``  ``a[j]``        coefficient of ``dz^j``
``(1,1)``  ``a[j, k]``     coefficient of ``dz^j ^ dzbar^k``
``(2,1)``  ``a[i, j, k]``  coefficient of ``dz^i ^ dz^j ^ dzbar^k``, antisymmetric in ``i, j``
``(1,2)``  ``a[q, j, k]``  coefficient of ``dzbar^q ^ dz^j ^ dzbar^k``

Two routes are provided for each adjoint: the explicit coordinate formulas
in terms of ``g`` and its derivatives, and a generic ``L^2`` adjoint built
from integration by parts against ``det g``.  They are checked against each
other in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chern import ChernPackage, compute_package
from .energy import q_tensors
from .fields import MetricField
from .lattice import Lattice

I2 = 0.5j  # sqrt(-1) / 2


@dataclass(frozen=True, eq=False)
class FormField:
    """Coefficient field of a ``(p, q)`` form."""

    data: np.ndarray
    p: int
    q: int
    lattice: Lattice

    def __post_init__(self):
        expect = self.lattice.shape + (self.lattice.n,) * (self.p + self.q)
        if self.data.shape != expect:
            raise ValueError(f"coefficient shape {self.data.shape} != {expect}")

    @property
    def type(self) -> tuple[int, int]:
        return self.p, self.q

    def reality_defect(self) -> float:
        """For a (1,1) form: sup of the anti-Hermitian part of ``coeff / (i/2)``."""
        if self.type != (1, 1):
            raise ValueError("reality is only defined here for (1,1) forms")
        m = self.data / I2
        return float(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))))

    def __sub__(self, other):
        return FormField(self.data - other.data, self.p, self.q, self.lattice)

    def __add__(self, other):
        return FormField(self.data + other.data, self.p, self.q, self.lattice)

    def sup(self) -> float:
        return float(np.max(np.abs(self.data)))


def kahler_form(g: MetricField) -> FormField:
    return FormField(I2 * g.g, 1, 1, g.lattice)


# -- coordinate formulas -------------------------------------------------------

def del_star_omega(g: MetricField) -> FormField:
    """``(d* omega)_kbar = (i/2) g^{p qbar} (d_qbar g_{p kbar} - d_kbar g_{p qbar})``."""
    gi, dbg = g.inv, g.dbg
    c = np.einsum("...pq,...qpk->...k", gi, dbg) - np.einsum("...pq,...kpq->...k", gi, dbg)
    return FormField(I2 * c, 0, 1, g.lattice)


def delbar_star_omega(g: MetricField) -> FormField:
    """``(dbar* omega)_j = (i/2) g^{p qbar} (d_p g_{j qbar} - d_j g_{p qbar})``."""
    gi, dg = g.inv, g.dg
    c = np.einsum("...pq,...pjq->...j", gi, dg) - np.einsum("...pq,...jpq->...j", gi, dg)
    return FormField(I2 * c, 1, 0, g.lattice)


def del_del_star_omega(g: MetricField) -> FormField:
    """Coordinate formula for ``d d* omega`` as a (1,1) form."""
    gi, dg, dbg, H = g.inv, g.dg, g.dbg, g.ddbg  # H[j, q, p, k] = d_j d_qbar g_{p kbar}
    second = (np.einsum("...pq,...jqpk->...jk", gi, H)
              - np.einsum("...pq,...jkpq->...jk", gi, H))
    first = np.einsum("...pq,...rs,...jrq,...kps->...jk", gi, gi, dg, dbg, optimize=True)
    first = first - np.einsum("...pq,...rs,...jrq,...spk->...jk", gi, gi, dg, dbg, optimize=True)
    return FormField(I2 * (second + first), 1, 1, g.lattice)


def del_star_del_omega(g: MetricField) -> FormField:
    """Coordinate formula for ``d* d omega`` as a (1,1) form."""
    gi, dg, dbg, H = g.inv, g.dg, g.dbg, g.ddbg
    second = (np.einsum("...pq,...jqpk->...jk", gi, H)
              - np.einsum("...pq,...pqjk->...jk", gi, H))
    # (g_{p sbar, qbar} - g_{p qbar, sbar})
    a = np.einsum("...pq,...rs,...qps->...rs", gi, gi, dbg, optimize=True)
    a = a - np.einsum("...pq,...rs,...spq->...rs", gi, gi, dbg, optimize=True)
    t1 = np.einsum("...rs,...rjk->...jk", a, dg) - np.einsum("...rs,...jrk->...jk", a, dg)
    # g_{j qbar, sbar} (g_{p kbar, r} - g_{r kbar, p})
    t2 = (np.einsum("...pq,...rs,...sjq,...rpk->...jk", gi, gi, dbg, dg, optimize=True)
          - np.einsum("...pq,...rs,...sjq,...prk->...jk", gi, gi, dbg, dg, optimize=True))
    # g_{p kbar, sbar} (g_{j qbar, r} - g_{r qbar, j})
    t3 = (np.einsum("...pq,...rs,...spk,...rjq->...jk", gi, gi, dbg, dg, optimize=True)
          - np.einsum("...pq,...rs,...spk,...jrq->...jk", gi, gi, dbg, dg, optimize=True))
    return FormField(I2 * (second + t1 + t2 + t3), 1, 1, g.lattice)


def ddbar_log_det(g: MetricField) -> FormField:
    """Coordinate formula for ``(i/2) d dbar log det g``."""
    gi, dg, dbg, H = g.inv, g.dg, g.dbg, g.ddbg
    first = np.einsum("...pq,...jkpq->...jk", gi, H)
    second = np.einsum("...pr,...jsr,...sq,...kpq->...jk", gi, dg, gi, dbg, optimize=True)
    return FormField(I2 * (first - second), 1, 1, g.lattice)


def ddbar_log_det_direct(g: MetricField) -> FormField:
    """``(i/2) d dbar log det g`` by differentiating ``log det g`` on the grid."""
    return FormField(I2 * g.lattice.mixed_hessian(np.log(g.det)), 1, 1, g.lattice)


def delbar_omega(g: MetricField) -> FormField:
    """``(dbar omega)_{qbar j kbar} = (i/2)(d_qbar g_{j kbar} - d_kbar g_{j qbar})``."""
    dbg = g.dbg
    c = dbg - np.swapaxes(dbg, -3, -1)
    # c[q, j, k] = d_qbar g_{j kbar} - d_kbar g_{j qbar}
    return FormField(I2 * c, 1, 2, g.lattice)


def del_omega(g: MetricField) -> FormField:
    """``(d omega)_{i j kbar} = (i/2)(d_i g_{j kbar} - d_j g_{i kbar})``."""
    dg = g.dg
    return FormField(I2 * (dg - np.swapaxes(dg, -3, -2)), 2, 1, g.lattice)


def hook_term(g: MetricField) -> FormField:
    """``g^{p qbar} (dbar* omega)_p (dbar omega)_{qbar j kbar}``."""
    a = delbar_star_omega(g).data
    b = delbar_omega(g).data
    return FormField(np.einsum("...pq,...p,...qjk->...jk", g.inv, a, b), 1, 1, g.lattice)


def psi(g: MetricField) -> FormField:
    """``d* d omega - d d* omega - (i/2) d dbar log det g - 2i (dbar* omega -| dbar omega)``."""
    out = (del_star_del_omega(g).data - del_del_star_omega(g).data
           - ddbar_log_det(g).data - 2j * hook_term(g).data)
    return FormField(out, 1, 1, g.lattice)


def xi(g: MetricField, package: ChernPackage | None = None) -> FormField:
    """``Xi = S(., J .)`` as the (1,1) form with coefficients ``(i/2) S``."""
    pkg = package if package is not None else compute_package(g)
    return FormField(I2 * pkg.S, 1, 1, g.lattice)


def hodgedecomp_residual(g: MetricField, package: ChernPackage | None = None) -> np.ndarray:
    """``Xi - [Psi - (i/2)(2 Q4 + Q2 / 2)]`` pointwise."""
    pkg = package if package is not None else compute_package(g)
    _, q2, _, q4 = q_tensors(pkg)
    rhs = psi(g).data - I2 * (2.0 * q4 + 0.5 * q2)
    return xi(g, pkg).data - rhs


def check_hodgedecomp(g: MetricField, package: ChernPackage | None = None) -> float:
    return float(np.max(np.abs(hodgedecomp_residual(g, package))))


def hcf_form_rhs(g: MetricField, package: ChernPackage | None = None) -> FormField:
    """Form-side flow speed ``-Psi + (i/2)(Q1/2 + Q2/4 - Q3/2 + 3 Q4)``."""
    pkg = package if package is not None else compute_package(g)
    q1, q2, q3, q4 = q_tensors(pkg)
    out = -psi(g).data + I2 * (0.5 * q1 + 0.25 * q2 - 0.5 * q3 + 3.0 * q4)
    return FormField(out, 1, 1, g.lattice)


def check_hcf_form_equation(g: MetricField, package: ChernPackage | None = None) -> float:
    """Sup of the form-side speed minus ``(i/2)(-S + Q)``."""
    pkg = package if package is not None else compute_package(g)
    q1, q2, q3, q4 = q_tensors(pkg)
    Q = 0.5 * q1 - 0.25 * q2 - 0.5 * q3 + q4
    diff = hcf_form_rhs(g, pkg).data - I2 * (-pkg.S + Q)
    return float(np.max(np.abs(diff)))


def w_constant(g: MetricField, package: ChernPackage | None = None) -> complex:
    """Least-squares ``c`` with ``w = c * (dbar* omega)`` over all points."""
    pkg = package if package is not None else compute_package(g)
    a = delbar_star_omega(g).data.ravel()
    w = pkg.w.ravel()
    denom = np.vdot(a, a)
    if abs(denom) == 0.0:
        raise ZeroDivisionError("dbar* omega vanishes identically")
    return complex(np.vdot(a, w) / denom)


#: ``w = W_CONSTANT * dbar* omega`` (measured, then frozen as a regression value).
W_CONSTANT = 2j


# -- generic L2 adjoints -------------------------------------------------------

def form_inner(a: FormField, b: FormField, g: MetricField) -> np.ndarray:
    """Pointwise Hermitian inner product of two forms of the same type.

    Each holomorphic slot contracts through ``g^{i jbar}``; antisymmetric
    holomorphic pairs of (2,1) forms carry the usual ``1/2``.
    """
    if a.type != b.type:
        raise ValueError("form types differ")
    gi, x, y = g.inv, a.data, np.conj(b.data)
    if a.type == (0, 1):
        return np.einsum("...lm,...m,...l->...", gi, x, y)
    if a.type == (1, 0):
        return np.einsum("...ml,...m,...l->...", gi, x, y)
    if a.type == (1, 1):
        return np.einsum("...jb,...ck,...jk,...bc->...", gi, gi, x, y, optimize=True)
    if a.type == (2, 1):
        return 0.5 * np.einsum("...ia,...jb,...ck,...ijk,...abc->...", gi, gi, gi, x, y,
                               optimize=True)
    raise NotImplementedError(f"inner product for type {a.type}")


def l2_inner(a: FormField, b: FormField, g: MetricField) -> complex:
    return g.lattice.integrate(form_inner(a, b, g), g.det)


def del_form(a: FormField) -> FormField:
    """``d`` on (0,1) and (1,1) forms."""
    lat = a.lattice
    d = lat.grad(a.data)[0]
    if a.type == (0, 1):
        return FormField(d, 1, 1, lat)
    if a.type == (1, 1):
        return FormField(d - np.swapaxes(d, -3, -2), 2, 1, lat)
    raise NotImplementedError(f"d on type {a.type}")


def del_star(a: FormField, g: MetricField) -> FormField:
    """Formal ``L^2(det g)`` adjoint of ``d`` on (1,1) and (2,1) forms."""
    lat, gi, G = g.lattice, g.inv, g.det
    if a.type == (1, 1):
        # X^l = g^{j ibar} g^{l kbar} a_{j kbar} G, differentiated in ibar
        X = np.einsum("...ji,...lk,...jk->...il", gi, gi, a.data, optimize=True) * G[..., None, None]
        div = np.einsum("...iil->...l", lat.grad(X)[1])
        out = -np.einsum("...lm,...l->...m", g.g, div / G[..., None])
        return FormField(out, 0, 1, lat)
    if a.type == (2, 1):
        X = np.einsum("...ia,...jb,...ck,...ijk->...abc", gi, gi, gi, a.data,
                      optimize=True) * G[..., None, None, None]
        div = np.einsum("...aabc->...bc", lat.grad(X)[1])
        out = -np.einsum("...pb,...cq,...bc->...pq", g.g, g.g, div / G[..., None, None],
                         optimize=True)
        return FormField(out, 1, 1, lat)
    raise NotImplementedError(f"d* on type {a.type}")
