"""Finite-difference oracles for the variational formulas and evolution equations.

Every check evaluates a quantity along the line ``g + a h`` (or along the
flow) and compares a central difference against the closed-form derivative
assembled from the Chern package.  Differences use the spectral or fd4
operators of the lattice, so they test the algebra of the formulas, not the
discretisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chern import compute_package, laplacian
from .energy import Q_COEFFS, combine_q, functional, q_tensors
from .fields import (MetricField, TensorField, covariant_derivative_array, hermitian_part,
                     inner, norm2, pair11, trace11)
from .flow import FlowSpec, Integrator, _initial_G
from .kernels import to_grid_first
from .lattice import ANTI, HOLO, Lattice
from .metrics import random_hermitian, random_scalar, random_tensor

QUANTITIES = ("connection", "curvature", "scalar_s", "torsion", "T_norm", "w_norm",
              "integral_s", "integral_Tnorm", "integral_wnorm", "functional_F")
POINTWISE = QUANTITIES[:6]
IBP_LEMMAS = ("ibp2", "ibp3", "ibp4")
EVOLUTIONS = ("omega", "torsion")
LAPLACIAN_ORDERS = ("printed", "swapped")


# -- probes -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VariationProbe:
    """A metric, a Hermitian direction and a difference step.

    Parameters
    ----------
    g : MetricField
    h : ndarray
        Hermitian (1,1) field, grid-first like ``g.g``.
    da : float
        Step of the central difference.
    richardson : bool
        Combine steps ``da`` and ``da/2`` to cancel the ``da**2`` term.
    """

    g: MetricField
    h: np.ndarray
    da: float = 1e-4
    richardson: bool = True

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.shape != self.g.g.shape:
            raise ValueError("direction and metric shapes differ")
        if np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))) > 1e-12 * max(1.0, np.max(np.abs(h))):
            raise ValueError("direction is not Hermitian")
        if not self.da > 0.0:
            raise ValueError("da must be positive")
        object.__setattr__(self, "h", h)
        for a in (-2.0 * self.da, 2.0 * self.da):
            if not np.linalg.eigvalsh(hermitian_part(self.g.g + a * h)).min() > 0.0:
                raise ValueError("g + a h loses positivity inside the probe window")

    def at(self, a: float) -> MetricField:
        return MetricField(self.g.g + a * self.h, self.g.lattice)

    @classmethod
    def random(cls, g: MetricField, seed: int, bandwidth: int = 1, **kw) -> "VariationProbe":
        """Probe along a seeded band-limited direction with unit sup norm."""
        return cls(g, random_hermitian(g.lattice, seed, bandwidth), **kw)


def central_difference(f, da: float, richardson: bool = True):
    """Derivative at 0 of ``f(a)`` (scalar or array valued)."""
    def d(step):
        return (f(step) - f(-step)) / (2.0 * step)
    if not richardson:
        return d(da)
    return (4.0 * d(0.5 * da) - d(da)) / 3.0


def _rel(err: float, scale: float) -> float:
    return err / scale if scale > 0.0 else err


# -- quantities and their derivative formulas ------------------------------------

def _value(quantity: str, g: MetricField):
    lat = g.lattice
    if quantity == "connection":
        return g.christoffel
    if quantity == "functional_F":
        return functional(g)
    pkg = compute_package(g)
    if quantity == "curvature":
        return pkg.omega_up
    if quantity == "scalar_s":
        return pkg.s
    if quantity == "torsion":
        return pkg.torsion
    if quantity == "T_norm":
        return norm2(pkg.field("torsion"), g)
    if quantity == "w_norm":
        return norm2(pkg.field("w"), g)
    if quantity == "integral_s":
        return lat.integrate(pkg.s, g.det)
    if quantity == "integral_Tnorm":
        return lat.integrate(norm2(pkg.field("torsion"), g), g.det)
    if quantity == "integral_wnorm":
        return lat.integrate(norm2(pkg.field("w"), g), g.det)
    raise ValueError(f"unknown quantity {quantity!r}")


@dataclass
class _Terms:
    """Tensors shared by the derivative formulas at one metric."""

    g: MetricField
    h: np.ndarray
    pkg: object = field(init=False)

    def __post_init__(self):
        g, h = self.g, self.h
        self.pkg = compute_package(g)
        self.gi = g.inv
        self.nh = covariant_derivative_array(h, "ha", g, HOLO)      # [i, j, k] = nabla_i h_{j kbar}
        self.trh = np.real(trace11(h, g))
        # (div T)_{i jbar} = g^{k lbar} nabla_lbar T_{k i jbar}
        self.divT = np.einsum("...kl,...lkij->...ij", self.gi, self.pkg.nablabar_torsion)
        # (nabla w)_{i jbar} = nabla_i wbar_jbar
        self.nw = covariant_derivative_array(self.pkg.w_bar, "a", g, HOLO)
        self.divw = np.real(trace11(self.nw, g))
        self.q = q_tensors(self.pkg)

    def pair(self, x) -> np.ndarray:
        return np.real(pair11(self.h, x, self.g))

    def integrate(self, f) -> float:
        return self.g.lattice.integrate(np.real(f), self.g.det)


def _formula(quantity: str, g: MetricField, h: np.ndarray):
    t = _Terms(g, h)
    pkg, gi, nh = t.pkg, t.gi, t.nh
    q1, q2, q3, q4 = t.q
    lat = g.lattice
    if quantity == "connection":
        return np.einsum("...lm,...ikm->...ikl", gi, nh)
    if quantity == "curvature":
        nnh = covariant_derivative_array(nh, "hha", g, ANTI)    # [j, i, k, m]
        return -np.einsum("...lm,...jikm->...ijkl", gi, nnh)
    if quantity == "scalar_s":
        lap = np.real(np.einsum("...ij,...ij->...", gi, lat.mixed_hessian(t.trh)))
        return -lap - t.pair(pkg.S + t.divT - t.nw)
    if quantity == "torsion":
        quad = np.einsum("...ijm,...mk->...ijk", pkg.torsion_up, h)
        return nh - np.swapaxes(nh, -3, -2) + quad
    if quantity == "T_norm":
        cross = np.real(inner(TensorField(nh, "hha", lat), pkg.field("torsion"), g))
        return t.pair(-2.0 * q1 + q2) + 4.0 * cross
    if quantity == "w_norm":
        divh = np.einsum("...jk,...jik->...i", gi, nh)
        v = lat.grad(t.trh.astype(complex))[0] - divh
        cross = np.real(inner(TensorField(v, "h", lat), pkg.field("w"), g))
        return -t.pair(q3) + 2.0 * cross
    tn = norm2(pkg.field("torsion"), g)
    wn = norm2(pkg.field("w"), g)
    if quantity == "integral_s":
        return t.integrate(t.pair(-pkg.S - t.divT + t.nw) + t.trh * (pkg.s - t.divw - wn))
    if quantity == "integral_Tnorm":
        return t.integrate(t.pair(-2.0 * q1 + q2 - 4.0 * q4 - 4.0 * t.divT) + t.trh * tn)
    if quantity == "integral_wnorm":
        return t.integrate(t.pair(q3 + 2.0 * t.nw) + t.trh * (-2.0 * t.divw - wn))
    if quantity == "functional_F":
        n = g.n
        K = pkg.S - combine_q(q1, q2, q3, q4, Q_COEFFS)
        k = np.real(trace11(K, g))
        vol = g.volume
        kbar = lat.integrate(k, g.det) / vol
        integrand = t.pair(-K) + (k - (n - 1) / n * kbar) * t.trh
        return vol ** ((1 - n) / n) * t.integrate(integrand)
    raise ValueError(f"unknown quantity {quantity!r}")


def check_variation(quantity: str, probe: VariationProbe):
    """Compare the derivative of ``quantity`` along ``probe`` with its formula.

    Returns
    -------
    fd_value, formula_value, rel_err
        Pointwise quantities are compared in sup norm relative to the sup of
        the formula, integrals as scalars.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    fd = central_difference(lambda a: _value(quantity, probe.at(a)), probe.da, probe.richardson)
    formula = _formula(quantity, probe.g, probe.h)
    if quantity in POINTWISE:
        err = float(np.max(np.abs(fd - formula)))
        scale = float(np.max(np.abs(formula)))
    else:
        err, scale = abs(fd - formula), abs(formula)
    return fd, formula, _rel(err, scale)


# -- integration by parts ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class IbpFields:
    """Test fields for the integration-by-parts checks.

    ``phi`` is a complex function, ``alpha[j] = alpha_jbar``, ``beta[l] = beta_l``
    and ``h`` a Hermitian (1,1) field, all grid-first.
    """

    phi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    h: np.ndarray

    @classmethod
    def random(cls, lattice: Lattice, seed: int, bandwidth: int = 2) -> "IbpFields":
        ss = np.random.SeedSequence(seed).spawn(4)
        s = [int(x.generate_state(1)[0]) for x in ss]
        phi = random_scalar(lattice, s[0], bandwidth, real=False)
        return cls(phi, random_tensor(lattice, s[1], 1, bandwidth),
                   random_tensor(lattice, s[2], 1, bandwidth),
                   random_hermitian(lattice, s[3], bandwidth))


def ibp_sides(lemma: str, g: MetricField, f: IbpFields) -> tuple[complex, complex, float]:
    """``(lhs, rhs, scale)`` of one integration-by-parts identity.

    ``scale`` is the integral of ``|lhs integrand|``, used to normalise the
    residual so identities with vanishing sides stay meaningful.
    """
    lat = g.lattice
    gi = g.inv
    pkg = compute_package(g)
    w = pkg.w
    if lemma == "ibp2":
        dphi = lat.grad(f.phi)[0]
        dalpha = lat.grad(f.alpha)[0]                       # [i, j] = d_i alpha_jbar
        left = np.einsum("...ij,...i,...j->...", gi, dphi, f.alpha)
        div = np.einsum("...ij,...ij->...", gi, dalpha)
        walpha = np.einsum("...ij,...i,...j->...", gi, w, f.alpha)
        right = f.phi * (-div - walpha)
    elif lemma == "ibp3":
        left = np.einsum("...ij,...ij->...", gi, lat.mixed_hessian(f.phi))
        dwbar = lat.grad(np.conj(w))[0]
        divw = np.einsum("...ij,...ij->...", gi, dwbar)
        right = f.phi * (divw + norm2(pkg.field("w"), g))
    elif lemma == "ibp4":
        nbh = covariant_derivative_array(f.h, "ha", g, ANTI)   # [k, i, j] = nabla_kbar h_{i jbar}
        left = np.einsum("...lj,...ik,...kij,...l->...", gi, gi, nbh, f.beta)
        dbb = lat.grad(f.beta)[1]                            # [k, l] = d_kbar beta_l
        y = np.swapaxes(dbb, -1, -2) + np.einsum("...k,...l->...lk", np.conj(w), f.beta)
        right = -pair11(f.h, y, g)
    else:
        raise ValueError(f"unknown lemma {lemma!r}")
    lhs = lat.integrate(left.astype(complex), g.det)
    rhs = lat.integrate(right.astype(complex), g.det)
    scale = lat.integrate(np.abs(left), g.det)
    return lhs, rhs, scale


def check_ibp(lemma: str, g: MetricField, test_fields: IbpFields) -> float:
    """Relative residual of an integration-by-parts identity."""
    if lemma not in IBP_LEMMAS:
        raise ValueError(f"unknown lemma {lemma!r}")
    lhs, rhs, scale = ibp_sides(lemma, g, test_fields)
    return _rel(abs(lhs - rhs), scale)


# -- evolution equations ---------------------------------------------------

def _curv_bar(oup):
    """``Omega_{a bbar cbar}^{dbar}`` stored as ``[a, b, c, d]``."""
    return -np.conj(np.swapaxes(oup, -4, -3))


def omega_evolution_rhs(g: MetricField, q_coeffs=Q_COEFFS) -> np.ndarray:
    """Time derivative of ``Omega_{i jbar k lbar}`` under HCF, assembled term by term."""
    pkg = compute_package(g)
    gi, om, oup, tup = g.inv, pkg.omega, pkg.omega_up, pkg.torsion_up
    Q = combine_q(*q_tensors(pkg), q_coeffs)
    ob = _curv_bar(oup)
    out = laplacian(om, "haha", g)
    out = out + np.einsum("...mn,...njp,...mipkl->...ijkl", gi, np.conj(tup), pkg.nabla_omega,
                          optimize=True)
    out = out + np.einsum("...mn,...mip,...jpnkl->...ijkl", gi, tup, pkg.nablabar_omega,
                          optimize=True)
    out = out + np.einsum("...mn,...ijmp,...pnkl->...ijkl", gi, oup, om, optimize=True)
    out = out + np.einsum("...mn,...mnjp,...ipkl->...ijkl", gi, ob, om, optimize=True)
    out = out + np.einsum("...mn,...mjkp,...inpl->...ijkl", gi, oup, om, optimize=True)
    out = out + np.einsum("...mn,...mjlp,...inkp->...ijkl", gi, ob, om, optimize=True)
    out = out - np.einsum("...ijkm,...ml->...ijkl", oup, pkg.S - Q)
    nQ = covariant_derivative_array(Q, "ha", g, HOLO)
    nnQ = covariant_derivative_array(nQ, "hha", g, ANTI)   # [j, i, k, l]
    return out - np.swapaxes(nnQ, -4, -3)


def torsion_evolution_rhs(g: MetricField, q_coeffs=Q_COEFFS,
                          laplacian_order: str = "printed") -> np.ndarray:
    """Time derivative of ``T_{ij kbar}`` under HCF, assembled term by term.

    Parameters
    ----------
    laplacian_order : {"printed", "swapped"}
        ``"printed"`` uses ``Delta = g^{m nbar} nabla_m nabla_nbar`` as in the
        curvature equation; ``"swapped"`` uses ``g^{m nbar} nabla_nbar nabla_m``,
        the order in which the Laplacian actually arises when the remaining
        terms are derived.
    """
    if laplacian_order not in LAPLACIAN_ORDERS:
        raise ValueError(f"unknown laplacian order {laplacian_order!r}")
    pkg = compute_package(g)
    gi, om, oup, tup, T = g.inv, pkg.omega, pkg.omega_up, pkg.torsion_up, pkg.torsion
    Q = combine_q(*q_tensors(pkg), q_coeffs)
    nbT = pkg.nablabar_torsion                                       # [n, i, j, k]
    nbTup = covariant_derivative_array(tup, "hhH", g, ANTI)          # [n, i, j, p]
    e = lambda s, *ops: np.einsum(s, gi, *ops, optimize=True)  # noqa: E731
    if laplacian_order == "printed":
        out = laplacian(T, "hha", g)
    else:
        nnT = covariant_derivative_array(pkg.nabla_torsion, "hhha", g, ANTI)  # [n, m, i, j, k]
        out = np.einsum("...mn,...nmijk->...ijk", gi, nnT)
    out = out + e("...mn,...jip,...nmpk->...ijk", tup, nbT)
    out = out + e("...mn,...nmjp,...ipk->...ijk", nbTup, T)
    out = out + e("...mn,...mjp,...nipk->...ijk", tup, nbT)
    out = out + e("...mn,...nimp,...jpk->...ijk", nbTup, T)
    out = out + e("...mn,...imp,...njpk->...ijk", tup, nbT)
    # Omega_{nbar j m}^p = -Omega_{j nbar m}^p; Omega_{nbar j kbar}^{pbar} = conj(Omega_{n jbar k}^p)
    out = out - e("...mn,...jnmp,...ipk->...ijk", oup, T)
    out = out + e("...mn,...njkp,...imp->...ijk", np.conj(oup), T)
    out = out + e("...mn,...inmp,...jpk->...ijk", oup, T)
    out = out - e("...mn,...nikp,...jmp->...ijk", np.conj(oup), T)
    out = out - e("...mn,...pnmk,...jip->...ijk", om, tup)
    out = out - np.einsum("...ijp,...pk->...ijk", tup, pkg.S - Q)
    nQ = covariant_derivative_array(Q, "ha", g, HOLO)
    return out + nQ - np.swapaxes(nQ, -3, -2)


def _evolved_pair(g0: MetricField, dt: float, substeps: int = 1):
    """Metrics at ``+dt`` and ``-dt`` along HCF, each by ``substeps`` RK4 steps."""
    integ = Integrator(g0.lattice, FlowSpec(variant="HCF"))
    out = []
    for sign in (1.0, -1.0):
        G = _initial_G(g0)
        h = dt / substeps
        for _ in range(substeps):
            G = integ.rk4(G, h, integ.speed(integ.evaluate(G), sign), sign)
        out.append(MetricField(hermitian_part(to_grid_first(G, 2)), g0.lattice))
    return out


def evolution_residual(which: str, g0: MetricField, dt: float,
                       laplacian_order: str = "printed"):
    """``(lhs, rhs, rel_err)`` for one time step ``dt``."""
    if which == "omega":
        quantity, rhs = (lambda p: p.omega), omega_evolution_rhs(g0)
    elif which == "torsion":
        quantity = lambda p: p.torsion  # noqa: E731
        rhs = torsion_evolution_rhs(g0, laplacian_order=laplacian_order)
    else:
        raise ValueError(f"unknown evolution {which!r}")
    gp, gm = _evolved_pair(g0, dt)
    lhs = (quantity(compute_package(gp)) - quantity(compute_package(gm))) / (2.0 * dt)
    err = float(np.max(np.abs(lhs - rhs)))
    return lhs, rhs, _rel(err, float(np.max(np.abs(rhs))))


def check_evolution(which: str, g0: MetricField, dt: float = 1e-4,
                    laplacian_order: str = "printed") -> float:
    """Relative sup-norm residual of a time-centred difference against the formula."""
    if which not in EVOLUTIONS:
        raise ValueError(f"unknown evolution {which!r}")
    return evolution_residual(which, g0, dt, laplacian_order)[2]


def evolution_order(which: str, g0: MetricField, dts=(2e-3, 1e-3, 5e-4),
                    laplacian_order: str = "printed") -> tuple[list, float]:
    """Residuals at decreasing ``dt`` and the observed convergence order.

    The order is the least-squares slope of ``log(err)`` against ``log(dt)``.
    The steps stay well above the level where the spatial aliasing floor
    (about ``1e-6`` relative at ``N = 8``) would flatten the slope.
    """
    errs = [evolution_residual(which, g0, dt, laplacian_order)[2] for dt in dts]
    if min(errs) <= 0.0:
        return errs, math.nan
    x = np.log(np.asarray(dts))
    y = np.log(np.asarray(errs))
    slope = float(np.polyfit(x, y, 1)[0])
    return errs, slope


def richardson_gain(quantity: str, probe: VariationProbe) -> float:
    """Error of the plain central difference divided by the Richardson error."""
    plain = VariationProbe(probe.g, probe.h, probe.da, richardson=False)
    e_plain = check_variation(quantity, plain)[2]
    e_rich = check_variation(quantity, probe)[2]
    return e_plain / e_rich if e_rich > 0.0 else math.inf
