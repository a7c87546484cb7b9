"""Chern connection, torsion, curvature and the structural identities they obey."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fields import (MetricField, TensorField, covariant_derivative_array,
                     SignatureError)
from .lattice import ANTI, HOLO


@dataclass(frozen=True, eq=False)
class ChernPackage:
    """Everything derived from one metric in a single pass.

    Array conventions (component axes after the grid axes):

    ``gamma[i, j, k]``      Gamma_{ij}^k
    ``torsion_up[i, j, k]`` T_{ij}^k
    ``torsion[i, j, k]``    T_{ij kbar}
    ``w[i]``                w_i = T_{ij}^j
    ``omega_up[i, j, k, l]``  Omega_{i jbar k}^l = -d_jbar Gamma_{ik}^l
    ``omega[i, j, k, l]``   Omega_{i jbar k lbar}
    ``S``, ``P``            first / second pair traces of ``omega``
    ``s``                   scalar Chern curvature
    """

    metric: MetricField
    gamma: np.ndarray
    torsion_up: np.ndarray
    torsion: np.ndarray
    w: np.ndarray
    omega_up: np.ndarray
    omega: np.ndarray
    S: np.ndarray
    P: np.ndarray
    s: np.ndarray

    @property
    def lattice(self):
        return self.metric.lattice

    @cached_property
    def torsion_bar(self) -> np.ndarray:
        """``T_{ibar jbar k}`` stored as ``[i, j, k]``."""
        return np.conj(self.torsion)

    @cached_property
    def w_bar(self) -> np.ndarray:
        return np.conj(self.w)

    @cached_property
    def S_closed_form(self) -> np.ndarray:
        return scalc_S(self.metric)

    def field(self, name: str) -> TensorField:
        sigs = {"torsion": "hha", "torsion_up": "hhH", "w": "h", "omega": "haha",
                "omega_up": "hahH", "S": "ha", "P": "ha", "gamma": "hhH"}
        return TensorField(getattr(self, name), sigs[name], self.lattice)

    @cached_property
    def nabla_torsion(self) -> np.ndarray:
        """``[m, i, j, k] = nabla_m T_{ij kbar}``."""
        return covariant_derivative_array(self.torsion, "hha", self.metric, HOLO)

    @cached_property
    def nablabar_torsion(self) -> np.ndarray:
        """``[m, i, j, k] = nabla_mbar T_{ij kbar}``."""
        return covariant_derivative_array(self.torsion, "hha", self.metric, ANTI)

    @cached_property
    def nabla_omega(self) -> np.ndarray:
        """``[m, i, j, k, l] = nabla_m Omega_{i jbar k lbar}``."""
        return covariant_derivative_array(self.omega, "haha", self.metric, HOLO)

    @cached_property
    def nablabar_omega(self) -> np.ndarray:
        return covariant_derivative_array(self.omega, "haha", self.metric, ANTI)


def scalc_S(g: MetricField) -> np.ndarray:
    """Closed-form ``S_{j kbar}`` built only from derivatives of ``g``.

    ``S = -g^{l mbar} g_{j kbar, l mbar} + g^{l mbar} g^{p qbar} g_{p kbar, mbar} g_{j qbar, l}``
    """
    gi = g.inv
    first = -np.einsum("...lm,...lmjk->...jk", gi, g.ddbg)
    second = np.einsum("...lm,...pq,...mpk,...ljq->...jk", gi, gi, g.dbg, g.dg, optimize=True)
    return first + second


def compute_package(g: MetricField) -> ChernPackage:
    """Compute the Chern package of ``g``.

    Curvature is assembled as ``Omega_{i jbar k}^l = -d_jbar Gamma_{ik}^l`` and
    lowered with ``g``; the closed form of ``S`` is kept as a separate path
    (:func:`scalc_S`) for cross-checking.
    """
    lat = g.lattice
    if not np.all(np.abs(np.linalg.det(g.g)) > 0):
        raise np.linalg.LinAlgError("metric is singular at some grid point")
    gam = g.christoffel
    t_up = gam - np.swapaxes(gam, -3, -2)
    t_low = g.dg - np.swapaxes(g.dg, -3, -2)
    w = np.einsum("...ijj->...i", t_up)
    dbgam = lat.grad(gam)[1]  # [j, i, k, l] = d_jbar Gamma_{ik}^l
    omega_up = -np.moveaxis(dbgam, lat.dim, lat.dim + 1)
    omega = np.einsum("...ijkm,...ml->...ijkl", omega_up, g.g)
    S = np.einsum("...kl,...klij->...ij", g.inv, omega)
    P = np.einsum("...kl,...ijkl->...ij", g.inv, omega)
    s = np.real(np.einsum("...ij,...ij->...", g.inv, S))
    return ChernPackage(g, gam, t_up, t_low, w, omega_up, omega, S, P, s)


# -- norms used by the flow diagnostics -----------------------------------------

def _norm2_lower(arr: np.ndarray, sig: str, g: MetricField) -> np.ndarray:
    from .fields import norm2
    return norm2(TensorField(arr, sig, g.lattice), g)


def curvature_norm(pkg: ChernPackage) -> np.ndarray:
    """Pointwise ``|Omega|`` (full metric contraction)."""
    return np.sqrt(np.maximum(_norm2_lower(pkg.omega, "haha", pkg.metric), 0.0))


def torsion_norm(pkg: ChernPackage) -> np.ndarray:
    return np.sqrt(np.maximum(_norm2_lower(pkg.torsion, "hha", pkg.metric), 0.0))


def nabla_torsion_norm(pkg: ChernPackage) -> np.ndarray:
    """``|nabla T|`` including both holomorphic and antiholomorphic directions."""
    g = pkg.metric
    a = _norm2_lower(pkg.nabla_torsion, "hhha", g)
    b = _norm2_lower(pkg.nablabar_torsion, "ahha", g)
    return np.sqrt(np.maximum(a + b, 0.0))


def nabla_omega_norm(pkg: ChernPackage) -> np.ndarray:
    g = pkg.metric
    a = _norm2_lower(pkg.nabla_omega, "hhaha", g)
    b = _norm2_lower(pkg.nablabar_omega, "ahaha", g)
    return np.sqrt(np.maximum(a + b, 0.0))


# -- Laplacian ---------------------------------------------------------------

def chern_laplacian(t: TensorField, g: MetricField) -> TensorField:
    """Chern Laplacian ``g^{m nbar} nabla_m nabla_nbar`` of a tensor field."""
    if t.lattice != g.lattice:
        raise SignatureError("field and metric live on different lattices")
    return TensorField(laplacian(t.data, t.sig, g), t.sig, t.lattice)


def laplacian(t: np.ndarray, sig: str, g: MetricField) -> np.ndarray:
    dbar = covariant_derivative_array(t, sig, g, ANTI)
    ddbar = covariant_derivative_array(dbar, "a" + sig, g, HOLO)
    letters = "abcdefgh"[: len(sig)]
    return np.einsum(f"...mn,...mn{letters}->...{letters}", g.inv, ddbar)


# -- structural identities --------------------------------------------------

def _package(g) -> ChernPackage:
    return g if isinstance(g, ChernPackage) else compute_package(g)


def _cyclic3(x: np.ndarray, tail: str) -> np.ndarray:
    """``x[a,b,c,...] + x[b,c,a,...] + x[c,a,b,...]`` over the first three slots."""
    return (x + np.einsum(f"...bca{tail}->...abc{tail}", x)
            + np.einsum(f"...cab{tail}->...abc{tail}", x))


def torsion_cyclic_residual(g) -> np.ndarray:
    """Pointwise residual of the cyclic identity for ``nabla T``.

    ``nabla_i T_{jk lbar} + cyc(ijk) = T_{ij}^p T_{kp lbar} + cyc(ijk)``
    """
    pkg = _package(g)
    lhs = _cyclic3(pkg.nabla_torsion, "d")
    quad = np.einsum("...ijp,...kpl->...ijkl", pkg.torsion_up, pkg.torsion)
    # quad[i,j,k] = T_{ij}^p T_{kp}; cyclic sum of (i,j,k)
    rhs = _cyclic3(quad, "d")
    return lhs - rhs


def check_torsion_cyclic(g) -> float:
    return float(np.max(np.abs(torsion_cyclic_residual(g))))


def ps_relation_rhs(g) -> np.ndarray:
    """``g^{k lbar} (nabla_lbar T_{k i jbar} + nabla_i T_{lbar jbar k})``."""
    pkg = _package(g)
    gi = pkg.metric.inv
    term1 = np.einsum("...kl,...lkij->...ij", gi, pkg.nablabar_torsion)
    nt_bar = covariant_derivative_array(pkg.torsion_bar, "aah", pkg.metric, HOLO)
    term2 = np.einsum("...kl,...iljk->...ij", gi, nt_bar)
    return term1 + term2


def check_ps_relation(g) -> float:
    pkg = _package(g)
    return float(np.max(np.abs(pkg.P - pkg.S - ps_relation_rhs(pkg))))


def _full_blocks(hol: np.ndarray, anti: np.ndarray, n: int, rank: int, kind: str) -> np.ndarray:
    """Embed n-index Chern data into the complexified 2n-index frame.

    ``kind="connection"`` places ``hol`` on the all-holomorphic block and
    ``anti`` on the all-antiholomorphic block.  ``kind="curvature"`` takes
    ``hol = Omega_{i jbar k}^l`` and ``anti = conj(Omega_{j ibar k}^l)``
    (already transposed) and fills the four nonzero curvature blocks.
    """
    lead = hol.shape[: hol.ndim - rank]
    out = np.zeros(lead + (2 * n,) * rank, dtype=complex)
    H, A = slice(0, n), slice(n, 2 * n)
    e = (Ellipsis,)
    if kind == "connection":
        out[e + (H,) * rank] = hol
        out[e + (A,) * rank] = anti
    else:
        out[e + (H, A, H, H)] = hol
        out[e + (A, H, H, H)] = -np.swapaxes(hol, -4, -3)
        out[e + (H, A, A, A)] = -anti
        out[e + (A, H, A, A)] = np.swapaxes(anti, -4, -3)
    return out


def _flat_points(a: np.ndarray, dim: int) -> np.ndarray:
    return a.reshape((-1,) + a.shape[dim:])


def _bmm(spec: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batched two-operand contraction ``"p..,p..->p.."`` routed through matmul."""
    ins, out = spec.split("->")
    sx, sy = ins.split(",")
    summed = [c for c in sx[1:] if c in sy and c not in out]
    fx = [c for c in sx[1:] if c not in summed]
    fy = [c for c in sy[1:] if c not in summed]
    dims = dict(zip(sx, x.shape)) | dict(zip(sy, y.shape))
    xt = np.transpose(x, [0] + [sx.index(c) for c in fx + summed])
    yt = np.transpose(y, [0] + [sy.index(c) for c in summed + fy])
    size = lambda cs: int(np.prod([dims[c] for c in cs], dtype=int))
    prod = np.matmul(xt.reshape(x.shape[0], size(fx), size(summed)),
                     yt.reshape(y.shape[0], size(summed), size(fy)))
    prod = prod.reshape((x.shape[0],) + tuple(dims[c] for c in fx + fy))
    order = "p" + "".join(fx + fy)
    return np.transpose(prod, [order.index(c) for c in out])


def bianchi_residuals(g, chunk: int = 2048) -> tuple[float, float]:
    """Sup-norm residuals of the first and second Bianchi identities.

    Evaluated in the complexified coordinate frame ``(d_1..d_n, d_1bar..d_nbar)``
    for the Chern connection with torsion:

    ``sum_cyc R(X,Y)Z = sum_cyc [T(T(X,Y),Z) + (nabla_X T)(Y,Z)]``
    ``sum_cyc [(nabla_X R)(Y,Z) + R(T(X,Y),Z)] = 0``

    Only the ``(1,1)`` curvature blocks are populated from the package, so a
    wrong curvature, torsion or connection shows up as a nonzero residual.
    """
    pkg = _package(g)
    lat = pkg.lattice
    n, dim = lat.n, lat.dim
    d_tup, db_tup = lat.grad(pkg.torsion_up)
    d_om, db_om = lat.grad(pkg.omega_up)
    om_conj_t = np.conj(np.swapaxes(pkg.omega_up, dim, dim + 1))  # conj(Omega_{j ibar k}^l) at [i,j,k,l]
    # derivatives of the conjugate blocks: d_a conj(X) = conj(d_abar X)
    d_om_conj_t = np.conj(np.swapaxes(db_om, dim + 1, dim + 2))
    db_om_conj_t = np.conj(np.swapaxes(d_om, dim + 1, dim + 2))
    flat = {k: _flat_points(v, dim) for k, v in {
        "gam": pkg.gamma, "tup": pkg.torsion_up,
        "d_tup": d_tup, "db_tup": db_tup,
        "om": pkg.omega_up, "omc": om_conj_t,
        "d_om": d_om, "db_om": db_om, "d_omc": d_om_conj_t, "db_omc": db_om_conj_t,
    }.items()}
    npts = lat.size
    first_max = 0.0
    second_max = 0.0
    for start in range(0, npts, chunk):
        sl = slice(start, min(npts, start + chunk))
        c = {k: v[sl] for k, v in flat.items()}
        gam = _full_blocks(c["gam"], np.conj(c["gam"]), n, 3, "connection")
        tor = _full_blocks(c["tup"], np.conj(c["tup"]), n, 3, "connection")
        # dT[A, B, C, D] = d_A T_{BC}^D
        dT_h = _full_blocks(c["d_tup"], np.conj(c["db_tup"]), n, 3, "connection")
        dT_a = _full_blocks(c["db_tup"], np.conj(c["d_tup"]), n, 3, "connection")
        dT = np.concatenate([dT_h, dT_a], axis=1)
        R = _full_blocks(c["om"], c["omc"], n, 4, "curvature")
        dR_h = _full_blocks(c["d_om"], c["d_omc"], n, 4, "curvature")
        dR_a = _full_blocks(c["db_om"], c["db_omc"], n, 4, "curvature")
        dR = np.concatenate([dR_h, dR_a], axis=1)

        nT = (dT - _bmm("pabe,pecd->pabcd", gam, tor)
              - _bmm("pace,pbed->pabcd", gam, tor)
              + _bmm("paed,pbce->pabcd", gam, tor))
        x1 = R - _bmm("pabe,pecd->pabcd", tor, tor) - nT
        first = _cyclic3(x1, "d")
        first_max = max(first_max, float(np.max(np.abs(first))))

        nR = (dR - _bmm("pabf,pfced->pabced", gam, R)
              - _bmm("pacf,pbfed->pabced", gam, R)
              - _bmm("paef,pbcfd->pabced", gam, R)
              + _bmm("pafd,pbcef->pabced", gam, R))
        x2 = nR + _bmm("pabf,pfced->pabced", tor, R)
        second = _cyclic3(x2, "ed")
        second_max = max(second_max, float(np.max(np.abs(second))))
    return first_max, second_max


def check_bianchi(g) -> tuple[float, float]:
    return bianchi_residuals(g)


# -- Kähler detection ---------------------------------------------------------

def kahler_form_defect(g: MetricField) -> float:
    """Sup of ``|d omega|`` components; ``d omega = 0`` iff ``g`` is Kähler.

    ``(d omega)_{ij kbar} = (i/2)(d_i g_{j kbar} - d_j g_{i kbar})`` plus its
    conjugate; both vanish together.
    """
    dg = g.dg
    return float(np.max(np.abs(0.5 * (dg - np.swapaxes(dg, -3, -2)))))


def is_kahler(g: MetricField, tol: float = 1e-10) -> bool:
    return kahler_form_defect(g) <= tol
