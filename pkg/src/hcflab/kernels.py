"""Component-first evaluation of the flow speed and step diagnostics.

The general modules store fields grid-first, which keeps indexing readable
but makes small-matrix algebra over a large grid slow.  The time integrator
instead works on arrays shaped ``(components..., *grid)``; every formula here
has a grid-first counterpart in :mod:`hcflab.chern` / :mod:`hcflab.energy`
and the test suite compares the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _pointwise as pw
from .lattice import Lattice



def to_grid_first(a: np.ndarray, rank: int) -> np.ndarray:
    return np.moveaxis(a, tuple(range(rank)), tuple(range(-rank, 0)))


def to_comp_first(a: np.ndarray, rank: int) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(a, tuple(range(-rank, 0)), tuple(range(rank))))


class GridOps:
    """Wirtinger derivatives of component-first arrays (grid axes last).

    Both backends act through Fourier symbols: the fourth-order stencils are
    circulant on the periodic grid, so multiplying by their symbol applies
    exactly the same operator as the stencil itself.
    """

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        n, dim, N, h = lattice.n, lattice.dim, lattice.N, lattice.h
        self.n, self.dim = n, dim
        self.axes = tuple(range(-dim, 0))
        m = np.fft.fftfreq(N, d=1.0 / N)
        if lattice.backend == "spectral":
            m[N // 2] = 0.0
            k = 2.0 * np.pi * m
            d1, d2 = 1j * k, -k * k
        else:
            th = 2.0 * np.pi * m * h
            d1 = 1j * (8.0 * np.sin(th) - np.sin(2.0 * th)) / (6.0 * h)
            d2 = (32.0 * np.cos(th) - 2.0 * np.cos(2.0 * th) - 30.0) / (12.0 * h * h)
        shape = (N,) * dim

        def along(v, a):
            s = [1] * dim
            s[a] = N
            return np.broadcast_to(v.reshape(s), shape)

        D1 = [along(d1, a) for a in range(dim)]
        D2 = [along(d2, a) for a in range(dim)]
        self.sym_h = np.stack([0.5 * (D1[2 * j] - 1j * D1[2 * j + 1]) for j in range(n)])
        self.sym_a = np.stack([0.5 * (D1[2 * j] + 1j * D1[2 * j + 1]) for j in range(n)])
        # d_j d_jbar = (d_xx + d_yy) / 4 with the second-derivative symbol
        self.sym_lap = np.stack([0.25 * (D2[2 * j] + D2[2 * j + 1]) for j in range(n)])

    def prep(self, f: np.ndarray) -> np.ndarray:
        """Transform once; pass the result to :meth:`grad` / :meth:`hess`."""
        return sfft.fftn(f, axes=self.axes)

    def _ifft(self, fh):
        return sfft.ifftn(fh, axes=self.axes)

    def grad(self, rep: np.ndarray, kind: str) -> np.ndarray:
        """``out[j, ...] = d_j f`` (``kind="h"``) or ``d_jbar f`` (``kind="a"``)."""
        sym = self.sym_h if kind == "h" else self.sym_a
        extra = rep.ndim - self.dim
        s = sym.reshape((self.n,) + (1,) * extra + sym.shape[1:])
        return self._ifft(s * rep[None])

    def hess(self, rep: np.ndarray, k1: str, k2: str) -> np.ndarray:
        """``out[i, j, ...]`` = second Wirtinger derivative of kinds ``k1``, ``k2``.

        For the mixed holomorphic/antiholomorphic pair the diagonal uses the
        second-derivative symbol, which for fd4 is the five-point stencil,
        matching :meth:`Lattice.mixed_hessian`.
        """
        n = self.n
        s1 = self.sym_h if k1 == "h" else self.sym_a
        s2 = self.sym_h if k2 == "h" else self.sym_a
        sym = s1[:, None] * s2[None, :]
        if k1 != k2:
            for i in range(n):
                sym[i, i] = self.sym_lap[i]
        extra = rep.ndim - self.dim
        sym = sym.reshape((n, n) + (1,) * extra + sym.shape[2:])
        return self._ifft(sym * rep[None, None])


def _sig(text: str) -> np.ndarray:
    return np.array([0 if c == "h" else 1 for c in text], dtype=np.int64)


def _flat(a: np.ndarray, rank: int) -> np.ndarray:
    """View ``(comps..., *grid)`` as ``(n**rank, P)``."""
    P = a.size // math.prod(a.shape[:rank]) if rank else a.size
    return np.ascontiguousarray(a).reshape(-1, P)


def frame_norm2(x: np.ndarray, sig: str, Li: np.ndarray) -> np.ndarray:
    """Pointwise full-contraction norm of a lowered tensor in a unitary frame.

    ``x`` and ``Li`` are component-first; holomorphic slots (``"h"`` in
    ``sig``) are multiplied by ``Li = L^{-1}`` (``g = L L^H``),
    antiholomorphic slots by its conjugate.
    """
    r = len(sig)
    grid = x.shape[r:]
    n = Li.shape[0]
    out = pw.frame_norm2(_flat(x, r), _sig(sig), Li.reshape(n, n, -1))
    return out.reshape(grid)


class PositivityError(ArithmeticError):
    """Raised when a metric is not positive definite at some grid point."""


@dataclass
class Evaluation:
    """Everything the integrator needs from one metric, component-first."""

    G: np.ndarray
    gi: np.ndarray
    Li: np.ndarray
    det: np.ndarray
    dG: np.ndarray
    T: np.ndarray
    w: np.ndarray
    S: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    Q4: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    k: np.ndarray
    H: np.ndarray
    diag: dict = field(default_factory=dict)


class FlowKernel:
    """Evaluate ``S``, ``Q`` and the monitored norms of a metric.

    Parameters
    ----------
    lattice : Lattice
    q_coeffs : tuple of float
        Weights of ``Q1..Q4`` in ``Q``.
    """

    def __init__(self, lattice: Lattice, q_coeffs=(0.5, -0.25, -0.5, 1.0)):
        self.lattice = lattice
        self.ops = GridOps(lattice)
        self.q_coeffs = tuple(float(c) for c in q_coeffs)

    def integrate(self, f: np.ndarray) -> float:
        return math.fsum(np.real(f).ravel().tolist()) * self.lattice.cell_volume

    def evaluate(self, G: np.ndarray, diagnostics: bool = False,
                 second_torsion: bool = False) -> Evaluation:
        """Evaluate the flow speed ingredients of the component-first metric ``G``.

        Raises
        ------
        PositivityError
            If ``G`` is not positive definite everywhere.
        """
        ops, n = self.ops, self.lattice.n
        grid = G.shape[2:]
        rep = ops.prep(G)
        dG = ops.grad(rep, "h")                      # [i, j, k] = d_i g_{j kbar}
        H = ops.hess(rep, "h", "a")                  # [i, j, k, l] = d_i d_jbar g_{k lbar}
        res = pw.core(G.reshape(n, n, -1), dG.reshape(n, n, n, -1),
                      H.reshape(n, n, n, n, -1), *self.q_coeffs)
        if not res[0]:
            raise PositivityError("metric is not positive definite")
        shaped = [a.reshape(a.shape[:-1] + grid) for a in res[1:]]
        gi, Li, det, T, w, S, Q1, Q2, Q3, Q4, Q, K, k = shaped
        ev = Evaluation(G, gi, Li, det, dG, T, w, S, Q1, Q2, Q3, Q4, Q, K, k, H)
        if diagnostics:
            ev.diag = self._diagnostics(ev, rep, second_torsion)
        return ev

    def _diagnostics(self, ev: Evaluation, rep, second_torsion) -> dict:
        ops, n = self.ops, self.lattice.n
        grid = ev.G.shape[2:]
        gi = ev.gi.reshape(n, n, -1)
        dG = ev.dG.reshape(n, n, n, -1)
        H = ev.H.reshape(n, n, n, n, -1)
        gam, om = pw.gamma_omega(gi, dG, H)
        Tf = ev.T.reshape(n ** 3, -1)

        HH = ops.hess(rep, "h", "h").reshape(n, n, n, n, -1)
        nT = (HH - np.swapaxes(HH, 1, 2)).reshape(n, n ** 3, -1)
        pw.connection(nT, Tf, gam, _sig("hha"), 0)
        dbT = np.moveaxis(H, 1, 0)                   # [m, i, j, k] = d_mbar d_i g_{j kbar}
        nbT = (dbT - np.swapaxes(dbT, 1, 2)).reshape(n, n ** 3, -1)
        pw.connection(nbT, Tf, gam, _sig("hha"), 1)
        del HH, dbT

        # conj(Om_{i jbar k lbar}) = Om_{j ibar l kbar} makes the barred
        # covariant derivative the conjugate of the unbarred one with the
        # index pairs swapped, so |nabla_bar Om| = |nabla Om| pointwise.
        omg = om.reshape((n,) * 4 + grid)
        x = ops.grad(ops.prep(omg), "h").reshape(n, n ** 4, -1)
        omf = om.reshape(n ** 4, -1)
        pw.connection(x, omf, gam, _sig("haha"), 0)
        Li = ev.Li.reshape(n, n, -1)
        nom2 = 2.0 * pw.frame_norm2(x.reshape(n ** 5, -1), _sig("hhaha"), Li)
        del x

        om2 = pw.frame_norm2(omf, _sig("haha"), Li)
        t2 = pw.frame_norm2(Tf, _sig("hha"), Li)
        nt2 = (pw.frame_norm2(nT.reshape(n ** 4, -1), _sig("hhha"), Li)
               + pw.frame_norm2(nbT.reshape(n ** 4, -1), _sig("ahha"), Li))
        w2 = pw.frame_norm2(ev.w.reshape(n, -1), _sig("h"), Li)
        d = {
            "sup_omega": float(np.sqrt(np.max(om2))),
            "sup_T": float(np.sqrt(np.max(t2))),
            "sup_nabla_T": float(np.sqrt(np.max(nt2))),
            "sup_nabla_omega": float(np.sqrt(np.max(nom2))),
            "T_norm2": t2.reshape(grid),
            "w_norm2": w2.reshape(grid),
            "omega": omg,
        }
        if second_torsion:
            d["sup_nabla2_T"] = self._second_torsion(nT, nbT, gam, Li, grid)
        return d

    def _second_torsion(self, nT, nbT, gam, Li, grid) -> float:
        """Sup of ``|nabla^2 T|`` over all four derivative-kind pairs."""
        ops, n = self.ops, self.lattice.n
        total = 0.0
        for first, sig in ((nT, "hhha"), (nbT, "ahha")):
            flat = first.reshape(n ** 4, -1)
            rep = ops.prep(flat.reshape((n,) * 4 + grid))
            for kind, code in (("h", 0), ("a", 1)):
                x = ops.grad(rep, kind).reshape(n, n ** 4, -1)
                pw.connection(x, flat, gam, _sig(sig), code)
                total = total + pw.frame_norm2(x.reshape(n ** 5, -1), _sig(kind + sig), Li)
        return float(np.sqrt(np.max(total)))
