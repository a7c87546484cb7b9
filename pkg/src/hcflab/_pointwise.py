"""Compiled pointwise tensor algebra for :mod:`hcflab.kernels`.

All arrays are component-first with the grid flattened into one trailing
axis of length ``P``.  Index conventions match :mod:`hcflab.chern`:
``gi[i, j] = g^{i jbar}``, ``dG[i, j, k] = d_i g_{j kbar}``,
``H[i, j, k, l] = d_i d_jbar g_{k lbar}``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BLOCK = 512


@njit(cache=True)
def _frame_block(G, p0, nb, L, Li, det):
    """Cholesky ``G = L L^H`` and ``Li = L^{-1}`` on points ``p0 .. p0 + nb``.

    Writes ``det G`` into ``det``; returns False if some point is not
    positive definite (its entries become NaN).
    """
    n = G.shape[0]
    ok = True
    for p in range(nb):
        det[p] = 1.0
    for j in range(n):
        for p in range(nb):
            d = G[j, j, p0 + p].real
            for k in range(j):
                d -= L[j, k, p].real ** 2 + L[j, k, p].imag ** 2
            if not d > 0.0:
                ok = False
                d = np.nan
            det[p] *= d
            L[j, j, p] = np.sqrt(d)
        for i in range(n):
            if i < j:
                for p in range(nb):
                    L[i, j, p] = 0.0
            elif i > j:
                for p in range(nb):
                    s = G[i, j, p0 + p]
                    for k in range(j):
                        s -= L[i, k, p] * np.conj(L[j, k, p])
                    L[i, j, p] = s / L[j, j, p].real
    for c in range(n):
        for i in range(n):
            for p in range(nb):
                if i < c:
                    Li[i, c, p] = 0.0
                    continue
                s = 1.0 + 0.0j if i == c else 0.0j
                for k in range(c, i):
                    s -= L[i, k, p] * Li[k, c, p]
                Li[i, c, p] = s / L[i, i, p].real
    return ok


@njit(cache=True)
def core(G, dG, H, c1, c2, c3, c4):
    """Inverse metric, torsion, closed-form ``S`` and ``Q1..Q4`` at every point.

    Returns ``(ok, gi, Li, det, T, w, S, Q1, Q2, Q3, Q4, Q, K, k)``; ``ok`` is
    False if the metric fails to be positive definite somewhere.  Work is
    done on blocks of points with the point index innermost.
    """
    n = G.shape[0]
    P = G.shape[2]
    c = np.complex128
    gi = np.empty((n, n, P), c)
    Li = np.empty((n, n, P), c)
    det = np.empty(P)
    T = np.empty((n, n, n, P), c)
    w = np.zeros((n, P), c)
    S = np.zeros((n, n, P), c)
    Q1 = np.zeros((n, n, P), c)
    Q2 = np.zeros((n, n, P), c)
    Q3 = np.empty((n, n, P), c)
    Q4 = np.empty((n, n, P), c)
    Q = np.empty((n, n, P), c)
    K = np.empty((n, n, P), c)
    k = np.zeros(P)
    nbk = BLOCK
    L = np.empty((n, n, nbk), c)
    Lb = np.empty((n, n, nbk), c)
    db = np.empty(nbk)
    A = np.empty((n, n, n, nbk), c)
    Bm = np.empty((n, n, n, nbk), c)
    V = np.empty((n, n, n, nbk), c)
    U = np.empty((n, n, n, nbk), c)
    R = np.empty((n, n, n, nbk), c)
    a4 = np.empty((n, n, nbk), c)
    ok = True
    for p0 in range(0, P, nbk):
        nb = min(nbk, P - p0)
        if not _frame_block(G, p0, nb, L, Lb, db):
            ok = False
        for p in range(nb):
            det[p0 + p] = db[p]
        # g^{i jbar} = sum_c conj(Li[c, j]) Li[c, i]
        for i in range(n):
            for j in range(n):
                for p in range(nb):
                    Li[i, j, p0 + p] = Lb[i, j, p]
                    s = 0.0j
                    for q in range(n):
                        s += np.conj(Lb[q, j, p]) * Lb[q, i, p]
                    gi[i, j, p0 + p] = s
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    for p in range(p0, p0 + nb):
                        T[i, j, l, p] = dG[i, j, l, p] - dG[j, i, l, p]
        # S_{j kbar} = -g^{l mbar} H_{l m j k} + A_{l q k} B_{q j l}
        for l in range(n):
            for q in range(n):
                for kk in range(n):
                    for p in range(nb):
                        A[l, q, kk, p] = 0.0
                        Bm[q, kk, l, p] = 0.0
                    for m in range(n):
                        for p in range(nb):
                            A[l, q, kk, p] += gi[l, m, p0 + p] * np.conj(dG[m, kk, q, p0 + p])
                            Bm[q, kk, l, p] += gi[q, m, p0 + p] * dG[l, kk, m, p0 + p]
        for j in range(n):
            for kk in range(n):
                for l in range(n):
                    for m in range(n):
                        for p in range(nb):
                            S[j, kk, p0 + p] += (A[l, m, kk, p] * Bm[m, j, l, p]
                                                 - gi[l, m, p0 + p] * H[l, m, j, kk, p0 + p])
        # U_{i l m} = g^{k lbar} g^{m nbar} T_{i k n}; R_{k m i} = g^{k lbar} g^{m nbar} conj(T_{l n i})
        for i in range(n):
            for kk in range(n):
                for m in range(n):
                    for p in range(nb):
                        V[i, kk, m, p] = 0.0
                        U[kk, m, i, p] = 0.0
                    for nn in range(n):
                        for p in range(nb):
                            V[i, kk, m, p] += gi[m, nn, p0 + p] * T[i, kk, nn, p0 + p]
                            U[kk, m, i, p] += gi[m, nn, p0 + p] * np.conj(T[kk, nn, i, p0 + p])
        # V now holds the first contraction of U, U that of R
        for a in range(n):
            for b in range(n):
                for e in range(n):
                    for p in range(nb):
                        R[a, b, e, p] = 0.0
                        A[a, b, e, p] = 0.0
                    for kk in range(n):
                        for p in range(nb):
                            # A <- U_{a b e} (i=a, l=b, m=e); R <- R_{a b e} (k=a, m=b, i=e)
                            A[a, b, e, p] += gi[kk, b, p0 + p] * V[a, kk, e, p]
                            R[a, b, e, p] += gi[a, kk, p0 + p] * U[kk, b, e, p]
        for i in range(n):
            for kk in range(n):
                for l in range(n):
                    for p in range(p0, p0 + nb):
                        w[i, p] += gi[kk, l, p] * T[i, kk, l, p]
        for i in range(n):
            for j in range(n):
                for p in range(nb):
                    a4[i, j, p] = 0.0
                for l in range(n):
                    for m in range(n):
                        for p in range(nb):
                            Q1[i, j, p0 + p] += A[i, l, m, p] * np.conj(T[j, l, m, p0 + p])
                            Q2[i, j, p0 + p] += R[l, m, i, p] * T[l, m, j, p0 + p]
                            a4[i, j, p] += (w[l, p0 + p] * gi[l, m, p0 + p]
                                            * np.conj(T[m, j, i, p0 + p]))
        for i in range(n):
            for j in range(n):
                for p in range(nb):
                    pp = p0 + p
                    Q3[i, j, pp] = w[i, pp] * np.conj(w[j, pp])
                    q4 = 0.5 * (a4[i, j, p] + np.conj(a4[j, i, p]))
                    Q4[i, j, pp] = q4
                    qq = c1 * Q1[i, j, pp] + c2 * Q2[i, j, pp] + c3 * Q3[i, j, pp] + c4 * q4
                    Q[i, j, pp] = qq
                    kv = S[i, j, pp] - qq
                    K[i, j, pp] = kv
                    k[pp] += (gi[i, j, pp] * kv).real
    return ok, gi, Li, det, T, w, S, Q1, Q2, Q3, Q4, Q, K, k


@njit(cache=True)
def gamma_omega(gi, dG, H):
    """Chern symbols ``Gamma[i, j, k] = g^{k lbar} d_i g_{j lbar}`` and the
    lowered curvature ``Om[i, j, k, l] = Omega_{i jbar k lbar}``.

    ``Omega_{i jbar k lbar} = -d_i d_jbar g_{k lbar}
    + g^{a sbar} d_jbar g_{a lbar} d_i g_{k sbar}``.
    """
    n = gi.shape[0]
    P = gi.shape[2]
    gam = np.empty((n, n, n, P), np.complex128)
    om = np.empty((n, n, n, n, P), np.complex128)
    for i in range(n):
        for j in range(n):
            for kk in range(n):
                for p in range(P):
                    s = 0.0j
                    for l in range(n):
                        s += gi[kk, l, p] * dG[i, j, l, p]
                    gam[i, j, kk, p] = s
    for i in range(n):
        for j in range(n):
            for kk in range(n):
                for l in range(n):
                    for p in range(P):
                        s = -H[i, j, kk, l, p]
                        for a in range(n):
                            for q in range(n):
                                s += gi[a, q, p] * np.conj(dG[j, l, a, p]) * dG[i, kk, q, p]
                        om[i, j, kk, l, p] = s
    return gam, om


@njit(cache=True)
def connection(dx, first, gam, sig, kind):
    """Subtract Chern connection terms from a coordinate derivative, in place.

    ``dx[m, idx]`` holds ``d_m`` (``kind == 0``) or ``d_mbar`` (``kind == 1``)
    of ``first[idx]``, a tensor of rank ``len(sig)`` flattened row-major;
    ``sig[s]`` is 0 for a holomorphic and 1 for an antiholomorphic slot.  Only
    slots of the same kind as the derivative carry a connection term.
    """
    n = gam.shape[0]
    P = gam.shape[3]
    r = sig.shape[0]
    C = first.shape[0]
    for p0 in range(0, P, BLOCK):
        p1 = min(p0 + BLOCK, P)
        for m in range(n):
            for idx in range(C):
                for s in range(r):
                    if sig[s] != kind:
                        continue
                    st = n ** (r - 1 - s)
                    v = (idx // st) % n
                    base = idx - v * st
                    for q in range(n):
                        src = base + q * st
                        for p in range(p0, p1):
                            c = gam[m, v, q, p]
                            if kind != 0:
                                c = np.conj(c)
                            dx[m, idx, p] -= c * first[src, p]


@njit(cache=True)
def frame_norm2(x, sig, Li):
    """Pointwise ``|x|^2`` of a lowered tensor via a unitary frame.

    ``x`` is ``(n**r, P)``; holomorphic slots are multiplied by ``Li`` and
    antiholomorphic slots by ``conj(Li)``, after which the norm is the plain
    sum of squared moduli.  ``Li`` is lower triangular.  The grid is walked
    in blocks so the working set stays in cache.
    """
    n = Li.shape[0]
    P = Li.shape[2]
    r = sig.shape[0]
    C = x.shape[0]
    out = np.zeros(P)
    bufs = np.empty((2, C, BLOCK), np.complex128)
    for p0 in range(0, P, BLOCK):
        nb = min(BLOCK, P - p0)
        for idx in range(C):
            for p in range(nb):
                bufs[0, idx, p] = x[idx, p0 + p]
        cur = 0
        for s in range(r):
            st = n ** (r - 1 - s)
            a = bufs[cur]
            b = bufs[1 - cur]
            conj = sig[s] != 0
            for idx in range(C):
                z = (idx // st) % n
                base = idx - z * st
                for q in range(z + 1):
                    src = base + q * st
                    for p in range(nb):
                        m = Li[z, q, p0 + p]
                        if conj:
                            m = np.conj(m)
                        if q == 0:
                            b[idx, p] = m * a[src, p]
                        else:
                            b[idx, p] += m * a[src, p]
            cur = 1 - cur
        a = bufs[cur]
        for idx in range(C):
            for p in range(nb):
                out[p0 + p] += a[idx, p].real ** 2 + a[idx, p].imag ** 2
    return out
