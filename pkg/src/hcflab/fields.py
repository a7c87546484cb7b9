"""Typed complex tensor fields on a lattice.

Index slots are coded by one character:

``h``  lower holomorphic (``_i``)       ``H``  upper holomorphic (``^i``)
``a``  lower antiholomorphic (``_ibar``) ``A``  upper antiholomorphic (``^ibar``)

Component axes follow the grid axes in slot order.  Derivative slots
created by covariant differentiation are prepended, matching the usual
``nabla_i T_{jk lbar}`` reading order.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import ANTI, HOLO, Lattice

_CONJ = {"h": "a", "a": "h", "H": "A", "A": "H"}


class SignatureError(ValueError):
    """Raised when index slots do not type-check."""


def conj_sig(sig: str) -> str:
    return "".join(_CONJ[c] for c in sig)


def _check_sig(sig):
    bad = set(sig) - set(_CONJ)
    if bad:
        raise SignatureError(f"unknown slot codes {sorted(bad)} in {sig!r}")


@dataclass(frozen=True, eq=False)
class TensorField:
    """Grid-valued complex tensor with an index signature."""

    data: np.ndarray
    sig: str
    lattice: Lattice

    def __post_init__(self):
        _check_sig(self.sig)
        expected = self.lattice.shape + (self.lattice.n,) * len(self.sig)
        if self.data.shape != expected:
            raise SignatureError(
                f"data shape {self.data.shape} does not match signature {self.sig!r} "
                f"(expected {expected})")

    @property
    def rank(self) -> int:
        return len(self.sig)

    def conj(self) -> "TensorField":
        """Complex conjugate; holomorphic and antiholomorphic slots swap."""
        return TensorField(np.conj(self.data), conj_sig(self.sig), self.lattice)

    def _like(self, data):
        return TensorField(data, self.sig, self.lattice)

    def _same(self, other):
        if not isinstance(other, TensorField) or other.sig != self.sig:
            raise SignatureError("operands must share a signature")
        return other.data

    def __add__(self, other):
        return self._like(self.data + self._same(other))

    def __sub__(self, other):
        return self._like(self.data - self._same(other))

    def __neg__(self):
        return self._like(-self.data)

    def __mul__(self, c):
        return self._like(self.data * c)

    __rmul__ = __mul__

    def sup(self) -> float:
        """Largest absolute component over the grid."""
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


class MetricField:
    """Hermitian metric ``g_{i jbar}`` on a lattice with cached derived data.

    Parameters
    ----------
    g : ndarray
        Shape ``lattice.shape + (n, n)``; ``g[..., i, j] = g_{i jbar}``.
    lattice : Lattice
    validate : bool
        Check Hermitian symmetry and positivity on construction.
    """

    def __init__(self, g: np.ndarray, lattice: Lattice, validate: bool = True):
        g = np.asarray(g, dtype=complex)
        if g.shape != lattice.shape + (lattice.n, lattice.n):
            raise SignatureError(f"metric shape {g.shape} does not match lattice")
        self.g = g
        self.lattice = lattice
        if validate:
            self.validate()

    @classmethod
    def flat(cls, lattice: Lattice, scale: float = 1.0) -> "MetricField":
        g = np.broadcast_to(scale * np.eye(lattice.n, dtype=complex),
                            lattice.shape + (lattice.n, lattice.n)).copy()
        return cls(g, lattice)

    @property
    def n(self) -> int:
        return self.lattice.n

    def field(self) -> TensorField:
        return TensorField(self.g, "ha", self.lattice)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.g - np.conj(np.swapaxes(self.g, -1, -2)))))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(hermitian_part(self.g))

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues.min())

    def validate(self, tol: float = 1e-12):
        scale = max(1.0, float(np.max(np.abs(self.g))))
        if self.hermitian_defect() > tol * scale:
            raise ValueError(f"metric is not Hermitian (defect {self.hermitian_defect():.3e})")
        if not self.min_eigenvalue > 0.0:
            raise ValueError(f"metric is not positive definite (min eigenvalue "
                             f"{self.min_eigenvalue:.3e})")

    # -- algebraic data ------------------------------------------------------

    @cached_property
    def inv(self) -> np.ndarray:
        """``inv[..., i, j] = g^{i jbar}`` so that ``g^{i jbar} g_{k jbar} = delta``."""
        return np.swapaxes(np.linalg.inv(self.g), -1, -2)

    @cached_property
    def det(self) -> np.ndarray:
        """Real determinant ``det(g_{i jbar})``, the density of ``dV``."""
        return np.real(np.linalg.det(self.g))

    @property
    def volume(self) -> float:
        return self.lattice.integrate(self.det)

    # -- derivatives ---------------------------------------------------------

    @cached_property
    def _grad(self):
        return self.lattice.grad(self.g)

    @property
    def dg(self) -> np.ndarray:
        """``dg[..., i, j, k] = d_i g_{j kbar}``."""
        return self._grad[0]

    @property
    def dbg(self) -> np.ndarray:
        """``dbg[..., i, j, k] = d_ibar g_{j kbar}``."""
        return self._grad[1]

    @cached_property
    def ddbg(self) -> np.ndarray:
        """``ddbg[..., i, j, k, l] = d_i d_jbar g_{k lbar}``."""
        return self.lattice.mixed_hessian(self.g)

    @cached_property
    def christoffel(self) -> np.ndarray:
        """``Gamma[..., i, j, k] = Gamma_{ij}^k = g^{k lbar} d_i g_{j lbar}``."""
        return np.einsum("...kl,...ijl->...ijk", self.inv, self.dg)

    def __add__(self, other):
        o = other.g if isinstance(other, MetricField) else other
        return MetricField(self.g + o, self.lattice)

    def scaled(self, c: float) -> "MetricField":
        return MetricField(c * self.g, self.lattice)


# -- contraction -------------------------------------------------------------

def _letters(k, skip=""):
    pool = [c for c in string.ascii_letters if c not in skip]
    return pool[:k]


def contract(a: TensorField, b: TensorField | None, pairing, metric: MetricField) -> TensorField:
    """Contract slot pairs of ``a`` with slots of ``b`` (or of ``a`` itself).

    Each pair ``(p, q)`` joins slot ``p`` of ``a`` with slot ``q`` of ``b``.
    Opposite variance with equal holomorphy contracts directly; equal
    variance with opposite holomorphy contracts through ``g`` or ``g^-1``.
    With ``b=None`` both slot numbers refer to ``a`` (a trace).  The result
    keeps the unpaired slots of ``a`` followed by those of ``b``.
    """
    sig_b = a.sig if b is None else b.sig
    la = _letters(a.rank + len(sig_b))
    sa = la[: a.rank]
    sb = sa if b is None else la[a.rank:]
    metrics = []
    used_a, used_b = set(), set()
    used_q = used_a if b is None else used_b
    for p, q in pairing:
        if p in used_a or q in used_q or (b is None and p == q):
            raise SignatureError("slot used twice in pairing")
        used_a.add(p)
        used_q.add(q)
        ca, cb = a.sig[p], sig_b[q]
        same_holo = ca.lower() == cb.lower()
        same_var = ca.islower() == cb.islower()
        if same_holo and not same_var:
            sb[q] = sa[p]
        elif not same_holo and same_var:
            # g^{i jbar} / g_{i jbar}: first axis holomorphic.
            mat = metric.inv if ca.islower() else metric.g
            x, y = (sa[p], sb[q]) if ca.lower() == "h" else (sb[q], sa[p])
            metrics.append((mat, x + y))
        else:
            raise SignatureError(f"cannot pair slot {ca!r} with {cb!r}")
    operands = [a.data]
    subs = ["..." + "".join(sa)]
    out = [sa[i] for i in range(a.rank) if i not in used_a]
    out_sig = "".join(a.sig[i] for i in range(a.rank) if i not in used_a)
    if b is not None:
        operands.append(b.data)
        subs.append("..." + "".join(sb))
        out += [sb[i] for i in range(b.rank) if i not in used_b]
        out_sig += "".join(b.sig[i] for i in range(b.rank) if i not in used_b)
    for mat, ss in metrics:
        operands.append(mat)
        subs.append("..." + ss)
    expr = ",".join(subs) + "->..." + "".join(out)
    data = np.einsum(expr, *operands, optimize=True)
    return TensorField(np.ascontiguousarray(data), out_sig, a.lattice)


# -- Chern covariant derivative -----------------------------------------------

def covariant_derivative_array(t: np.ndarray, sig: str, g: MetricField, kind: str) -> np.ndarray:
    """All-direction Chern derivative of a raw component array.

    Returns an array with a new derivative slot right after the grid axes.
    Holomorphic derivatives correct holomorphic slots with ``Gamma``;
    antiholomorphic derivatives correct antiholomorphic slots with its
    conjugate.  Mixed Chern symbols vanish.
    """
    lat = g.lattice
    df, dbf = lat.grad(t)
    out = df if kind == HOLO else dbf
    if kind not in (HOLO, ANTI):
        raise ValueError(f"unknown kind {kind!r}")
    gam = g.christoffel if kind == HOLO else np.conj(g.christoffel)
    target = "h" if kind == HOLO else "a"
    r = len(sig)
    letters = _letters(r + 2)
    d, p = letters[r], letters[r + 1]
    slots = letters[:r]
    for k, c in enumerate(sig):
        if c.lower() != target:
            continue
        src = list(slots)
        src[k] = p
        res = d + "".join(slots)
        if c.islower():
            # -Gamma_{d s_k}^p t_{..p..}
            expr = f"...{d}{slots[k]}{p},...{''.join(src)}->...{res}"
            out = out - np.einsum(expr, gam, t)
        else:
            # +Gamma_{d p}^{s_k} t^{..p..}
            expr = f"...{d}{p}{slots[k]},...{''.join(src)}->...{res}"
            out = out + np.einsum(expr, gam, t)
    return out


def covariant_derivative(t: TensorField, g: MetricField, kind: str = HOLO,
                         direction: int | None = None) -> TensorField:
    """Chern covariant derivative ``nabla_i t`` or ``nabla_ibar t``.

    With ``direction=None`` the derivative slot is returned as the first slot
    of the result; otherwise only that direction is returned.
    """
    if direction is not None and not 0 <= direction < g.n:
        raise IndexError(f"axis {direction} out of range")
    out = covariant_derivative_array(t.data, t.sig, g, kind)
    slot = "h" if kind == HOLO else "a"
    if direction is None:
        return TensorField(out, slot + t.sig, t.lattice)
    return TensorField(np.ascontiguousarray(out[(slice(None),) * g.lattice.dim + (direction,)]),
                       t.sig, t.lattice)


# -- inner products --------------------------------------------------------

def inner(a: TensorField, b: TensorField, g: MetricField) -> np.ndarray:
    """Pointwise Hermitian inner product ``<a, b>`` (conjugate-linear in ``b``).

    For (1,1) tensors this is ``g^{i kbar} g^{l jbar} a_{i jbar} conj(b_{k lbar})``;
    other ranks contract slot by slot in the same way.  Real whenever ``a``
    and ``b`` are both Hermitian-symmetric, and ``inner(a, a) >= 0``.
    """
    if a.sig != b.sig:
        raise SignatureError(f"signatures differ: {a.sig!r} vs {b.sig!r}")
    r = a.rank
    la = _letters(2 * r)
    sa, sb = la[:r], la[r:]
    operands = [a.data, np.conj(b.data)]
    subs = ["..." + "".join(sa), "..." + "".join(sb)]
    for k, c in enumerate(a.sig):
        if c == "h":
            operands.append(g.inv)
            subs.append("..." + sa[k] + sb[k])
        elif c == "a":
            operands.append(g.inv)
            subs.append("..." + sb[k] + sa[k])
        elif c == "H":
            operands.append(g.g)
            subs.append("..." + sa[k] + sb[k])
        else:
            operands.append(g.g)
            subs.append("..." + sb[k] + sa[k])
    expr = ",".join(subs) + "->..."
    return np.einsum(expr, *operands, optimize=True)


def norm2(a: TensorField, g: MetricField) -> np.ndarray:
    """Pointwise squared norm ``|a|^2``."""
    return np.real(inner(a, a, g))


def sup_norm(a: TensorField, g: MetricField) -> float:
    return float(np.sqrt(max(0.0, float(np.max(norm2(a, g))))))


def trace11(a: np.ndarray, g: MetricField) -> np.ndarray:
    """``g^{i jbar} a_{i jbar}`` for a raw (1,1) array."""
    return np.einsum("...ij,...ij->...", g.inv, a)


def pair11(h: np.ndarray, x: np.ndarray, g: MetricField) -> np.ndarray:
    """Bilinear pairing ``g^{i kbar} g^{l jbar} h_{i jbar} x_{l kbar}``.

    Agrees with :func:`inner` whenever ``x`` is Hermitian; for non-Hermitian
    ``x`` it is the complex-bilinear extension.
    """
    return np.einsum("...ik,...lj,...ij,...lk->...", g.inv, g.inv, h, x, optimize=True)
