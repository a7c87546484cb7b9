"""Quadratic torsion tensors, the functional F and the static-metric residual."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chern import ChernPackage, compute_package
from .fields import MetricField, TensorField, norm2, trace11

#: Coefficients of ``Q = c1 Q1 + c2 Q2 + c3 Q3 + c4 Q4``.
Q_COEFFS = (0.5, -0.25, -0.5, 1.0)


@dataclass(frozen=True, eq=False)
class QPackage:
    """Torsion-quadratic tensors of one metric.

    ``Q1..Q4`` and ``Q``, ``K = S - Q`` are (1,1) arrays ``[i, j] = X_{i jbar}``;
    ``k = tr_g K`` is a real scalar field.  ``F_value`` is the normalized
    functional and ``volume`` the total volume ``int det g``.
    """

    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    Q4: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    k: np.ndarray
    T_norm2: np.ndarray
    w_norm2: np.ndarray
    F_value: float
    volume: float
    k_integral: float


def q_tensors(pkg: ChernPackage) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The four contractions ``Q1..Q4`` of the torsion with itself."""
    gi = pkg.metric.inv
    T, Tb = pkg.torsion, pkg.torsion_bar
    q1 = np.einsum("...kl,...mn,...ikn,...jlm->...ij", gi, gi, T, Tb, optimize=True)
    q2 = np.einsum("...kl,...mn,...lni,...kmj->...ij", gi, gi, Tb, T, optimize=True)
    q3 = np.einsum("...kl,...mn,...ikl,...jnm->...ij", gi, gi, T, Tb, optimize=True)
    q4 = 0.5 * (np.einsum("...kl,...mn,...mkl,...nji->...ij", gi, gi, T, Tb, optimize=True)
                + np.einsum("...kl,...mn,...nlk,...mij->...ij", gi, gi, Tb, T, optimize=True))
    return q1, q2, q3, q4


def combine_q(q1, q2, q3, q4, coeffs=Q_COEFFS) -> np.ndarray:
    c1, c2, c3, c4 = coeffs
    return c1 * q1 + c2 * q2 + c3 * q3 + c4 * q4


def compute_q(g: MetricField, package: ChernPackage | None = None,
              coeffs=Q_COEFFS) -> QPackage:
    """Build the :class:`QPackage` of ``g``.

    Parameters
    ----------
    g : MetricField
    package : ChernPackage, optional
        Reused when given.
    coeffs : tuple of float
        Weights of ``Q1..Q4`` in ``Q``; only changed to inject faults in tests.
    """
    pkg = package if package is not None else compute_package(g)
    q1, q2, q3, q4 = q_tensors(pkg)
    Q = combine_q(q1, q2, q3, q4, coeffs)
    K = pkg.S - Q
    k = np.real(trace11(K, g))
    lat = g.lattice
    tn = norm2(pkg.field("torsion"), g)
    wn = norm2(pkg.field("w"), g)
    vol = lat.integrate(g.det)
    kint = lat.integrate(k, g.det)
    F = kint / vol ** ((lat.n - 1) / lat.n)
    return QPackage(q1, q2, q3, q4, Q, K, k, tn, wn, F, vol, kint)


def functional(g: MetricField) -> float:
    """``F(g) = int (s - |T|^2/4 - |w|^2/2) dV / (int dV)^((n-1)/n)``.

    Assembled from ``s`` and the norms directly, independent of the ``Q``
    tensors.
    """
    pkg = compute_package(g)
    lat = g.lattice
    tn = norm2(pkg.field("torsion"), g)
    wn = norm2(pkg.field("w"), g)
    num = lat.integrate(pkg.s - 0.25 * tn - 0.5 * wn, g.det)
    return num / g.volume ** ((lat.n - 1) / lat.n)


def trace_identity_residual(g: MetricField, qp: QPackage | None = None) -> float:
    """Sup of ``|tr_g Q - (|T|^2/4 + |w|^2/2)|``."""
    qp = qp if qp is not None else compute_q(g)
    lhs = trace11(qp.Q, g)
    return float(np.max(np.abs(lhs - (0.25 * qp.T_norm2 + 0.5 * qp.w_norm2))))


def min_q_eigenvalues(g: MetricField, qp: QPackage | None = None) -> tuple[float, float]:
    """Smallest pointwise eigenvalues of ``Q1`` and ``Q3`` relative to ``g``.

    PSD is meant against the metric, so eigenvalues of ``g^{-1} Q`` are used,
    computed through the congruent Hermitian matrix ``L^{-1} Q L^{-H}``.
    """
    qp = qp if qp is not None else compute_q(g)
    L = np.linalg.cholesky(g.g)
    Li = np.linalg.inv(L)
    out = []
    for q in (qp.Q1, qp.Q3):
        m = Li @ q @ np.conj(np.swapaxes(Li, -1, -2))
        m = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
        out.append(float(np.linalg.eigvalsh(m).min()))
    return out[0], out[1]


def static_residual(g: MetricField, qp: QPackage | None = None) -> tuple[float, float]:
    """``(sup|K - (k/n) g|, sup|k - mean k|)``; both vanish for static metrics.

    ``mean k`` is the volume-weighted average.
    """
    qp = qp if qp is not None else compute_q(g)
    n = g.n
    tensor = float(np.max(np.abs(qp.K - (qp.k / n)[..., None, None] * g.g)))
    mean = qp.k_integral / qp.volume
    scalar = float(np.max(np.abs(qp.k - mean)))
    return tensor, scalar


def field(arr: np.ndarray, g: MetricField) -> TensorField:
    """Wrap a (1,1) array from this module as a :class:`TensorField`."""
    return TensorField(arr, "ha", g.lattice)
