"""Seeded generators for initial metrics on a lattice."""

from __future__ import annotations

import numpy as np

from .fields import MetricField, hermitian_part
from .lattice import Lattice


def _band_limited(lattice: Lattice, rng: np.random.Generator, bandwidth: int,
                  comp: tuple = ()) -> np.ndarray:
    """Random complex trigonometric polynomial with modes ``|k_a| <= bandwidth``."""
    if not 1 <= bandwidth < lattice.N // 2:
        raise ValueError(f"bandwidth must be in 1..{lattice.N // 2 - 1}")
    N, dim = lattice.N, lattice.dim
    k = np.fft.fftfreq(N, d=1.0 / N)
    keep = np.abs(k) <= bandwidth
    idx = np.ix_(*([np.flatnonzero(keep)] * dim))
    shape = (int(keep.sum()),) * dim + comp
    spec = np.zeros((N,) * dim + comp, dtype=complex)
    coeff = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    # gentle decay keeps low modes dominant
    kk = sum(np.meshgrid(*([k[keep] ** 2] * dim), indexing="ij"))
    coeff *= (1.0 / (1.0 + kk)).reshape(kk.shape + (1,) * len(comp))
    spec[idx] = coeff
    return np.fft.ifftn(spec, axes=tuple(range(dim))) * N ** dim


def random_hermitian(lattice: Lattice, seed: int, bandwidth: int = 2) -> np.ndarray:
    """Band-limited Hermitian (1,1) field normalised to unit sup spectral norm."""
    rng = np.random.default_rng(seed)
    a = _band_limited(lattice, rng, bandwidth, (lattice.n, lattice.n))
    h = hermitian_part(a)
    scale = np.max(np.abs(np.linalg.eigvalsh(h)))
    return h / scale


def random_scalar(lattice: Lattice, seed: int, bandwidth: int = 2, real: bool = True) -> np.ndarray:
    """Band-limited scalar field with unit sup norm."""
    rng = np.random.default_rng(seed)
    f = _band_limited(lattice, rng, bandwidth)
    if real:
        f = f.real.astype(complex)
    return f / np.max(np.abs(f))


def random_tensor(lattice: Lattice, seed: int, rank: int, bandwidth: int = 2) -> np.ndarray:
    """Band-limited complex tensor components with unit sup norm."""
    rng = np.random.default_rng(seed)
    f = _band_limited(lattice, rng, bandwidth, (lattice.n,) * rank)
    return f / np.max(np.abs(f))


def flat(lattice: Lattice, scale: float = 1.0) -> MetricField:
    return MetricField.flat(lattice, scale)


def hermitian_perturbation(lattice: Lattice, seed: int, amplitude: float = 0.1,
                           bandwidth: int = 2) -> MetricField:
    """``g = I + amplitude * H`` with ``H`` random Hermitian and ``|H| <= 1``.

    The eigenvalues of ``g`` lie in ``[1 - amplitude, 1 + amplitude]``.
    """
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("amplitude must lie in [0, 1)")
    h = random_hermitian(lattice, seed, bandwidth)
    return MetricField(np.eye(lattice.n) + amplitude * h, lattice)


def kahler_potential(lattice: Lattice, seed: int, amplitude: float = 0.1,
                     bandwidth: int = 2) -> MetricField:
    """Kähler metric ``g_{i jbar} = delta_ij + d_i d_jbar phi``.

    ``phi`` is a real band-limited potential scaled so that the Hessian term
    has sup spectral norm ``amplitude``.
    """
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("amplitude must lie in [0, 1)")
    phi = random_scalar(lattice, seed, bandwidth, real=True)
    # Composed first derivatives commute exactly in either backend, so the
    # discrete torsion of this metric vanishes to roundoff.
    dphi_bar = lattice.grad(phi)[1]
    hess = hermitian_part(lattice.grad(dphi_bar)[0])
    scale = np.max(np.abs(np.linalg.eigvalsh(hess)))
    return MetricField(np.eye(lattice.n) + amplitude * hess / scale, lattice)
