"""Periodic uniform lattices over the flat torus C^n / Z^2n.

Fields live on a grid of ``N`` points per real axis with real axes ordered
``(x1, y1, ..., xn, yn)``.  Arrays carry the grid axes first and any tensor
component axes after them, so a field of rank ``r`` has shape
``(N,) * 2n + (n,) * r``.

Two derivative backends are available: ``"spectral"`` (FFT multipliers) and
``"fd4"`` (fourth-order central stencils built from ``np.roll``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BACKENDS = ("spectral", "fd4")
HOLO = "holo"
ANTI = "anti"


def _fd4_first(f, axis, h):
    return (8.0 * (np.roll(f, -1, axis) - np.roll(f, 1, axis))
            - (np.roll(f, -2, axis) - np.roll(f, 2, axis))) / (12.0 * h)


def _fd4_second(f, axis, h):
    return (16.0 * (np.roll(f, -1, axis) + np.roll(f, 1, axis))
            - (np.roll(f, -2, axis) + np.roll(f, 2, axis)) - 30.0 * f) / (12.0 * h * h)


@dataclass(frozen=True)
class Lattice:
    """Uniform periodic grid on ``[0, 1)^(2n)``.

    Parameters
    ----------
    n : int
        Complex dimension, 1 <= n <= 3.
    N : int
        Points per real axis (even, >= 8).
    backend : str
        ``"spectral"`` or ``"fd4"``.
    """

    n: int
    N: int
    backend: str = "spectral"
    _wavenumbers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.n <= 3:
            raise ValueError(f"complex dimension must be in 1..3, got {self.n}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        # Nyquist mode dropped so odd derivatives stay real and skew.
        k[self.N // 2] = 0.0
        object.__setattr__(self, "_wavenumbers", 2.0 * np.pi * k)

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def dim(self) -> int:
        """Number of real axes."""
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def with_backend(self, backend: str) -> "Lattice":
        return Lattice(self.n, self.N, backend)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable real coordinate arrays ``[x1, y1, ..., xn, yn]``."""
        x = np.arange(self.N) * self.h
        out = []
        for a in range(self.dim):
            s = [1] * self.dim
            s[a] = self.N
            out.append(x.reshape(s))
        return out

    def zeros(self, *comp, dtype=complex) -> np.ndarray:
        return np.zeros(self.shape + tuple(comp), dtype=dtype)

    def _check_dir(self, j):
        if not 0 <= j < self.n:
            raise IndexError(f"axis {j} out of range for n={self.n}")

    def _axes(self):
        return tuple(range(self.dim))

    # -- real-axis derivatives -------------------------------------------

    def _symbol(self, a, shape_len):
        s = [1] * shape_len
        s[a] = self.N
        return self._wavenumbers.reshape(s)

    def d(self, f: np.ndarray, a: int) -> np.ndarray:
        """First derivative along real axis ``a`` (0-based over x1, y1, ...)."""
        if self.backend == "fd4":
            return _fd4_first(f, a, self.h)
        fh = np.fft.fftn(f, axes=self._axes())
        return np.fft.ifftn(1j * self._symbol(a, f.ndim) * fh, axes=self._axes())

    def d2(self, f: np.ndarray, a: int, b: int) -> np.ndarray:
        """Second derivative along real axes ``a`` and ``b``."""
        if self.backend == "fd4":
            if a == b:
                return _fd4_second(f, a, self.h)
            return _fd4_first(_fd4_first(f, a, self.h), b, self.h)
        fh = np.fft.fftn(f, axes=self._axes())
        m = -self._symbol(a, f.ndim) * self._symbol(b, f.ndim)
        return np.fft.ifftn(m * fh, axes=self._axes())

    # -- Wirtinger derivatives --------------------------------------------

    def partial(self, f: np.ndarray, j: int, kind: str = HOLO) -> np.ndarray:
        """Wirtinger derivative ``d_j`` (holo) or ``d_jbar`` (anti) of ``f``.

        ``d_j = (d_xj - i d_yj) / 2`` and ``d_jbar = (d_xj + i d_yj) / 2``.
        Trailing component axes of ``f`` are carried through.
        """
        self._check_dir(j)
        if kind not in (HOLO, ANTI):
            raise ValueError(f"unknown derivative kind {kind!r}")
        sign = -1.0 if kind == HOLO else 1.0
        f = np.asarray(f, dtype=complex)
        if self.backend == "fd4":
            return 0.5 * (self.d(f, 2 * j) + sign * 1j * self.d(f, 2 * j + 1))
        fh = np.fft.fftn(f, axes=self._axes())
        m = self._wirtinger_symbol(j, sign, f.ndim)
        return np.fft.ifftn(m * fh, axes=self._axes())

    def _wirtinger_symbol(self, j, sign, ndim):
        kx = self._symbol(2 * j, ndim)
        ky = self._symbol(2 * j + 1, ndim)
        return 0.5 * (1j * kx + sign * 1j * (1j * ky))

    def grad(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """All first Wirtinger derivatives of ``f``.

        Returns ``(df, dbf)`` where ``df[..., i, <comps>] = d_i f`` and
        ``dbf[..., i, <comps>] = d_ibar f``; the derivative slot sits directly
        after the grid axes.
        """
        f = np.asarray(f, dtype=complex)
        if self.backend == "fd4":
            df = [self.partial(f, j, HOLO) for j in range(self.n)]
            dbf = [self.partial(f, j, ANTI) for j in range(self.n)]
        else:
            fh = np.fft.fftn(f, axes=self._axes())
            df, dbf = [], []
            for j in range(self.n):
                df.append(np.fft.ifftn(self._wirtinger_symbol(j, -1.0, f.ndim) * fh,
                                       axes=self._axes()))
                dbf.append(np.fft.ifftn(self._wirtinger_symbol(j, 1.0, f.ndim) * fh,
                                        axes=self._axes()))
        return np.stack(df, axis=self.dim), np.stack(dbf, axis=self.dim)

    def mixed_hessian(self, f: np.ndarray) -> np.ndarray:
        """``H[..., i, j, <comps>] = d_i d_jbar f``."""
        f = np.asarray(f, dtype=complex)
        n = self.n
        out = np.empty(self.shape + (n, n) + f.shape[self.dim:], dtype=complex)
        if self.backend == "fd4":
            for i in range(n):
                for j in range(n):
                    if i == j:
                        lap = self.d2(f, 2 * i, 2 * i) + self.d2(f, 2 * i + 1, 2 * i + 1)
                        out[(slice(None),) * self.dim + (i, j)] = 0.25 * lap
                    else:
                        out[(slice(None),) * self.dim + (i, j)] = self.partial(
                            self.partial(f, j, ANTI), i, HOLO)
            return out
        fh = np.fft.fftn(f, axes=self._axes())
        for i in range(n):
            mi = self._wirtinger_symbol(i, -1.0, f.ndim)
            for j in range(n):
                mj = self._wirtinger_symbol(j, 1.0, f.ndim)
                out[(slice(None),) * self.dim + (i, j)] = np.fft.ifftn(mi * mj * fh,
                                                                        axes=self._axes())
        return out

    def holo_hessian(self, f: np.ndarray, kind: str = HOLO) -> np.ndarray:
        """``H[..., i, j, <comps>] = d_i d_j f`` (or the barred version)."""
        f = np.asarray(f, dtype=complex)
        df = self.grad(f)[0 if kind == HOLO else 1]
        ddf = self.grad(df)[0 if kind == HOLO else 1]
        return ddf

    # -- quadrature ---------------------------------------------------------

    def integrate(self, f: np.ndarray, weight: np.ndarray | None = None) -> float:
        """Trapezoid rule ``h^(2n) * sum(f * weight)`` with exactly rounded summation."""
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} does not match lattice {self.shape}")
        vals = f if weight is None else f * weight
        if np.iscomplexobj(vals):
            re = math.fsum(np.real(vals).ravel().tolist())
            im = math.fsum(np.imag(vals).ravel().tolist())
            return complex(re, im) * self.cell_volume
        return math.fsum(vals.ravel().tolist()) * self.cell_volume
