import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hcflab.lattice import ANTI, HOLO, Lattice


def plane_wave(lat, k):
    """exp(2 pi i k.x) on the grid, k over the 2n real axes."""
    xs = lat.coords()
    phase = sum(kk * x for kk, x in zip(k, xs))
    return np.exp(2j * np.pi * phase)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        Lattice(0, 8)
    with pytest.raises(ValueError):
        Lattice(2, 7)
    with pytest.raises(ValueError):
        Lattice(2, 8, "chebyshev")


def test_shape_and_cell_volume():
    lat = Lattice(2, 8)
    assert lat.shape == (8, 8, 8, 8)
    assert lat.cell_volume == pytest.approx(8.0 ** -4)
    assert lat.integrate(np.ones(lat.shape)) == pytest.approx(1.0, abs=1e-15)


@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4))
def test_spectral_wirtinger_on_plane_waves(k):
    lat = Lattice(2, 8)
    f = plane_wave(lat, k)
    df, dbf = lat.grad(f)
    for j in range(2):
        kx, ky = 2 * np.pi * k[2 * j], 2 * np.pi * k[2 * j + 1]
        # d_z = (d_x - i d_y)/2, d_zbar = (d_x + i d_y)/2
        assert np.allclose(df[..., j], 0.5 * (1j * kx + ky) * f, atol=1e-10)
        assert np.allclose(dbf[..., j], 0.5 * (1j * kx - ky) * f, atol=1e-10)


def test_fd4_converges_at_fourth_order():
    errs = []
    for N in (16, 32):
        lat = Lattice(1, N, "fd4")
        f = plane_wave(lat, (1, 0))
        errs.append(np.max(np.abs(lat.d(f, 0) - 2j * np.pi * f)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.2)


@pytest.mark.parametrize("backend", ["spectral", "fd4"])
def test_mixed_hessian_matches_composed_derivatives_off_diagonal(backend):
    lat = Lattice(2, 8, backend)
    f = plane_wave(lat, (1, -1, 2, 0)) + plane_wave(lat, (0, 1, 1, 1))
    H = lat.mixed_hessian(f)
    composed = lat.grad(lat.grad(f)[1])[0]          # [i, j] = d_i d_jbar
    assert np.allclose(H[..., 0, 1], composed[..., 0, 1], atol=1e-9)
    if backend == "spectral":
        assert np.allclose(H, composed, atol=1e-9)


def test_partial_kinds_agree_with_grad():
    lat = Lattice(2, 8)
    f = plane_wave(lat, (1, 2, 0, -1))
    df, dbf = lat.grad(f)
    assert np.allclose(lat.partial(f, 1, HOLO), df[..., 1])
    assert np.allclose(lat.partial(f, 0, ANTI), dbf[..., 0])


@given(st.integers(0, 2 ** 31 - 1))
def test_integral_of_derivative_vanishes(seed):
    lat = Lattice(2, 8)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape)
    df, dbf = lat.grad(f)
    for j in range(2):
        assert abs(lat.integrate(df[..., j])) < 1e-12
        assert abs(lat.integrate(dbf[..., j])) < 1e-12
