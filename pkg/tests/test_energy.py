import numpy as np
import pytest
from hypothesis import given, strategies as st

from hcflab import energy
from hcflab.chern import compute_package
from hcflab.fields import MetricField, trace11
from hcflab.lattice import Lattice
from hcflab.metrics import hermitian_perturbation

from conftest import sup


@pytest.fixture(scope="module")
def qp16(g16):
    return energy.compute_q(g16)


def test_trace_identity(g16, qp16):
    assert energy.trace_identity_residual(g16, qp16) < 1e-10


def test_corrupted_q2_breaks_trace_identity(g16):
    coeffs = list(energy.Q_COEFFS)
    coeffs[1] = -coeffs[1]
    qp = energy.compute_q(g16, coeffs=tuple(coeffs))
    assert energy.trace_identity_residual(g16, qp) > 1e-4


def test_q1_q3_positive_semidefinite(g16, qp16):
    m1, m3 = energy.min_q_eigenvalues(g16, qp16)
    assert m1 > -1e-14 and m3 > -1e-14


def test_q_tensors_hermitian(qp16):
    for X in (qp16.Q1, qp16.Q2, qp16.Q3, qp16.Q4, qp16.K):
        assert sup(X - np.conj(np.swapaxes(X, -1, -2))) < 1e-11


def test_k_is_trace_of_K(g16, qp16):
    assert sup(qp16.k - np.real(trace11(qp16.K, g16))) == 0.0


def test_functional_two_routes_agree(g16, qp16):
    assert energy.functional(g16) == pytest.approx(qp16.F_value, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_functional_scale_invariant(g16, c):
    assert abs(energy.functional(g16.scaled(c)) - energy.functional(g16)) < 1e-10


def test_flat_is_static(flat8):
    tensor, scalar = energy.static_residual(flat8)
    assert tensor == 0.0 and scalar == 0.0
    assert energy.functional(flat8) == 0.0


def test_perturbed_metric_is_not_static(g8):
    tensor, scalar = energy.static_residual(g8)
    assert tensor > 1e-3


@given(st.integers(0, 10_000), st.floats(0.0, 0.2))
def test_trace_identity_random(seed, amplitude):
    g = hermitian_perturbation(Lattice(1, 8), seed, amplitude, 1)
    qp = energy.compute_q(g)
    assert energy.trace_identity_residual(g, qp) < 1e-12
    m1, m3 = energy.min_q_eigenvalues(g, qp)
    assert min(m1, m3) > -1e-14


def test_field_wrapper(g8, lat8):
    f = energy.field(np.zeros(lat8.shape + (2, 2)), g8)
    assert f.sig == "ha"
