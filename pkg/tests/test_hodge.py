import numpy as np
import pytest

from hcflab import hodge
from hcflab.chern import compute_package
from hcflab.energy import q_tensors
from hcflab.lattice import Lattice
from hcflab.metrics import kahler_potential, random_tensor


def test_form_shape_checked(lat8):
    with pytest.raises(ValueError):
        hodge.FormField(np.zeros(lat8.shape + (2,)), 1, 1, lat8)


def test_kahler_form_is_real(g8):
    assert hodge.kahler_form(g8).reality_defect() == 0.0


def test_coordinate_adjoints_match_generic_adjoints(g16):
    om = hodge.kahler_form(g16)
    assert (hodge.del_star_omega(g16) - hodge.del_star(om, g16)).sup() < 1e-12
    assert (hodge.del_star_del_omega(g16)
            - hodge.del_star(hodge.del_form(om), g16)).sup() < 1e-10
    assert (hodge.del_del_star_omega(g16)
            - hodge.del_form(hodge.del_star_omega(g16))).sup() < 1e-10


def test_ddbar_log_det_two_routes(g16):
    assert (hodge.ddbar_log_det(g16) - hodge.ddbar_log_det_direct(g16)).sup() < 1e-10


def test_del_star_is_adjoint_of_del(g8, lat8):
    a = hodge.FormField(random_tensor(lat8, 1, 1, 2), 0, 1, lat8)
    b = hodge.FormField(random_tensor(lat8, 2, 2, 2), 1, 1, lat8)
    lhs = hodge.l2_inner(hodge.del_form(a), b, g8)
    rhs = hodge.l2_inner(a, hodge.del_star(b, g8), g8)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_w_is_constant_multiple_of_dbar_star_omega(g16):
    c = hodge.w_constant(g16)
    assert abs(c - hodge.W_CONSTANT) < 1e-12
    pkg = compute_package(g16)
    assert np.max(np.abs(pkg.w - c * hodge.delbar_star_omega(g16).data)) < 1e-12


def test_w_constant_needs_nonkahler(lat16):
    with pytest.raises(ZeroDivisionError):
        hodge.w_constant(hodge.MetricField.flat(lat16))


def test_decomposition_holds_on_kahler_data(lat16):
    g = kahler_potential(lat16, 3, 0.05, 1)
    assert hodge.check_hodgedecomp(g) < 1e-10
    assert hodge.check_hcf_form_equation(g) < 1e-10


def test_decomposition_residual_on_hermitian_data(g16):
    # Measured relation on non-Kahler data: Xi - Psi = (i/2)(2 Q4 - Q2 / 2).
    pkg = compute_package(g16)
    _, q2, _, q4 = q_tensors(pkg)
    measured = hodge.xi(g16, pkg).data - hodge.psi(g16).data - hodge.I2 * (2 * q4 - 0.5 * q2)
    assert np.max(np.abs(measured)) < 1e-10
    assert hodge.check_hodgedecomp(g16, pkg) > 1e-2


def test_n2_torsion_identities(g16):
    q1, q2, q3, q4 = q_tensors(compute_package(g16))
    assert np.max(np.abs(q2 - 2 * q4)) < 1e-14
