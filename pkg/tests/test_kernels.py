import numpy as np
import pytest

from hcflab import chern, energy
from hcflab.fields import MetricField
from hcflab.kernels import (FlowKernel, GridOps, PositivityError, frame_norm2,
                            to_comp_first, to_grid_first)
from hcflab.lattice import ANTI, HOLO, Lattice
from hcflab.metrics import hermitian_perturbation, random_tensor

from conftest import sup


# Band-limited data at N=16 is resolved to roundoff by the spectral backend,
# so routes that differ only by where the product rule is applied agree.
# Under fd4 they agree to truncation error only.
NORM_RTOL = {"spectral": 1e-9, "fd4": 1e-2}


@pytest.fixture(scope="module", params=["spectral", "fd4"])
def pair(request):
    lat = Lattice(2, 16, request.param)
    g = hermitian_perturbation(lat, 5, 0.05, 1)
    ev = FlowKernel(lat).evaluate(to_comp_first(g.g, 2), diagnostics=True)
    return g, ev


def test_layout_roundtrip(lat8):
    a = random_tensor(lat8, 0, 3)
    assert np.array_equal(to_grid_first(to_comp_first(a, 3), 3), a)


@pytest.mark.parametrize("backend", ["spectral", "fd4"])
def test_gridops_matches_lattice(backend):
    lat = Lattice(2, 8, backend)
    f = random_tensor(lat, 2, 0)
    ops = GridOps(lat)
    rep = ops.prep(f)
    for j in range(2):
        assert sup(ops.grad(rep, "h")[j] - lat.partial(f, j, HOLO)) < 1e-11
        assert sup(ops.grad(rep, "a")[j] - lat.partial(f, j, ANTI)) < 1e-11


def test_core_matches_modules(pair):
    g, ev = pair
    pkg = chern.compute_package(g)
    qp = energy.compute_q(g, pkg)
    tol = 1e-11
    assert sup(to_grid_first(ev.gi, 2) - g.inv) < tol
    assert sup(ev.det - g.det) < tol
    assert sup(to_grid_first(ev.T, 3) - pkg.torsion) < tol
    assert sup(to_grid_first(ev.w, 1) - pkg.w) < tol
    S = pkg.S_closed_form
    assert sup(to_grid_first(ev.S, 2) - S) < tol
    for name in ("Q1", "Q2", "Q3", "Q4", "Q"):
        assert sup(to_grid_first(getattr(ev, name), 2) - getattr(qp, name)) < tol
    assert sup(to_grid_first(ev.K, 2) - (S - qp.Q)) < tol


def test_diagnostic_norms_match_modules(pair):
    g, ev = pair
    pkg = chern.compute_package(g)
    d = ev.diag
    rel = NORM_RTOL[g.lattice.backend]
    assert d["sup_T"] == pytest.approx(np.max(chern.torsion_norm(pkg)), rel=1e-11)
    assert d["sup_omega"] == pytest.approx(np.max(chern.curvature_norm(pkg)), rel=rel)
    assert d["sup_nabla_T"] == pytest.approx(np.max(chern.nabla_torsion_norm(pkg)), rel=rel)
    assert d["sup_nabla_omega"] == pytest.approx(np.max(chern.nabla_omega_norm(pkg)), rel=rel)
    assert sup(to_grid_first(d["omega"], 4) - pkg.omega) < rel


def test_frame_norm_matches_metric_contraction(g8, lat8):
    from hcflab.fields import TensorField, norm2
    x = random_tensor(lat8, 4, 3)
    ref = norm2(TensorField(x, "hha", lat8), g8)
    ev = FlowKernel(lat8).evaluate(to_comp_first(g8.g, 2))
    assert sup(frame_norm2(to_comp_first(x, 3), "hha", ev.Li) - ref) < 1e-12


def test_negative_metric_raises(lat8):
    G = to_comp_first(-MetricField.flat(lat8).g, 2)
    with pytest.raises(PositivityError):
        FlowKernel(lat8).evaluate(G)


def test_second_torsion_vanishes_on_flat(lat8):
    G = to_comp_first(MetricField.flat(lat8).g, 2)
    ev = FlowKernel(lat8).evaluate(G, diagnostics=True, second_torsion=True)
    assert ev.diag["sup_nabla2_T"] == 0.0
