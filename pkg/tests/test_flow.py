import math

import numpy as np
import pytest

from hcflab import flow
from hcflab.flow import FlowSpec, evolve, rhs
from hcflab.metrics import flat, kahler_potential

from conftest import sup


@pytest.fixture(scope="module")
def short_run(g8):
    spec = FlowSpec(variant="HCF_normalized", t_max=0.03, output_interval=0.01, cfl=0.3)
    return evolve(g8, spec)


@pytest.mark.parametrize("variant", flow.VARIANTS)
def test_flat_is_fixed(flat8, variant):
    assert sup(rhs(flat8, variant)) < 1e-14


def test_normalized_fixes_scaled_flat(lat8):
    assert sup(rhs(flat(lat8, 2.5), "HCF_normalized")) < 1e-13


def test_rhs_is_hermitian(g8):
    X = rhs(g8, "HCF")
    assert np.array_equal(X, np.conj(np.swapaxes(X, -1, -2)))


def test_hcf_equals_krf_on_kahler(kahler8):
    assert sup(rhs(kahler8, "HCF") - rhs(kahler8, "KRF")) < 1e-12


def test_krf_rejects_hermitian_data(g8):
    with pytest.raises(ValueError, match="Kähler"):
        rhs(g8, "KRF")
    with pytest.raises(ValueError):
        evolve(g8, FlowSpec(variant="KRF", max_steps=1))


def test_time_reversal(g8):
    # one RK4 step there and back leaves an O(dt^5) defect
    d1 = flow.time_reversal_defect(g8, 2e-3)
    d2 = flow.time_reversal_defect(g8, 1e-3)
    assert d2 < 1e-10
    assert d1 / d2 > 16.0


@pytest.mark.parametrize("kw", [dict(variant="RF"), dict(safety=0.0), dict(safety=1.5),
                                dict(cfl=-1.0), dict(t_max=0.0), dict(max_steps=-1),
                                dict(output_interval=0.0)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        FlowSpec(**kw)


def test_flat_converges_immediately(flat8):
    res = evolve(flat8, FlowSpec())
    assert res.outcome == "static_converged"
    assert res.final.step == 0 and len(res.trajectory) == 1


def test_outputs_land_on_interval(short_run):
    ts = [s.t for s in short_run.outputs]
    assert ts == [0.0, 0.01, 0.02, 0.03]
    assert all(s.ev is None for s in short_run.outputs)
    assert short_run.final.ev is not None
    assert short_run.outcome == "reached_tmax"


def test_steps_respect_limits(short_run):
    rows = short_run.trajectory
    for prev, row in zip(rows, rows[1:]):
        assert row["t"] == pytest.approx(prev["t"] + row["dt"], abs=1e-15)
        assert row["dt"] <= 0.3 * (1 / 8) ** 2 * prev["min_eig"] * (1 + 1e-12)
        assert row["dt"] <= 0.1 / prev["K_scale"] * (1 + 1e-12)


def test_normalized_conserves_volume(short_run):
    vols = np.array([r["volume"] for r in short_run.trajectory])
    # conserved exactly by the flow, to RK4 truncation by the integrator
    assert np.max(np.abs(vols - vols[0])) < 1e-8


def test_curvature_decays(short_run):
    om = [r["sup_omega"] for r in short_run.trajectory]
    assert om[-1] < om[0]


def test_max_steps(g8):
    res = evolve(g8, FlowSpec(max_steps=2))
    assert res.outcome == "max_steps" and res.final.step == 2


def test_blowup_threshold(g8):
    res = evolve(g8, FlowSpec(stop_threshold=1e-3))
    assert res.outcome == "blowup" and res.final.step == 0


def test_blowup_dt_min(g8):
    res = evolve(g8, FlowSpec(dt_min=1.0))
    assert res.outcome == "blowup"


def test_on_output_callback(g8):
    seen = []
    evolve(g8, FlowSpec(max_steps=3), on_output=lambda st: seen.append(st.step))
    assert seen == [0, 3]


def test_state_is_read_only(short_run):
    with pytest.raises(ValueError):
        short_run.final.G[0, 0, 0, 0, 0, 0] = 1.0


def test_kahler_stays_kahler(lat8):
    g = kahler_potential(lat8, 3, 0.02, 1)
    res = evolve(g, FlowSpec(max_steps=5))
    assert max(r["sup_T"] for r in res.trajectory) < 1e-5


def _rows(ts, vals, k0=1.0):
    return [{"t": t, "K_scale": k0, "sup_nabla_omega": v, "sup_nabla2_T": v}
            for t, v in zip(ts, vals)]


def test_smoothing_monitor_bounded():
    ts = np.linspace(0, 1, 11)
    vals = np.exp(-ts) / np.sqrt(ts + 0.01)
    mon = flow.smoothing_monitor(_rows(ts, vals))
    assert mon["bounded_omega"] and mon["bounded_T2"]
    assert mon["max_omega"] == pytest.approx(np.max(np.sqrt(ts) * vals))


def test_smoothing_monitor_growth():
    ts = np.linspace(0, 1, 11)
    mon = flow.smoothing_monitor(_rows(ts, np.exp(ts)))
    assert mon["bounded_omega"] is False


def test_smoothing_monitor_missing_column():
    mon = flow.smoothing_monitor(_rows([0.0, 1.0], [math.nan, math.nan]))
    assert math.isnan(mon["max_T2"]) and mon["bounded_T2"] is None


def test_adversarial_start_never_accepts_invalid_metric(lat8):
    # large high-frequency data: the run is smoothed rather than blowing up,
    # and no accepted state loses positivity
    from hcflab.metrics import hermitian_perturbation
    g = hermitian_perturbation(lat8, 0, 0.9, 3)
    res = evolve(g, FlowSpec(max_steps=60))
    assert res.outcome in flow.OUTCOMES
    assert min(r["min_eig"] for r in res.trajectory) > 0.0
    assert res.trajectory[-1]["K_scale"] < res.trajectory[0]["K_scale"]
