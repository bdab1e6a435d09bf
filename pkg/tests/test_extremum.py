import numpy as np
import pytest

from accelsynth.analysis import FunctionClass, structure_check
from accelsynth.extremum import (
    CSV_HEADER, ExtremumPlant, affinity_gap, assemble_extremum_controller, bisect_extremum_rate,
    build_generalized_plant, delay, example_harness, extremum_feasible, identity_plant, integrator_deficiency,
    kernel_basis, mimo_sex3, multiply_plant, pole_family, rows_to_csv, stabilizability_check, structured_plant,
    tf_matrix, tf_realization, weighted_generalized_plant, youla_factorization,
)
from accelsynth.multipliers import ZamesFalbParams
from accelsynth.sysops import (
    DimensionError, StateSpace, close_loop, frequency_response, is_schur, max_response_gap, sample_points, static,
)
from accelsynth.synthesis import synthesis_feasible, synthesize, weighted_plant

from conftest import random_ss

PLANTS = [identity_plant(), identity_plant(2), delay(1), delay(2), pole_family(0.5), pole_family(2.0)]


# -- plants -------------------------------------------------------------------

def test_delay_realization():
    g = delay(1).g1
    assert (g.a.tolist(), g.b.tolist(), g.c.tolist(), g.d.tolist()) == ([[0.0]], [[1.0]], [[1.0]], [[0.0]])
    for z in sample_points(5):
        assert abs(frequency_response(delay(3).g1, z)[0, 0] - z ** -3) < 1e-10


@pytest.mark.parametrize("ep", PLANTS, ids=lambda e: e.name + str(e.d))
def test_plant_state_count(ep):
    gp = build_generalized_plant(ep)
    assert gp.n == ep.d + ep.g1.n + (0 if ep.g2 is None else ep.g2.n)


def test_weighted_identity_plant():
    fc, rho = FunctionClass(1.0, 5.0), 0.8
    wp = weighted_generalized_plant(build_generalized_plant(identity_plant()), fc, rho)
    assert np.allclose(np.tril(wp.a, -1), 0)
    assert wp.a[0, 0] == pytest.approx(1 / rho)
    assert not wp.f.any()
    assert np.allclose(wp.c, [[1.0]])


def test_weighted_plant_matches_synthesis_plant():
    fc, rho = FunctionClass(1.0, 10.0), 0.75
    lam = ZamesFalbParams.repeated([1.0, -0.4], rho)
    wg = multiply_plant(weighted_generalized_plant(build_generalized_plant(identity_plant()), fc, rho), lam)
    ws = weighted_plant(fc, rho, lam)
    for f in ("a", "b1", "b", "c1", "d1", "e", "c", "f"):
        assert np.allclose(getattr(wg, f), getattr(ws, f)), f


def test_tf_realization_checks():
    g = tf_realization([1.0, -0.5], [1.0, 0.3, -0.1])
    for z in sample_points(5):
        assert abs(frequency_response(g, z)[0, 0] - (z - 0.5) / (z * z + 0.3 * z - 0.1)) < 1e-10
    with pytest.raises(ValueError):
        tf_realization([1.0, 0.0, 0.0], [1.0, 2.0])


def test_plant_validation():
    with pytest.raises(DimensionError):
        ExtremumPlant(static(np.eye(1)), StateSpace([[0.5]], [[1.0]], [[1.0]], [[1.0]]))
    with pytest.raises(DimensionError):
        ExtremumPlant(static(np.eye(1)), StateSpace([[0.5]], [[1.0, 1.0]], [[1.0]], [[0.0, 0.0]]))
    with pytest.raises(ValueError):
        ExtremumPlant(static(np.eye(1)), layout="middle")


# -- stabilizability --------------------------------------------------------

def test_stabilizability():
    assert stabilizability_check(identity_plant(), 0.9)
    assert stabilizability_check(pole_family(2.0), 0.9)
    zero_at_one = ExtremumPlant(tf_realization([1.0, -1.0], [1.0, -0.5]))
    rep = stabilizability_check(zero_at_one, 0.9)
    assert not rep and not rep.checks["rank"]
    assert "invariant zero" in rep.reasons[0]
    cert = extremum_feasible(zero_at_one, FunctionClass(1.0, 10.0), 0.95, 1)
    assert not cert.feasible


def test_unobservable_unstable_mode_fails():
    g = StateSpace(np.diag([0.5, 1.5]), [[1.0], [1.0]], [[1.0, 0.0]], [[1.0]])
    rep = stabilizability_check(ExtremumPlant(g), 0.9)
    assert not rep.checks["observable"]


# -- Youla factorization ------------------------------------------------------

@pytest.mark.parametrize("ep", PLANTS + [mimo_sex3()], ids=lambda e: e.name + str(e.d))
def test_youla_blocks_schur(ep):
    fc = FunctionClass(1.0, 10.0, ep.d)
    wp = weighted_generalized_plant(build_generalized_plant(ep), fc, 0.9)
    yb = youla_factorization(wp)
    for blk in (yb.t1, yb.t2, yb.t3):
        assert is_schur(blk.a)[0]
    assert np.array_equal(yb.t3.d, wp.f)


def test_youla_zero_parameter_is_observer_loop():
    fc, rho = FunctionClass(1.0, 10.0), 0.85
    wp = weighted_generalized_plant(build_generalized_plant(pole_family(0.5)), fc, rho)
    yb = youla_factorization(wp)
    a, b, c = wp.a, wp.b, wp.c
    k0 = StateSpace(a + b @ yb.gain_m + yb.gain_l @ c, -yb.gain_l, yb.gain_m, np.zeros((b.shape[1], c.shape[0])))
    assert max_response_gap(close_loop(wp, k0), yb.t1, sample_points(10)) < 1e-9


def test_youla_loop_is_affine_in_parameter(rng):
    fc, rho = FunctionClass(1.0, 10.0), 0.85
    wp = weighted_generalized_plant(build_generalized_plant(delay(1)), fc, rho)
    yb = youla_factorization(wp)
    z1, z2 = random_ss(rng, 2, 1, 1), random_ss(rng, 1, 1, 1)
    from accelsynth.sysops import parallel, scale

    mix = parallel(scale(z1, left=[[0.3]]), scale(z2, left=[[0.7]]))
    lhs = yb.loop(mix)
    rhs = parallel(scale(yb.loop(z1), left=[[0.3]]), scale(yb.loop(z2), left=[[0.7]]))
    assert max_response_gap(lhs, rhs, sample_points(8)) < 1e-9


# -- structured plant ---------------------------------------------------------

@pytest.mark.parametrize("ell", [0, 1, 3])
def test_structured_plant_layout(ell):
    fc, rho = FunctionClass(1.0, 10.0), 0.85
    yb = youla_factorization(weighted_generalized_plant(build_generalized_plant(pole_family(0.5)), fc, rho))
    sp = structured_plant(yb, ell)
    assert sp.nf == ell
    assert not sp.a[sp.n1:, :sp.n1].any()
    lam_a = ZamesFalbParams.repeated(np.r_[1.0, -0.1 * np.ones(ell)], rho)
    lam_b = ZamesFalbParams.repeated(np.r_[2.0, -0.3 * np.ones(ell)], rho)
    assert affinity_gap(sp, lam_a, lam_b) < 1e-12
    # annihilator of [B^T E^T] contains every first-part state direction
    v = kernel_basis(np.hstack([sp.b.T, sp.e.T]))
    e1 = np.zeros((v.shape[0], sp.n1))
    e1[: sp.n1] = np.eye(sp.n1)
    assert np.linalg.matrix_rank(np.hstack([v, e1]), 1e-9) == v.shape[1]


# -- synthesis conditions -------------------------------------------------------

def test_identity_plant_boundary():
    fc = FunctionClass(1.0, 100.0)
    assert extremum_feasible(identity_plant(), fc, 0.905, 1).feasible
    assert not extremum_feasible(identity_plant(), fc, 0.895, 1).feasible


def test_identity_plant_matches_algorithm_synthesis():
    for kappa in (4.0, 10.0):
        fc = FunctionClass(1.0, kappa)
        edge = 1 - 1 / np.sqrt(kappa)
        for rho in (edge - 0.05, edge - 0.01, edge + 0.01, edge + 0.05):
            a = extremum_feasible(identity_plant(), fc, rho, 1)
            b = synthesis_feasible(fc, rho, 1)
            # near the edge either side may be inconclusive; certificates must agree
            assert a.feasible == b.feasible, (kappa, rho)


def test_delay_ordering_and_bracket():
    fc = FunctionClass(1.0, 10.0)
    rates = [bisect_extremum_rate(delay(nu), fc, 1, tol=1e-3).rho_star for nu in (0, 1, 2)]
    assert rates[0] <= rates[1] <= rates[2]
    assert rates[0] == pytest.approx(1 - 1 / np.sqrt(10), abs=5e-3)


def test_unstable_pole_saturates():
    res = bisect_extremum_rate(pole_family(2.0), FunctionClass(1.0, 10.0), 1, tol=1e-2)
    assert res.status == "no_certificate"
    assert res.rho_star == pytest.approx(1.1)


# -- controller assembly --------------------------------------------------------

def test_identity_controller_equals_synthesized_algorithm():
    fc, rho = FunctionClass(1.0, 10.0), 0.75
    res = synthesize(fc, rho, 1, route="direct")
    ctrl = assemble_extremum_controller(identity_plant(), fc, rho, res.design.lambda_star)
    assert max_response_gap(ctrl.algorithm.system, res.algorithm.system, sample_points(10)) < 1e-6
    assert ctrl.k2 is None
    assert integrator_deficiency(ctrl.loop) == 1
    assert ctrl.certificate.feasible


def test_delay_controller_has_integrator():
    fc = FunctionClass(1.0, 10.0)
    cert = extremum_feasible(delay(1), fc, 0.85, 1)
    assert cert.feasible
    ctrl = assemble_extremum_controller(delay(1), fc, 0.85, cert.lambda_star)
    assert integrator_deficiency(ctrl.loop) == 1
    structure_check(ctrl.loop)
    assert ctrl.k1.d.shape == (1, 1)
    assert abs(ctrl.k1.d[0, 0]) < 1e-12
    data = ctrl.to_dict()
    assert data["K2"] is None and data["certificate"]["status"] == "feasible"


def test_auxiliary_output_controller():
    g2 = StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]])
    ep = ExtremumPlant(static([[1.0]]), g2, name="aux")
    fc = FunctionClass(1.0, 10.0)
    cert = extremum_feasible(ep, fc, 0.75, 1)
    assert cert.feasible
    ctrl = assemble_extremum_controller(ep, fc, 0.75, cert.lambda_star)
    assert ctrl.k2 is not None and ctrl.k2.inputs == 1


# -- harness ------------------------------------------------------------------------

def test_harness_rows_and_csv():
    rows = example_harness("delay", [0], [10.0], [0, 1], tol=1e-2)
    assert len(rows) == 2
    text = rows_to_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "example,param,kappa,ell,rho_star,status,margin"
    assert len(lines) == 3
    assert rows[1]["rho_star"] <= rows[0]["rho_star"] + 1e-2
    with pytest.raises(KeyError):
        example_harness("nope", [0], [10.0], [1])


def test_harness_records_failures():
    rows = example_harness("pole_family", [2.0], [10.0], [0], tol=5e-2)
    assert rows[0]["status"] == "no_certificate"


def test_mimo_example_plant():
    ep = mimo_sex3()
    assert ep.layout == "right" and ep.d == 2
    assert stabilizability_check(ep, 0.9)
    g = tf_matrix([[([1.0], [1.0, -0.5])]])
    assert g.n == 1


@pytest.mark.slow
def test_mimo_rate_bracket():
    ep = mimo_sex3()
    fc = FunctionClass(1.0, 2.0, 2)
    res = bisect_extremum_rate(ep, fc, 1, tol=5e-3)
    assert res.status == "ok"
    assert 1 - 1 / np.sqrt(2) - 5e-3 <= res.rho_star < 1
