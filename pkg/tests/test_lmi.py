import numpy as np
import pytest
from hypothesis import given, strategies as st

from accelsynth import lmi
from accelsynth.analysis import FunctionClass, analysis_problem, catalog
from accelsynth.config import RunConfig
from accelsynth.lmi import backends
from accelsynth.sysops import StateSpace
from conftest import stein_instance, witness_ok


def scalar_problem(upper=2.0):
    prob = lmi.Problem()
    x = prob.sym("x", 1)
    prob.add(x.expr, ">")
    prob.add(x.expr - upper * np.eye(1), "<")
    return prob


# -- expressions -------------------------------------------------------------

def test_affinity_of_expressions(rng):
    prob = lmi.Problem()
    x = prob.sym("X", 3)
    w = prob.general("W", 3, 2)
    a = rng.standard_normal((3, 3))
    e = lmi.bmat([[a.T @ x.expr @ a - x.expr, w.expr], [w.expr.T, -np.eye(2)]])
    for _ in range(10):
        t1, t2 = rng.standard_normal(prob.nvars), rng.standard_normal(prob.nvars)
        al = rng.uniform()
        v1, v2 = e.evaluate(prob.split(t1)), e.evaluate(prob.split(t2))
        vm = e.evaluate(prob.split(al * t1 + (1 - al) * t2))
        assert np.allclose(vm, al * v1 + (1 - al) * v2, atol=1e-12)


def test_undeclared_variable_rejected():
    p1, p2 = lmi.Problem(), lmi.Problem()
    x = p1.sym("X", 2)
    with pytest.raises(lmi.LmiError):
        p2.add(x.expr, ">")
    with pytest.raises(lmi.LmiError):
        p1.sym("X", 2)


def test_nonsymmetric_rejected():
    prob = lmi.Problem()
    w = prob.general("W", 2, 2)
    with pytest.raises(lmi.LmiError):
        prob.add(w.expr, ">")


# -- solver ------------------------------------------------------------------

def test_interval_feasible():
    sol = lmi.solve(scalar_problem())
    assert sol.status == lmi.FEASIBLE
    assert 0 < sol.assignment["x"][0, 0] < 2


def test_sign_conflict_infeasible():
    prob = lmi.Problem()
    x = prob.sym("x", 1)
    prob.add(x.expr, ">")
    prob.add(-x.expr, ">")
    assert lmi.solve(prob).status == lmi.INFEASIBLE


@pytest.mark.parametrize("a,expect", [(0.5, True), (1.5, False)])
def test_stein_scalar(a, expect):
    prob = lmi.Problem()
    x = prob.sym("x", 1)
    prob.add(x.expr, ">")
    prob.add(a * a * x.expr - x.expr, "<")
    assert lmi.solve(prob).feasible == expect


def test_stein_battery_small():
    rng = np.random.default_rng(7)
    for _ in range(30):
        prob, a, truth = stein_instance(rng)
        sol = lmi.solve(prob)
        assert sol.status != lmi.INCONCLUSIVE
        assert sol.feasible == truth
        if sol.feasible:
            assert witness_ok(a, sol.assignment["X"])


def test_feasible_margin_reverified(rng):
    for _ in range(10):
        prob, a, truth = stein_instance(rng)
        sol = lmi.solve(prob)
        if sol.feasible:
            slacks = [s for _, s in prob.check(sol.theta)]
            assert min(slacks) >= sol.margin - 1e-8


def test_box_bound_respected():
    cfg = RunConfig(r_var=10.0)
    prob = lmi.Problem()
    x = prob.sym("x", 1)
    prob.add(x.expr - 5 * np.eye(1), ">")
    assert lmi.solve(prob, cfg).feasible
    prob2 = lmi.Problem()
    y = prob2.sym("x", 1)
    prob2.add(y.expr - 20 * np.eye(1), ">")
    assert not lmi.solve(prob2, cfg).feasible


# -- KYP ---------------------------------------------------------------------

def snr_problem(g):
    prob = lmi.Problem()
    n = g.n
    if n:
        x = prob.sym("X", n)
        prob.add(x.expr, ">")
        prob.add(lmi.kyp_constraint(g, x.expr), "<")
    else:
        prob.add(lmi.Expr.lift(g.d + g.d.T), "<")
    return prob


def test_kyp_static_negative():
    e = lmi.kyp_expr(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[-1.0]], np.zeros((0, 0)))
    assert np.allclose(e.const, [[-2.0]])


def _grid_snr(a, b, c, d):
    """Brute force: some x > 0 on a grid makes the 2x2 KYP matrix negative definite."""
    for x in np.linspace(0.01, 5, 500):
        m = np.array([[a * a * x - x, a * x * b + c], [b * x * a + c, b * b * x + 2 * d]])
        if np.linalg.eigvalsh(m).max() < 0:
            return True
    return False


def test_kyp_snr_examples():
    # 1/(z - 0.5) - 1 equals 1 at z = 1, so a unit negative feedthrough is not enough
    weak = StateSpace([[0.5]], [[1.0]], [[1.0]], [[-1.0]])
    assert not _grid_snr(0.5, 1.0, 1.0, -1.0)
    assert not lmi.solve(snr_problem(weak)).feasible
    assert lmi.snr_frequency_margin(weak) > 0
    assert _grid_snr(0.5, 1.0, 1.0, -3.0)
    assert lmi.solve(snr_problem(StateSpace([[0.5]], [[1.0]], [[1.0]], [[-3.0]]))).feasible
    plus = StateSpace([[0.5]], [[1.0]], [[1.0]], [[1.0]])
    assert not lmi.solve(snr_problem(plus)).feasible
    assert lmi.snr_frequency_margin(plus) >= 0


# -- structural reduction ----------------------------------------------------

def test_reduce_identity_for_d1():
    prob = scalar_problem()
    red, expand = lmi.structural_kron_reduce(prob, 1)
    assert red is prob


def test_reduce_gradient_descent_d3():
    fc3 = FunctionClass(1.0, 10.0, 3)
    fc1 = FunctionClass(1.0, 10.0, 1)
    alg3 = catalog("gradient_descent", 3, fc3, alpha=2 / 11)
    alg1 = catalog("gradient_descent", 1, fc1, alpha=2 / 11)
    p3, _ = analysis_problem(alg3, fc3, 0.83, 0)
    p1, _ = analysis_problem(alg1, fc1, 0.83, 0)
    red, expand = lmi.structural_kron_reduce(p3, 3)
    s_red, s_one = lmi.solve(red), lmi.solve(p1)
    assert s_red.feasible and s_one.feasible
    assert abs(s_red.margin - s_one.margin) < 1e-6
    big = expand(s_red.theta)
    assert min(s for _, s in p3.check(big)) > 0


def test_reduce_detects_structure_violation(rng):
    prob = lmi.Problem()
    x = prob.sym("X", 2)
    prob.add(x.expr - np.diag([1.0, 2.0]), ">")
    with pytest.raises(lmi.StructureError):
        lmi.structural_kron_reduce(prob, 2)


# -- serialization / cross-check ---------------------------------------------

def test_problem_json_roundtrip():
    alg = catalog("triple_momentum", m=1.0, L=10.0)
    prob, _ = analysis_problem(alg, FunctionClass(1.0, 10.0), 0.7, 2)
    back = lmi.load_problem(lmi.dump_problem(prob))
    assert list(back.variables) == list(prob.variables)
    assert [c.label for c in back.constraints] == [c.label for c in prob.constraints]
    theta = np.random.default_rng(0).standard_normal(prob.nvars)
    for c1, c2 in zip(prob.constraints, back.constraints):
        assert np.allclose(c1.expr.evaluate(prob.split(theta)), c2.expr.evaluate(back.split(theta)))
    s1, s2 = lmi.solve(prob), lmi.solve(back)
    assert s1.status == s2.status and np.isclose(s1.margin, s2.margin, rtol=1e-8)


def test_load_rejects_unknown_format():
    with pytest.raises(lmi.LmiError):
        lmi.load_problem({"format": "other"})


@pytest.mark.skipif(not backends.available(), reason="cvxpy not installed")
@pytest.mark.parametrize("rho,expect", [(0.65, True), (0.55, False)])
def test_external_backend_agrees(rho, expect):
    alg = catalog("gradient_descent", alpha=0.4)
    prob, _ = analysis_problem(alg, FunctionClass(1.0, 4.0), rho, 0)
    ext = backends.solve_cvxpy(prob)
    assert lmi.solve(prob).feasible == expect
    assert (ext["status"] == "feasible") == expect


@given(st.floats(0.05, 0.95))
def test_stein_monotone_in_radius(r):
    prob = lmi.Problem()
    x = prob.sym("x", 1)
    prob.add(x.expr, ">")
    prob.add((r * r - 1) * x.expr, "<")
    assert lmi.solve(prob).feasible
