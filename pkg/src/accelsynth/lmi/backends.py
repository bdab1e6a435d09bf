"""Cross-check of the embedded solver with cvxpy (optional dependency).

Only used for validation; the package itself never requires cvxpy. The
formulation matches :mod:`accelsynth.lmi.solve`: maximize a uniform margin
on the strict inequalities inside the same norm box.
"""
from __future__ import annotations

import numpy as np

from ..config import RunConfig, default_config
from .expr import Problem


def available() -> bool:
    try:
        import cvxpy  # noqa: F401
    except ImportError:
        return False
    return True


def solve_cvxpy(problem: Problem, cfg: RunConfig | None = None, solver: str = "CLARABEL") -> dict:
    """Return ``{"status", "margin", "theta"}`` from an external conic solver.

    Only an ``optimal`` solver status is trusted, and a feasible answer
    must also pass a direct eigenvalue check of every strict constraint.
    """
    import cvxpy as cp

    cfg = cfg or default_config()
    nv = problem.nvars
    theta = cp.Variable(nv)
    t = cp.Variable()
    cons = [cp.abs(theta) <= cfg.r_var, t <= cfg.margin_cap]
    for con in problem.constraints:
        const, coef = problem.flat(con.expr)
        if const.size == 0:
            continue
        val = const + sum(coef[i] * theta[i] for i in range(nv) if np.any(coef[i]))
        if con.sense == "ge":
            cons.append(cp.reshape(val, (const.size,), order="C") >= 0)
            continue
        sign = 1.0 if con.sense in (">", ">=") else -1.0
        p = const.shape[0]
        mat = sign * val
        mat = 0.5 * (mat + mat.T)
        shift = t * np.eye(p) if con.sense in (">", "<") else 0
        cons.append(mat - shift >> 0)
    prob = cp.Problem(cp.Maximize(t), cons)
    prob.solve(solver=solver)
    margin = float(t.value) if t.value is not None else float("nan")
    th = None if theta.value is None else np.asarray(theta.value)
    status = "inconclusive"
    if prob.status == "optimal":
        if margin > cfg.tol_feas:
            slack = _strict_slack(problem, th)
            status = "feasible" if slack > 0 else "inconclusive"
        elif margin < -cfg.tol_feas:
            status = "infeasible"
    return {"status": status, "margin": margin, "solver_status": prob.status, "theta": th}


def _strict_slack(problem: Problem, theta) -> float:
    """Smallest eigenvalue slack of the strict constraints at ``theta``."""
    assign = problem.split(theta)
    worst = np.inf
    for con, (_, slack) in zip(problem.constraints, problem.check(assign)):
        if con.sense in (">", "<"):
            worst = min(worst, slack)
    return worst
