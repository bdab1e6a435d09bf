"""Feasibility decisions for :class:`~accelsynth.lmi.expr.Problem`.

Strict inequalities are closed by maximizing a uniform margin ``t``::

    F(theta) >= t I   for every '>' constraint
    F(theta) <= -t I  for every '<' constraint
    |theta_i| <= r_var, t <= margin_cap

The answer is ``feasible`` iff the optimal ``t`` exceeds ``tol_feas``. It is
``infeasible`` iff ``t < -tol_feas``, or ``t <= tol_feas`` while the box
multipliers vanish: the dual then certifies that no bounded or unbounded
point attains a positive margin, which is the typical situation for
homogeneous strict LMIs whose optimal margin is exactly zero. A primal
iterate whose objective (plus a residual correction) is below ``-tol_feas``
also proves infeasibility within the box, which covers runs where the
duality gap stalls on badly scaled problems. Primal points from re-solves
with a smaller box are valid for the same bound, since only the box prices
change; they help when the maximizer drifts towards very large variables.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..config import RunConfig, default_config
from ..multipliers import is_member
from .expr import LmiError, Problem
from .ipm import SdpData, _aop, solve_sdp

FEASIBLE, INFEASIBLE, INCONCLUSIVE = "feasible", "infeasible", "inconclusive"


@dataclass
class SdpSolution:
    status: str
    assignment: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    margin: float = float("nan")
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    message: str = ""
    seconds: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def value(self, expr):
        return expr.evaluate(self.theta)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.assignment.items():
            out[k] = v.to_dict() if hasattr(v, "to_dict") else np.asarray(v).tolist()
        return {
            "status": self.status,
            "margin": self.margin,
            "iterations": self.iterations,
            "residuals": self.residuals,
            "message": self.message,
            "assignment": out,
        }


def build_sdp(problem: Problem, cfg: RunConfig, fixed_margin: float | None = None):
    """Translate ``problem`` to :class:`SdpData`. Returns data and row bookkeeping."""
    nv = problem.nvars
    with_t = fixed_margin is None
    k = nv + (1 if with_t else 0)
    c_blocks, a_blocks = [], []
    lp_c, lp_a = [], []
    for con in problem.constraints:
        const, coef = problem.flat(con.expr)
        if const.size == 0:
            continue
        if con.sense == "ge":
            rows = const.reshape(-1)
            a = -coef.reshape(nv, -1).T
            if with_t:
                a = np.hstack([a, np.zeros((a.shape[0], 1))])
            lp_c.append(rows)
            lp_a.append(a)
            continue
        sign = 1.0 if con.sense in (">", ">=") else -1.0
        c = sign * const
        a = -sign * coef
        strict = con.sense in (">", "<")
        p = const.shape[0]
        if with_t:
            extra = (np.eye(p) if strict else np.zeros((p, p)))[None]
            a = np.concatenate([a, extra], axis=0)
        elif strict:
            c = c - fixed_margin * np.eye(p)
        c_blocks.append(0.5 * (c + c.T))
        a_blocks.append(0.5 * (a + a.transpose(0, 2, 1)))
    nlp_user = sum(len(c) for c in lp_c)
    # box on every scalar
    box = np.zeros((2 * nv, k))
    box[:nv, :nv] = np.eye(nv)
    box[nv:, :nv] = -np.eye(nv)
    lp_c.append(cfg.r_var * np.ones(2 * nv))
    lp_a.append(box)
    if with_t:
        cap = np.zeros((1, k))
        cap[0, -1] = 1.0
        lp_c.append(np.array([cfg.margin_cap]))
        lp_a.append(cap)
    b = np.zeros(k)
    if with_t:
        b[-1] = 1.0
    else:
        direction, obj = problem.objective
        _, ocoef = problem.flat(obj)
        b[:nv] = ocoef.reshape(nv) * (1.0 if direction == "max" else -1.0)
    data = SdpData(c_blocks, a_blocks, np.concatenate(lp_c), np.vstack(lp_a), b)
    return data, {"nlp_user": nlp_user, "nbox": 2 * nv}


def _polish_multipliers(problem: Problem, theta: dict) -> dict:
    """Push multiplier parameters that sit within round-off outside the set back in."""
    out = dict(theta)
    for name, var in problem.variables.items():
        if var.kind != "zf":
            continue
        gen = var.generators()
        th = np.array(theta[name], dtype=float)
        if np.all(gen.g @ th >= 0):
            continue
        d = var.d if var.class_tag == "full" else 1
        blocks = [b.copy() for b in (gen.unpack(th) if var.class_tag == "full" else [np.array([[x]]) for x in th])]
        lam0 = blocks[-1]
        off = ~np.eye(d, dtype=bool)
        lam0[off] = np.minimum(lam0[off], 0.0)
        for b in blocks[:-1]:
            np.minimum(b, 0.0, out=b)
        coeffs = blocks[::-1]
        rows = sum(l * var.rho**i for i, l in enumerate(coeffs)) @ np.ones(d)
        cols = np.ones(d) @ sum(l * var.rho ** (-i) for i, l in enumerate(coeffs))
        short = max(0.0, -min(rows.min(), cols.min()))
        if short > 0:
            lam0 += (short * (1 + 1e-9) + 1e-15) * np.eye(d)
        out[name] = np.concatenate([b.ravel() for b in blocks]) if var.class_tag == "full" else np.array([b[0, 0] for b in blocks])
    return out


def _assignment(problem: Problem, theta: dict) -> dict:
    return {name: var.value(theta[name]) for name, var in problem.variables.items()}


def _primal_bound(data: SdpData, xs, x_lp, nv: int, cfg: RunConfig) -> float:
    """Upper bound on the best margin from any PSD primal point ``(xs, x_lp)``."""
    rp = data.b - _aop(data, xs, x_lp)
    pobj = sum(float(np.vdot(c, x)) for c, x in zip(data.c_blocks, xs)) + float(data.c_lp @ x_lp)
    return pobj + cfg.r_var * float(np.abs(rp[:nv]).sum()) + max(cfg.margin_cap, 1.0) * abs(rp[-1])


def _repaired_bound(data: SdpData, xs, x_lp, nv: int, cfg: RunConfig, steps: int = 6) -> float:
    """Bound after driving the equality residual of ``xs`` to zero on its rank manifold.

    Each block is kept in the form ``W (S + D)^-1 W^T`` with
    ``W = V_r (S + D) + V_0 E^T``, which is PSD whenever ``S + D > 0``; a few
    least-norm Gauss-Newton steps in ``(D, E)``, with or without the positive
    LP entries, cancel the residual. Every evaluated point is PSD, so the
    smallest bound found is valid.
    """
    best = float("inf")
    for frac, use_lp in itertools.product((1e-3, 1e-6, 1e-9), (True, False)):
        cur, lp = [x.copy() for x in xs], x_lp.copy()
        lp_on = lp > frac * max(lp.max(initial=0.0), 1e-300) if lp.size and use_lp else np.zeros(lp.size, bool)
        for _ in range(steps):
            rp = data.b - _aop(data, cur, lp)
            cols, parts = [], []
            for a, x in zip(data.a_blocks, cur):
                w, v = np.linalg.eigh(0.5 * (x + x.T))
                keep = w > frac * max(w.max(initial=0.0), 1e-300)
                vr, v0 = v[:, keep], v[:, ~keep]
                iu = np.triu_indices(vr.shape[1])
                prr = np.einsum("pa,ipq,qb->iab", vr, a, vr)
                pr0 = np.einsum("pa,ipq,qb->iab", vr, a, v0)
                cols.append(prr[:, iu[0], iu[1]] * np.where(iu[0] == iu[1], 1.0, 2.0))
                cols.append(2.0 * pr0.reshape(data.k, -1))
                parts.append((vr, v0, w[keep], iu))
            if lp_on.any():
                cols.append(data.a_lp[lp_on].T)
            delta = np.linalg.lstsq(np.hstack(cols), rp, rcond=None)[0]
            nxt, pos, ok = [], 0, True
            for vr, v0, wk, iu in parts:
                r, r0 = vr.shape[1], v0.shape[1]
                dm = np.zeros((r, r))
                dm[iu] = delta[pos:pos + len(iu[0])]
                pos += len(iu[0])
                e = delta[pos:pos + r * r0].reshape(r, r0)
                pos += r * r0
                core = np.diag(wk) + dm + np.triu(dm, 1).T
                if r and np.linalg.eigvalsh(core).min() <= 0:
                    ok = False
                    break
                wmat = vr @ core + v0 @ e.T
                nxt.append(wmat @ np.linalg.solve(core, wmat.T) if r else np.zeros_like(vr @ vr.T))
            if not ok:
                break
            new_lp = lp.copy()
            if lp_on.any():
                new_lp[lp_on] += delta[pos:]
                if new_lp.min() < 0:
                    break
            cur, lp = [0.5 * (x + x.T) for x in nxt], new_lp
            best = min(best, _primal_bound(data, cur, lp, nv, cfg))
    return best


def _converged(res) -> bool:
    return res.status == "optimal" or max(res.gap, res.pinf, res.dinf) < 1e-6


def solve(problem: Problem, cfg: RunConfig | None = None, fixed_margin: float | None = None) -> SdpSolution:
    """Decide strict feasibility of ``problem`` with the embedded interior-point solver.

    If ``problem.objective`` is set, the margin is fixed to ``fixed_margin``
    (default ``10 * tol_feas``) and the objective is optimized instead.
    """
    cfg = cfg or default_config()
    if not problem.constraints:
        raise LmiError("problem has no constraints")
    start = time.perf_counter()
    if problem.objective is not None and fixed_margin is None:
        fixed_margin = 10 * cfg.tol_feas
    data, info = build_sdp(problem, cfg, fixed_margin)
    res = solve_sdp(data, max_iter=cfg.max_iter)
    nv = problem.nvars
    theta = problem.split(res.y[:nv])
    theta = _polish_multipliers(problem, theta)
    slacks = problem.check(theta)
    strict = [s for (lab, s), con in zip(slacks, problem.constraints) if con.sense in (">", "<")]
    weak = [s for (lab, s), con in zip(slacks, problem.constraints) if con.sense in (">=", "<=", "ge")]
    t_ipm = float(res.y[-1]) if fixed_margin is None else fixed_margin
    margin = min(strict) if strict else t_ipm
    weak_ok = all(s >= -1e-9 for s in weak)
    nlp = info["nlp_user"]
    box_dual = float(res.x_lp[nlp:nlp + info["nbox"]].sum()) if res.x_lp.size else 0.0
    residuals = {
        "ipm_status": res.status,
        "gap": res.gap,
        "pinf": res.pinf,
        "dinf": res.dinf,
        "t_ipm": t_ipm,
        "box_dual": box_dual,
        "max_abs_theta": float(np.abs(res.y[:nv]).max(initial=0.0)),
    }
    converged = _converged(res)
    feasible = margin > cfg.tol_feas and weak_ok and (fixed_margin is None or margin >= fixed_margin - 1e-8)
    bound, infeasible = float("inf"), False
    if fixed_margin is None and not feasible:
        # weak duality: a PSD primal iterate bounds the best margin from above even when
        # the gap stalls; the residual term uses |theta| <= r_var and |t| <= max(cap, 1)
        bound = _primal_bound(data, res.x_blocks, res.x_lp, nv, cfg)
        infeasible = bound < -cfg.tol_feas or converged and (
            t_ipm < -cfg.tol_feas or (t_ipm <= cfg.tol_feas and cfg.r_var * box_dual <= cfg.tol_feas))
        # when the maximizer drifts towards the box the primal residual is priced at
        # r_var; smaller boxes give cleaner primal points that stay valid here once
        # their box multipliers are priced at r_var, and each point can be repaired
        # towards zero residual
        cand = res
        for shrink in (None, 1e-1, 1e-2):
            if infeasible or t_ipm > cfg.tol_feas:
                break
            if shrink is not None:
                small, _ = build_sdp(problem, replace(cfg, r_var=cfg.r_var * shrink), None)
                cand = solve_sdp(small, max_iter=cfg.max_iter)
                bound = min(bound, _primal_bound(data, cand.x_blocks, cand.x_lp, nv, cfg))
                box_c = float(cand.x_lp[nlp:nlp + info["nbox"]].sum()) if cand.x_lp.size else 0.0
                infeasible = _converged(cand) and cand.y[-1] <= cfg.tol_feas and cfg.r_var * box_c <= cfg.tol_feas
            if not infeasible and bound >= -cfg.tol_feas and t_ipm < -cfg.tol_feas:
                bound = min(bound, _repaired_bound(data, cand.x_blocks, cand.x_lp, nv, cfg))
            infeasible = infeasible or bound < -cfg.tol_feas
    residuals["primal_bound"] = bound
    if feasible:
        status, msg = FEASIBLE, ""
    elif infeasible:
        status, msg = INFEASIBLE, "no positive margin"
    else:
        status = INCONCLUSIVE
        if not converged:
            msg = f"interior-point method did not converge ({res.status})"
        elif residuals["max_abs_theta"] > 0.99 * cfg.r_var:
            msg = "variables hit the norm bound; possibly unbounded"
        else:
            msg = f"margin {margin:.3e} within tolerance band"
    if status == FEASIBLE:
        for name, var in problem.variables.items():
            if var.kind == "zf":
                ok, why = is_member(var.raw_value(theta[name]))
                if not ok:
                    status, msg = INCONCLUSIVE, f"multiplier {name} not admissible: {why}"
    return SdpSolution(
        status=status,
        assignment=_assignment(problem, theta),
        theta=theta,
        margin=float(margin),
        iterations=res.iterations,
        residuals=residuals,
        message=msg,
        seconds=time.perf_counter() - start,
    )


def solve_structured(problem: Problem, d: int, cfg: RunConfig | None = None, reduce: bool = True) -> SdpSolution:
    """Solve after a Kronecker reduction when the data allow it; results refer to ``problem``."""
    from .reduce import StructureError, structural_kron_reduce

    if not reduce or d == 1:
        return solve(problem, cfg)
    try:
        small, expand = structural_kron_reduce(problem, d)
    except StructureError:
        return solve(problem, cfg)
    sol = solve(small, cfg)
    theta = expand(sol.theta)
    sol.theta = theta
    sol.assignment = _assignment(problem, theta)
    sol.residuals["reduced_from_d"] = d
    return sol
