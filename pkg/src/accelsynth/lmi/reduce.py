"""Kronecker-structure reduction ``M (x) I_d -> M``.

When every data matrix of a problem has the form ``M (x) I_d`` one may
restrict the decision variables to the same form without loss; the
constraint matrices are then ``F (x) I_d`` and only ``F`` has to be
checked. This shrinks block sizes by a factor ``d``.
"""
from __future__ import annotations

import numpy as np

from .expr import Expr, LmiError, Problem, _svec_index


class StructureError(LmiError):
    pass


def _embedding(var, d: int) -> tuple[np.ndarray, tuple]:
    """Matrix ``P`` with ``theta_big = P theta_small`` and the reduced shape."""
    if var.kind == "zf":
        if d > 1 and var.class_tag != "repeated":
            raise StructureError(f"multiplier {var.name!r}: full class has no Kronecker structure")
        return np.eye(var.size), (1, 1)
    r, c = var.shape
    if r % d or c % d:
        raise StructureError(f"variable {var.name!r} of shape {var.shape} is not divisible by {d}")
    rs, cs = r // d, c // d
    if var.kind == "sym":
        big = {ij: t for t, ij in enumerate(_svec_index(r))}
        small = _svec_index(rs)
        p = np.zeros((var.size, len(small)))
        for t, (a, b) in enumerate(small):
            for s in range(d):
                p[big[(a * d + s, b * d + s)], t] = 1.0
        return p, (rs, rs)
    p = np.zeros((r * c, rs * cs))
    for a in range(rs):
        for b in range(cs):
            for s in range(d):
                p[(a * d + s) * c + (b * d + s), a * cs + b] = 1.0
    return p, (rs, cs)


def _factor(m: np.ndarray, d: int, tol: float, what: str) -> np.ndarray:
    r, c = m.shape
    if r % d or c % d:
        raise StructureError(f"{what}: shape {m.shape} not divisible by {d}")
    small = m[::d, ::d]
    scale = 1.0 + np.abs(m).max(initial=0.0)
    if np.abs(np.kron(small, np.eye(d)) - m).max(initial=0.0) > tol * scale:
        raise StructureError(f"{what}: data is not of the form M (x) I_{d}")
    return small


def structural_kron_reduce(problem: Problem, d: int, tol: float = 1e-9):
    """Return ``(reduced_problem, expand)``; ``expand(theta_small) -> theta_big``."""
    if d == 1:
        return problem, lambda theta: dict(theta)
    maps = {}
    out = Problem(name=problem.name)
    for name, var in problem.variables.items():
        p, shape = _embedding(var, d)
        maps[name] = p
        if var.kind == "sym":
            out.sym(name, shape[0])
        elif var.kind == "general":
            out.general(name, *shape)
        else:
            base = None if var.base is None else _factor(var.base, d, tol, f"{name}.base")
            # constraints of the multiplier set are re-added by zf(); skip the originals below
            out.zf(name, var.ell, 1, var.rho, var.class_tag, base)
    new_vars = out.variables
    for con in problem.constraints:
        if con.sense == "ge" and con.label.endswith(" admissible") and len(con.expr.coefs) == 1:
            (vname,) = con.expr.coefs
            if problem.variables[vname].kind == "zf":
                continue
        coefs = {k: np.einsum("pqk,kt->pqt", v, maps[k]) for k, v in con.expr.coefs.items()}
        if con.sense == "ge":
            expr = Expr(con.expr.const, coefs, {k: new_vars[k] for k in coefs})
        else:
            what = con.label or "constraint"
            const = _factor(con.expr.const, d, tol, what)
            red = {k: np.stack([_factor(v[:, :, t], d, tol, what) for t in range(v.shape[2])], axis=2)
                   if v.shape[2] else np.zeros(const.shape + (0,)) for k, v in coefs.items()}
            expr = Expr(const, red, {k: new_vars[k] for k in red})
        out.add(expr, con.sense, con.label)
    if problem.objective is not None:
        direction, obj = problem.objective
        coefs = {k: np.einsum("pqk,kt->pqt", v, maps[k]) for k, v in obj.coefs.items()}
        out.set_objective(direction, Expr(obj.const, coefs, {k: new_vars[k] for k in coefs}))

    def expand(theta_small: dict) -> dict:
        return {k: maps[k] @ np.asarray(theta_small[k], dtype=float) for k in maps}

    return out, expand
