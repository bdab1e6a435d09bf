"""Solver-agnostic JSON form of a :class:`Problem`.

Every constraint is stored as ``const`` plus one coefficient stack per
variable, in the flat parametrization used by :class:`Var`. Loading
rebuilds the problem verbatim (multiplier admissibility rows included), so
external solvers can be fed the exact same data.
"""
from __future__ import annotations

import json

import numpy as np

from .expr import Constraint, Expr, LmiError, Problem, Var

FORMAT = "accelsynth-lmi/1"


def _var_dict(var: Var) -> dict:
    out = {"name": var.name, "kind": var.kind, "shape": list(var.shape), "size": var.size}
    if var.kind == "zf":
        out.update(class_tag=var.class_tag, ell=var.ell, rho=float(var.rho),
                   base=None if var.base is None else var.base.tolist())
    return out


def _expr_dict(expr: Expr) -> dict:
    return {"const": expr.const.tolist(), "shape": list(expr.shape),
            "coefs": {k: np.moveaxis(v, 2, 0).tolist() for k, v in expr.coefs.items()}}


def problem_to_dict(problem: Problem) -> dict:
    out = {
        "format": FORMAT,
        "name": problem.name,
        "variables": [_var_dict(v) for v in problem.variables.values()],
        "constraints": [{"label": c.label, "sense": c.sense, **_expr_dict(c.expr)} for c in problem.constraints],
        "objective": None,
    }
    if problem.objective is not None:
        direction, obj = problem.objective
        out["objective"] = {"direction": direction, **_expr_dict(obj)}
    return out


def _expr_from(data: dict, variables: dict) -> Expr:
    shape = tuple(data["shape"])
    const = np.asarray(data["const"], dtype=float).reshape(shape)
    coefs = {}
    for name, c in data["coefs"].items():
        if name not in variables:
            raise LmiError(f"unknown variable {name!r} in constraint")
        arr = np.asarray(c, dtype=float).reshape((variables[name].size,) + shape)
        coefs[name] = np.moveaxis(arr, 0, 2)
    return Expr(const, coefs, {k: variables[k] for k in coefs})


def problem_from_dict(data: dict) -> Problem:
    if data.get("format") != FORMAT:
        raise LmiError(f"unsupported problem format {data.get('format')!r}")
    prob = Problem(name=data.get("name", ""))
    for v in data["variables"]:
        kw = {}
        if v["kind"] == "zf":
            kw = {"class_tag": v["class_tag"], "ell": int(v["ell"]), "rho": float(v["rho"]), "base": v.get("base")}
        prob._add(Var(v["name"], v["kind"], tuple(v["shape"]), **kw))
    for c in data["constraints"]:
        prob.constraints.append(Constraint(_expr_from(c, prob.variables), c["sense"], c.get("label", "")))
    if data.get("objective"):
        obj = data["objective"]
        prob.set_objective(obj["direction"], _expr_from(obj, prob.variables))
    return prob


def dump_problem(problem: Problem, path=None) -> str:
    text = json.dumps(problem_to_dict(problem))
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_problem(source) -> Problem:
    """From a path, a JSON string or an already parsed dict."""
    if isinstance(source, dict):
        return problem_from_dict(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        with open(text) as fh:
            text = fh.read()
    return problem_from_dict(json.loads(text))
