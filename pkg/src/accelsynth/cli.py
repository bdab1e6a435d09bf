"""Command-line interface.

Exit codes: 0 on success, 2 when the requested rate is infeasible (the
reason is printed to stderr), 1 on errors (bad input, solver failure).
Every command writes machine-readable output (JSON, or CSV for sweeps) to
stdout.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import extremum as ext
from .analysis import AlgorithmRealization, CATALOG, FunctionClass, bisect_rate, catalog, certify, kron_expand
from .config import RunConfig, default_config
from .objectives import monte_carlo
from .sysops import StateSpace

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


class CliError(Exception):
    pass


class Infeasible(Exception):
    def __init__(self, reason: str, payload: dict | None = None):
        super().__init__(reason)
        self.payload = payload


# ---------------------------------------------------------------------------
# parsing helpers

def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _load_json(source: str):
    """Inline JSON, ``@path`` or a plain path."""
    text = source
    if source.startswith("@"):
        text = open(source[1:]).read()
    elif not source.lstrip().startswith(("{", "[")):
        text = open(source).read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON input: {exc}") from exc


def _function_class(args) -> FunctionClass:
    if getattr(args, "mf", None) is not None:
        return FunctionClass.structured(np.asarray(_load_json(args.mf), dtype=float),
                                        np.asarray(_load_json(args.lf), dtype=float))
    return FunctionClass(args.m, args.L, getattr(args, "dim", 1) or 1)


def _algorithm(args, fc: FunctionClass) -> AlgorithmRealization:
    spec = args.alg
    if spec in CATALOG:
        params = {}
        for key in ("alpha", "beta"):
            if getattr(args, key, None) is not None:
                params[key] = getattr(args, key)
        if spec == "triple_momentum":
            params.update(m=fc.m, L=fc.L)
        alg = catalog(spec, 1, fc if not fc.is_structured else None, **params)
        return kron_expand(alg, fc.d) if fc.d > 1 else alg
    data = _load_json(spec)
    if isinstance(data, dict) and "algorithm" in data:
        data = data["algorithm"]
    try:
        alg = AlgorithmRealization.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"cannot read algorithm: {exc}") from exc
    if alg.d != fc.d:
        alg = kron_expand(alg, fc.d)
    return alg


def _plant(source: str) -> ext.ExtremumPlant:
    """``named:<example>[:<param>]`` or JSON ``{"g1": {...}, "g2": {...}, "layout": ...}``."""
    if source.startswith("named:"):
        parts = source.split(":")
        name = parts[1]
        if name == "identity":
            return ext.identity_plant(int(parts[2]) if len(parts) > 2 else 1)
        if name not in ext.EXAMPLES:
            raise CliError(f"unknown named plant {name!r}; choose from identity, {', '.join(sorted(ext.EXAMPLES))}")
        if name == "mimo_sex3":
            return ext.mimo_sex3()
        if len(parts) < 3:
            raise CliError(f"named plant {name!r} needs a parameter, e.g. named:{name}:1")
        param = int(parts[2]) if name == "delay" else float(parts[2])
        return ext.EXAMPLES[name](param)
    data = _load_json(source)
    try:
        g1 = StateSpace.from_dict(data["g1"])
        g2 = StateSpace.from_dict(data["g2"]) if data.get("g2") else None
        return ext.ExtremumPlant(g1, g2, data.get("layout", "left"), data.get("name", "custom"))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"cannot read plant: {exc}") from exc


def _emit(obj, out):
    out.write(json.dumps(obj, indent=2, default=_jsonable))
    out.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


# ---------------------------------------------------------------------------
# commands

def cmd_rate(args, cfg, out):
    from .synthesis import optimal_rate

    rho = optimal_rate(FunctionClass(args.m, args.L), args.ell)
    out.write(f"{rho:.10g}\n")


def cmd_analyze(args, cfg, out):
    fc = _function_class(args)
    alg = _algorithm(args, fc)
    if args.bisect or args.rho is None:
        res = bisect_rate(alg, fc, args.ell, args.cls, tol=args.tol, cfg=cfg)
        payload = {"algorithm": alg.to_dict(), **res.to_dict()}
        if res.status == "no_certificate":
            raise Infeasible("no rate below one certified", payload)
        _emit(payload, out)
        return
    cert = certify(alg, fc, args.rho, args.ell, args.cls, cfg)
    if not cert.feasible:
        raise Infeasible(cert.message or cert.status, cert.to_dict())
    _emit(cert.to_dict(), out)


def cmd_synthesize(args, cfg, out):
    from .synthesis import bisect_synthesis_rate, optimal_rate, synthesize

    fc = _function_class(args)
    if args.optimal:
        if args.cls == "repeated" and not fc.is_structured:
            rho = optimal_rate(fc, args.ell) + args.slack
        else:
            res = bisect_synthesis_rate(fc, args.ell, args.cls, cfg=cfg)
            if res.status == "no_certificate":
                raise Infeasible("no rate below one certified")
            rho = min(res.rho_star + args.slack, 1 - 1e-4)
    elif args.rho is not None:
        rho = args.rho
    else:
        raise CliError("give --rho or --optimal")
    res = synthesize(fc, rho, args.ell, args.cls, route=args.route, cfg=cfg, simulate=args.simulate)
    if not res.feasible:
        raise Infeasible(res.design.message or f"rate {rho} is not achievable with ell={args.ell}", res.to_dict())
    _emit(res.to_dict(), out)


def cmd_extremum(args, cfg, out):
    ep = _plant(args.plant)
    fc = FunctionClass(args.m, args.L, ep.d)
    if args.bisect or args.rho is None:
        res = ext.bisect_extremum_rate(ep, fc, args.ell, args.tol, cfg=cfg)
        payload = {"plant": ep.name, "rho_star_upper_bound": res.rho_star, **res.to_dict()}
        if res.status == "no_certificate":
            raise Infeasible("no extremum control rate below one certified", payload)
        if args.controller:
            payload["controller"] = ext.assemble_near(ep, fc, res.rho_star, args.ell, cfg).to_dict()
        _emit(payload, out)
        return
    cert = ext.extremum_feasible(ep, fc, args.rho, args.ell, cfg)
    if not cert.feasible:
        raise Infeasible(cert.message or cert.status, cert.to_dict())
    payload = {"plant": ep.name, "certificate": cert.to_dict()}
    if args.controller:
        payload["controller"] = ext.assemble_extremum_controller(ep, fc, args.rho, cert.lambda_star, cfg).to_dict()
    _emit(payload, out)


def _sweep_cell(job):
    name, param, kappa, ell, tol, cfg = job
    return ext.example_harness(name, [param], [kappa], [ell], cfg, tol)


def cmd_sweep(args, cfg, out):
    if args.example not in ext.EXAMPLES:
        raise CliError(f"unknown example {args.example!r}; choose from {sorted(ext.EXAMPLES)}")
    if args.example == "delay":
        params = _ints(args.nu or "0,1,2")
    elif args.example == "pole_family":
        params = _floats(args.p or "0.2,0.8,0.9,1.1,1.2,2")
    else:
        params = [None]
    jobs = [(args.example, p, k, e, args.tol, cfg)
            for p in params for k in _floats(args.kappa) for e in _ints(args.ell)]
    workers = args.workers or cfg.workers
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_sweep_cell, jobs))
    else:
        chunks = [_sweep_cell(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    if args.format == "json":
        _emit(rows, out)
    else:
        out.write(ext.rows_to_csv(rows))


def cmd_simulate(args, cfg, out):
    if args.objective != "quadratic":
        raise CliError("only --objective quadratic is supported")
    fc = FunctionClass(1.0, float(args.kappa))
    alg = _algorithm(args, fc)
    if args.d:
        alg = kron_expand(alg, args.d)
    mc = monte_carlo(alg, fc, runs=args.seeds, seed=args.seed, horizon=args.horizon)
    payload = mc.to_dict()
    payload["kind"] = "empirical lower-bound witness"
    _emit(payload, out)


def cmd_dump_lmi(args, cfg, out):
    from .lmi.io import dump_problem

    fc = _function_class(args)
    if args.kind == "analysis":
        from .analysis import analysis_problem

        prob, _ = analysis_problem(_algorithm(args, fc), fc, args.rho, args.ell, args.cls)
    elif args.kind == "synthesis":
        from .synthesis import synthesis_problem

        prob, _ = synthesis_problem(fc, args.rho, args.ell, args.cls)
    elif args.kind == "pick":
        from .synthesis import pick_problem

        prob = pick_problem(fc, args.rho, args.ell)
    else:
        ep = _plant(args.plant)
        _, _, _, sp = ext._setup(ep, FunctionClass(args.m, args.L, ep.d), args.rho, args.ell)
        prob = ext.extremum_problem(sp, args.rho)
    out.write(dump_problem(prob))
    out.write("\n")


# ---------------------------------------------------------------------------
# argument parser

def _class_args(p, alg=False, rho_required=False):
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--L", type=float, default=10.0)
    p.add_argument("--mf", help="structured lower bound (JSON matrix)")
    p.add_argument("--lf", help="structured upper bound (JSON matrix)")
    p.add_argument("--dim", type=int, default=1, help="gradient dimension for unstructured classes")
    p.add_argument("--rho", type=float, required=rho_required)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--class", dest="cls", choices=("repeated", "full"), default="repeated")
    if alg:
        p.add_argument("--alg", default="gradient_descent", help="catalog name or algorithm JSON (inline, path or @path)")
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="accelsynth", description="Rate certification and synthesis of gradient algorithms.")
    parser.add_argument("--config", help="JSON config file (overrides ACCELSYNTH_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="closed-form optimal rate")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--ell", type=int, default=1)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("analyze", help="certify or bisect the rate of an algorithm")
    _class_args(p, alg=True)
    p.add_argument("--bisect", action="store_true")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesize", help="design an algorithm with a certified rate")
    _class_args(p)
    p.add_argument("--optimal", action="store_true", help="design at the optimal certifiable rate plus --slack")
    p.add_argument("--slack", type=float, default=1e-3)
    p.add_argument("--route", choices=("auto", "youla", "direct"), default="auto")
    p.add_argument("--simulate", type=int, default=0, help="Monte-Carlo runs on random quadratics")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("extremum", help="extremum control rate and controller")
    p.add_argument("--plant", required=True, help="named:<example>[:<param>] or plant JSON")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--L", type=float, default=10.0)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--rho", type=float)
    p.add_argument("--bisect", action="store_true")
    p.add_argument("--controller", action="store_true", help="also assemble the controller")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_extremum)

    p = sub.add_parser("sweep", help="extremum example sweeps")
    p.add_argument("--example", required=True)
    p.add_argument("--nu", help="delays for the delay example, e.g. 0,1,2")
    p.add_argument("--p", help="poles for the pole_family example")
    p.add_argument("--kappa", default="10,100")
    p.add_argument("--ell", default="1")
    p.add_argument("--tol", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="empirical rates on random quadratics")
    p.add_argument("--alg", required=True, help="catalog name or algorithm JSON")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--objective", default="quadratic")
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--d", type=int, default=0, help="fixed dimension (default: random 2..10)")
    p.add_argument("--seeds", type=int, default=100, help="number of runs")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--horizon", type=int, default=500)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dump-lmi", help="write the solver-agnostic LMI JSON")
    p.add_argument("--kind", choices=("analysis", "synthesis", "pick", "extremum"), default="analysis")
    _class_args(p, alg=True, rho_required=True)
    p.add_argument("--plant", default="named:identity")
    p.set_defaults(func=cmd_dump_lmi)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        cfg = RunConfig.from_file(args.config) if args.config else default_config()
        args.func(args, cfg, out)
    except Infeasible as exc:
        if exc.payload is not None:
            _emit(exc.payload, out)
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
