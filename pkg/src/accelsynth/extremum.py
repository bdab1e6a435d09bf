"""Extremum control: algorithms acting through given plant dynamics.

A controller ``u = K1 w + K2 v`` is designed for a system ``z = G1 u``,
``v = G2 u`` such that ``z`` converges to the minimizer of any ``f`` in the
function class with ``w = grad f(z)``. The integrator required by the
structure theorem is placed in front of the gradient channel and the rest
of the controller is synthesized with a Youla parametrization and a
change of variables that keeps the conditions convex in the multiplier.

``layout='right'`` covers the variant where the controller output itself is
optimized, ``z = u``, and the gradient reaches the controller through a
filter ``G1`` followed by the integrator.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import lmi
from .analysis import (
    AlgorithmRealization,
    BisectionResult,
    FunctionClass,
    RateCertificate,
    bisect,
    bisect_rate,
    certify,
    structure_check,
)
from .config import RunConfig, default_config
from .multipliers import ZamesFalbParams, build_fir, fir_shift
from .synthesis import ReconstructionError, normalize_multiplier, reconstruct_on
from .sysops import (
    DimensionError,
    GeneralizedPlant,
    StateSpace,
    block_rank,
    close_loop,
    frequency_response,
    hautus,
    integrator,
    is_schur,
    kernel_basis,
    minreal,
    parallel,
    sample_points,
    scale,
    series,
    static,
    subsystem,
)

SATURATION = 1.1
EXTERNAL_THEOREM = "full multipliers for diagonally repeated gradients rely on an external multiplier theorem"


class ExtremumError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# plants

@dataclass(frozen=True, eq=False)
class ExtremumPlant:
    """Given dynamics around the gradient oracle.

    ``layout='left'``: ``z = G1 u``, ``v = G2 u`` (``G2`` optional, strictly proper).
    ``layout='right'``: ``z = u`` and the controller measures ``H_d G1 w``.
    """

    g1: StateSpace
    g2: StateSpace | None = None
    layout: str = "left"
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.layout not in ("left", "right"):
            raise ValueError("layout must be 'left' or 'right'")
        if self.g2 is not None:
            if self.layout == "right":
                raise DimensionError("the right layout has no auxiliary output")
            if self.g2.inputs != self.g1.inputs:
                raise DimensionError("G1 and G2 must share the input u")
            if np.abs(self.g2.d).max(initial=0.0) > 0:
                raise DimensionError("G2 must be strictly proper")
        if self.layout == "right" and self.g1.inputs != self.g1.outputs:
            raise DimensionError("the gradient filter must be square")

    @property
    def d(self) -> int:
        return self.g1.outputs

    @property
    def nu(self) -> int:
        return self.g1.inputs if self.layout == "left" else self.d

    @property
    def nv(self) -> int:
        return 0 if self.g2 is None else self.g2.outputs

    def realization(self):
        """``(A_G, B_G, C_G1, D_G1, C_G2)`` with shared state."""
        g1, g2 = self.g1, self.g2
        if g2 is None:
            return g1.a, g1.b, g1.c, g1.d, np.zeros((0, g1.n))
        a = sla.block_diag(g1.a, g2.a)
        b = np.vstack([g1.b, g2.b])
        c1 = np.hstack([g1.c, np.zeros((g1.outputs, g2.n))])
        c2 = np.hstack([np.zeros((g2.outputs, g1.n)), g2.c])
        return a, b, c1, g1.d, c2


def build_generalized_plant(ep: ExtremumPlant) -> GeneralizedPlant:
    """Plant with the integrator state first; measurement ``y = (eta, v)``."""
    ag, bg, cg1, dg1, cg2 = ep.realization()
    d, ng, nv = ep.d, ag.shape[0], ep.nv
    eye = np.eye(d)
    if ep.layout == "left":
        a = sla.block_diag(eye, ag)
        b1 = np.vstack([eye, np.zeros((ng, d))])
        b = np.vstack([np.zeros((d, ep.nu)), bg])
        c1 = np.hstack([np.zeros((d, d)), cg1])
        e = dg1
        c = np.block([[eye, np.zeros((d, ng))], [np.zeros((nv, d)), cg2]])
    else:
        a = np.block([[eye, cg1], [np.zeros((ng, d)), ag]])
        b1 = np.vstack([dg1, bg])
        b = np.zeros((d + ng, d))
        c1 = np.zeros((d, d + ng))
        e = eye
        c = np.hstack([eye, np.zeros((d, ng))])
    return GeneralizedPlant(a, b1, b, c1, np.zeros((d, d)), e, c, np.zeros((c.shape[0], d)))


def _bounds(fc: FunctionClass, d: int):
    if fc.is_structured:
        if fc.d != d:
            raise DimensionError("structured class does not match the gradient dimension")
        return fc.lower, fc.spread
    return fc.m * np.eye(d), (fc.L - fc.m) * np.eye(d)


def weighted_generalized_plant(plant: GeneralizedPlant, fc: FunctionClass, rho: float) -> GeneralizedPlant:
    """Loop transformation by the lower bound, output scaling by the spread, and rate weighting."""
    d = plant.d1.shape[0]
    lo, spread = _bounds(fc, d)
    return GeneralizedPlant(
        (plant.a + plant.b1 @ lo @ plant.c1) / rho,
        plant.b1 / rho,
        (plant.b + plant.b1 @ lo @ plant.e) / rho,
        spread @ plant.c1,
        -np.eye(d),
        spread @ plant.e,
        plant.c,
        plant.f,
    )


def multiply_plant(plant: GeneralizedPlant, lam: ZamesFalbParams) -> GeneralizedPlant:
    """Filter the performance output of ``plant`` by ``Pi(lam)``."""
    fir = build_fir(lam)
    nf, n = fir.n, plant.n
    ny = plant.c.shape[0]
    return GeneralizedPlant(
        np.block([[fir.a, fir.b @ plant.c1], [np.zeros((n, nf)), plant.a]]),
        np.vstack([fir.b @ plant.d1, plant.b1]),
        np.vstack([fir.b @ plant.e, plant.b]),
        np.hstack([fir.c, fir.d @ plant.c1]),
        fir.d @ plant.d1,
        fir.d @ plant.e,
        np.hstack([np.zeros((ny, nf)), plant.c]),
        plant.f,
    )


# ---------------------------------------------------------------------------
# stabilizability

@dataclass
class StabilizabilityReport:
    ok: bool
    reasons: list
    checks: dict

    def __bool__(self) -> bool:
        return self.ok


def stabilizability_check(ep: ExtremumPlant, rho: float, tol: float = 1e-9) -> StabilizabilityReport:
    """Existence of a stabilizing controller for the weighted generalized plant."""
    reasons, checks = [], {}
    if ep.layout == "left":
        ag, bg, cg1, dg1, cg2 = ep.realization()
        ng = ag.shape[0]
        cg = np.vstack([cg1, cg2])
        checks["controllable"] = hautus(ag, bg, "stabilizable", rho, tol)
        checks["observable"] = hautus(ag, cg, "detectable", rho, tol)
        rank_m = np.block([[ag - np.eye(ng), bg], [cg1, dg1]])
        checks["rank"] = block_rank(rank_m, tol) == ng + ep.d
        if ep.d > ep.nu:
            reasons.append(f"G1 has more outputs ({ep.d}) than inputs ({ep.nu})")
        if not checks["controllable"]:
            reasons.append(f"(A_G, B_G) has an uncontrollable mode with modulus >= {rho:g}")
        if not checks["observable"]:
            reasons.append(f"(A_G, C_G) has an unobservable mode with modulus >= {rho:g}")
        if not checks["rank"]:
            reasons.append("[A_G - I, B_G; C_G1, D_G1] lacks full row rank (invariant zero at 1)")
    else:
        wp = weighted_generalized_plant(build_generalized_plant(ep), FunctionClass(1.0, 2.0, ep.d), rho)
        checks["controllable"] = hautus(wp.a, wp.b, "stabilizable", 1.0, tol)
        checks["observable"] = hautus(wp.a, wp.c, "detectable", 1.0, tol)
        if not checks["controllable"]:
            reasons.append("weighted plant is not stabilizable")
        if not checks["observable"]:
            reasons.append("weighted plant is not detectable")
    return StabilizabilityReport(not reasons, reasons, checks)


# ---------------------------------------------------------------------------
# Youla parametrization

@dataclass(frozen=True, eq=False)
class YoulaBlocks:
    """Stable ``T1, T2, T3`` with all stabilized loops equal to ``T1 + T2 Z T3``."""

    a: np.ndarray
    bw: np.ndarray
    cz: np.ndarray
    cy: np.ndarray
    t2: StateSpace
    dzw: np.ndarray
    fyw: np.ndarray
    gain_m: np.ndarray
    gain_l: np.ndarray

    @property
    def t1(self) -> StateSpace:
        return StateSpace(self.a, self.bw, self.cz, self.dzw)

    @property
    def t3(self) -> StateSpace:
        return StateSpace(self.a, self.bw, self.cy, self.fyw)

    def loop(self, z: StateSpace) -> StateSpace:
        """``T1 + T2 Z T3``."""
        return parallel(self.t1, series(self.t2, series(z, self.t3)))


def youla_factorization(wp: GeneralizedPlant, weights: str = "riccati") -> YoulaBlocks:
    """Observer-based parametrization with unit-weight LQR/Kalman gains."""
    if weights != "riccati":
        raise ValueError("only Riccati gains are implemented")
    a, b, c = wp.a, wp.b, wp.c
    n = a.shape[0]
    nu, ny = b.shape[1], c.shape[0]
    try:
        p = sla.solve_discrete_are(a, b, np.eye(n), np.eye(nu))
        s = sla.solve_discrete_are(a.T, c.T, np.eye(n), np.eye(ny))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ExtremumError(f"Riccati equation failed ({exc}); plant is not stabilizable/detectable") from exc
    gm = -np.linalg.solve(np.eye(nu) + b.T @ p @ b, b.T @ p @ a)
    gl = -a @ s @ c.T @ np.linalg.inv(np.eye(ny) + c @ s @ c.T)
    for what, mat in (("A + B M", a + b @ gm), ("A + L C", a + gl @ c)):
        ok, radius = is_schur(mat, 1e-12)
        if not ok:
            raise ExtremumError(f"{what} is not Schur (radius {radius:.6g})")
    at = np.block([[a + b @ gm, -b @ gm], [np.zeros((n, n)), a + gl @ c]])
    bw = np.vstack([wp.b1, wp.b1 + gl @ wp.f])
    cz = np.hstack([wp.c1 + wp.e @ gm, -wp.e @ gm])
    cy = np.hstack([np.zeros((ny, n)), c])
    t2 = StateSpace(a + b @ gm, b, wp.c1 + wp.e @ gm, wp.e)
    return YoulaBlocks(at, bw, cz, cy, t2, wp.d1, wp.f, gm, gl)


@dataclass(frozen=True, eq=False)
class ExtremumSynthesisPlant:
    """Plant of ``Pi(Lam) T1 + T2 Z T3`` split into a ``w``-driven and a ``u``-driven part."""

    a1: np.ndarray
    a2: np.ndarray
    b11: np.ndarray
    b22: np.ndarray
    cz: np.ndarray
    c12: np.ndarray
    dzw: np.ndarray
    e: np.ndarray
    c21: np.ndarray
    f: np.ndarray
    nf: int
    ell: int
    d: int

    @property
    def n1(self) -> int:
        return self.a1.shape[0]

    @property
    def n2(self) -> int:
        return self.a2.shape[0]

    @property
    def a(self) -> np.ndarray:
        return sla.block_diag(self.a1, self.a2)

    @property
    def b1(self) -> np.ndarray:
        return np.vstack([self.b11, np.zeros((self.n2, self.b11.shape[1]))])

    @property
    def b(self) -> np.ndarray:
        return np.vstack([np.zeros((self.n1, self.b22.shape[1])), self.b22])

    @property
    def c(self) -> np.ndarray:
        return np.hstack([self.c21, np.zeros((self.c21.shape[0], self.n2))])

    def c11(self, cf, df):
        """``[C_f(Lam), D_f(Lam) C_z]``; affine in the multiplier."""
        tail = df @ self.cz
        return lmi.hstack([cf, tail]) if self.nf else tail

    def d1(self, df):
        return df @ self.dzw

    def at(self, lam: ZamesFalbParams) -> GeneralizedPlant:
        cf = np.hstack(lam.blocks[:-1]) if lam.ell else np.zeros((lam.d, 0))
        df = lam.blocks[-1]
        c11 = np.hstack([cf, df @ self.cz])
        return GeneralizedPlant(self.a, self.b1, self.b, np.hstack([c11, self.c12]), df @ self.dzw,
                                self.e, self.c, self.f)


def structured_plant(yb: YoulaBlocks, ell: int) -> ExtremumSynthesisPlant:
    d = yb.cz.shape[0]
    af, bf = fir_shift(ell, d)
    nf, nt = af.shape[0], yb.a.shape[0]
    a1 = np.block([[af, bf @ yb.cz], [np.zeros((nt, nf)), yb.a]])
    b11 = np.vstack([bf @ yb.dzw, yb.bw])
    c21 = np.hstack([np.zeros((yb.cy.shape[0], nf)), yb.cy])
    return ExtremumSynthesisPlant(a1, yb.t2.a, b11, yb.t2.b, yb.cz, yb.t2.c, yb.dzw, yb.t2.d, c21, yb.fyw, nf, ell, d)


def affinity_gap(sp: ExtremumSynthesisPlant, lam_a: ZamesFalbParams, lam_b: ZamesFalbParams, t: float = 0.37) -> float:
    """Deviation of the Lam-dependent plant matrices from affinity between two multipliers."""
    mix = ZamesFalbParams(tuple((1 - t) * a + t * b for a, b in zip(lam_a.blocks, lam_b.blocks)), lam_a.rho, lam_a.class_tag)
    pa, pb, pm = sp.at(lam_a), sp.at(lam_b), sp.at(mix)
    return float(max(np.abs(pm.c1 - (1 - t) * pa.c1 - t * pb.c1).max(initial=0.0),
                     np.abs(pm.d1 - (1 - t) * pa.d1 - t * pb.d1).max(initial=0.0)))


# ---------------------------------------------------------------------------
# convex synthesis conditions

def extremum_problem(sp: ExtremumSynthesisPlant, rho: float, base=None) -> lmi.Problem:
    """LMIs in ``(X, W, Lam)`` with the ``Y^-1`` term removed by a Schur complement."""
    n1, n2, n = sp.n1, sp.n2, sp.n1 + sp.n2
    prob = lmi.Problem(name="extremum")
    x = prob.sym("X", n).expr
    w11 = prob.sym("W11", n1).expr
    w12 = prob.general("W12", n1, n2).expr
    w22 = prob.sym("W22", n2).expr
    lam = prob.zf("Lam", sp.ell, sp.d, rho, "repeated", base=base)
    cf, df = lam.cf(), lam.df()
    c1 = lmi.hstack([sp.c11(cf, df), lmi.Expr.lift(sp.c12)])
    d1 = sp.d1(df)

    w1 = lmi.bmat([[w11, w12], [None, np.eye(n2)]])
    ybold = lmi.blkdiag(w11, w22)
    prob.add(lmi.bmat([[x, w1], [w1.T, ybold]]).sym(), ">", "coupling")

    a, b1 = sp.a, sp.b1
    u = kernel_basis(np.hstack([sp.c, sp.f]))
    if u.shape[1]:
        ux, uw = u[:n], u[n:]
        outz = c1 @ ux + d1 @ uw
        prob.add(lmi.dissipation(a @ ux + b1 @ uw, ux, outz, uw, x), "<", "primal")

    w12t = w12.T
    abold = lmi.bmat([[w11 @ sp.a1, np.zeros((n1, n2))],
                      [w12t @ sp.a1 - sp.a2 @ w12t, sp.a2 @ w22]])
    b1bold = lmi.vstack([w11 @ sp.b11, w12t @ sp.b11])
    c1bold = lmi.hstack([sp.c11(cf, df) - sp.c12 @ w12t, sp.c12 @ w22])
    v = kernel_basis(np.hstack([sp.b.T, sp.e.T]))
    if v.shape[1]:
        vx, vz = v[:n], v[n:]
        r2 = -(abold.T @ vx + c1bold.T @ vz)
        r4 = -(b1bold.T @ vx + d1.T @ vz)
        m11 = vx.T @ ybold @ vx + (vz.T @ r4).he()
        prob.add(lmi.bmat([[m11, r2.T], [r2, ybold]]).sym(), ">", "dual")
    return prob


def _setup(ep: ExtremumPlant, fc: FunctionClass, rho: float, ell: int):
    gp = build_generalized_plant(ep)
    wp = weighted_generalized_plant(gp, fc, rho)
    yb = youla_factorization(wp)
    return gp, wp, yb, structured_plant(yb, ell)


def extremum_feasible(ep: ExtremumPlant, fc: FunctionClass, rho: float, ell: int,
                      cfg: RunConfig | None = None) -> RateCertificate:
    """Convex sufficient test for the extremum control rate ``rho`` (repeated multipliers)."""
    cfg = cfg or default_config()
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    report = stabilizability_check(ep, rho)
    if not report:
        return RateCertificate(rho, ell, "repeated", None, -np.inf, "extremum_lmi", status="infeasible",
                               message="; ".join(report.reasons))
    try:
        _, _, _, sp = _setup(ep, fc, rho, ell)
    except ExtremumError as exc:
        return RateCertificate(rho, ell, "repeated", None, -np.inf, "extremum_lmi", status="infeasible",
                               message=str(exc))
    prob = extremum_problem(sp, rho, base=fc.congruence())
    sol = lmi.solve(prob, cfg)
    lam = sol.assignment["Lam"] if sol.feasible else None
    meta = {"iterations": sol.iterations, "states": sp.n1 + sp.n2}
    if sol.feasible:
        meta["W"] = {k: sol.assignment[k].tolist() for k in ("W11", "W12", "W22")}
    return RateCertificate(rho, ell, "repeated", lam, sol.margin, "extremum_lmi",
                           sol.assignment["X"] if sol.feasible else None, sol.status, sol.message, meta)


def bisect_extremum_rate(ep: ExtremumPlant, fc: FunctionClass, ell: int, tol: float | None = None,
                         bracket: tuple[float, float] = (1e-3, 1 - 1e-4),
                         cfg: RunConfig | None = None) -> BisectionResult:
    """Smallest certified rate; ``rho_star = 1.1`` marks that no rate below one was certified."""
    cfg = cfg or default_config()
    tol = cfg.tol_bisect if tol is None else tol
    res = bisect(lambda r: extremum_feasible(ep, fc, r, ell, cfg), bracket[0], bracket[1], tol)
    if res.status == "no_certificate":
        res.rho_star = SATURATION
    return res


# ---------------------------------------------------------------------------
# controller assembly

@dataclass(frozen=True, eq=False)
class ExtremumController:
    kbar: StateSpace
    k1: StateSpace
    k2: StateSpace | None
    loop: StateSpace
    algorithm: AlgorithmRealization
    certificate: RateCertificate
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def ss(g):
            return None if g is None else {"A": g.a.tolist(), "B": g.b.tolist(), "C": g.c.tolist(), "D": g.d.tolist()}

        return {"K1": ss(self.k1), "K2": ss(self.k2), "Kbar": ss(self.kbar), "loop": ss(self.loop),
                "certificate": self.certificate.to_dict(),
                "info": {k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool, list))}}


def assemble_extremum_controller(ep: ExtremumPlant, fc: FunctionClass, rho: float, lam: ZamesFalbParams,
                                 cfg: RunConfig | None = None) -> ExtremumController:
    """Reconstruct on the multiplier-weighted plant, undo the rate weighting, add the integrator."""
    cfg = cfg or default_config()
    lam = normalize_multiplier(lam)
    gp = build_generalized_plant(ep)
    wg = multiply_plant(weighted_generalized_plant(gp, fc, rho), lam)
    try:
        kc, rinfo = reconstruct_on(wg, cfg)
    except ReconstructionError as exc:
        raise ExtremumError(f"controller reconstruction failed: {exc}") from exc
    kbar = StateSpace(rho * kc.a, rho * kc.b, kc.c, kc.d)
    d = ep.d
    k1 = series(subsystem(kbar, inputs=list(range(d))), integrator(d))
    k2 = subsystem(kbar, inputs=list(range(d, d + ep.nv))) if ep.nv else None
    loop = close_loop(gp, kbar)
    alg = structure_check(loop)
    alg = AlgorithmRealization(alg.a, alg.b, alg.c, alg.ac, alg.bc, alg.cc, alg.dc, alg.d, "extremum",
                               {"rho": rho, "ell": lam.ell, "plant": ep.name})
    cert = certify(alg, fc, rho, lam.ell, "repeated", cfg)
    if not cert.feasible:
        raise ExtremumError(f"assembled loop failed re-certification at rho={rho}: {cert.message}")
    info = {"lmi_margin": rinfo["lmi_margin"], "loop_margin": rinfo["margin"], "order": kbar.n}
    return ExtremumController(kbar, k1, k2, loop, alg, cert, info)


def assemble_near(ep: ExtremumPlant, fc: FunctionClass, rho: float, ell: int, cfg: RunConfig | None = None,
                  bumps=(0.0, 0.002, 0.005, 0.01, 0.02)) -> ExtremumController:
    """Controller at the first rate ``rho + bump`` where reconstruction succeeds.

    At the bisection edge the loop margin is of the order of the solver
    tolerance, so a slightly relaxed rate is usually needed.
    """
    cfg = cfg or default_config()
    last = None
    for bump in bumps:
        r = min(rho + bump, 1 - 1e-4)
        cert = extremum_feasible(ep, fc, r, ell, cfg)
        if not cert.feasible:
            continue
        try:
            return assemble_extremum_controller(ep, fc, r, cert.lambda_star, cfg)
        except ExtremumError as exc:
            last = exc
    raise ExtremumError(f"no controller reconstructed within {bumps[-1]} of rho={rho}: {last}")


def integrator_deficiency(loop: StateSpace, tol: float = 1e-9) -> int:
    """``n - rank(A - I)`` of a loop realization."""
    return loop.n - block_rank(loop.a - np.eye(loop.n), tol)


# ---------------------------------------------------------------------------
# named examples

def tf_realization(num, den, tol: float = 1e-9) -> StateSpace:
    """Controllable canonical form of ``num(z)/den(z)`` (descending powers, proper)."""
    num = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=float)), "f")
    den = np.trim_zeros(np.atleast_1d(np.asarray(den, dtype=float)), "f")
    if not len(den):
        raise ValueError("zero denominator")
    if len(num) > len(den):
        raise ValueError("transfer function must be proper")
    num, den = num / den[0], den / den[0]
    n = len(den) - 1
    num = np.concatenate([np.zeros(n + 1 - len(num)), num])
    dd = num[0]
    if n == 0:
        return static([[dd]])
    resid = num[1:] - dd * den[1:]
    a = np.zeros((n, n))
    a[0] = -den[1:]
    a[1:, :-1] = np.eye(n - 1)
    b = np.zeros((n, 1))
    b[0, 0] = 1.0
    g = StateSpace(a, b, resid.reshape(1, n), [[dd]])
    for z in sample_points(6, 1.7, seed=3):
        ref = np.polyval(num, z) / np.polyval(den, z)
        if abs(frequency_response(g, z)[0, 0] - ref) > tol * max(1.0, abs(ref)):
            raise ValueError("realization does not reproduce the transfer function")
    return g


def tf_matrix(entries) -> StateSpace:
    """MIMO realization from a grid of ``(num, den)`` pairs."""
    rows, cols = len(entries), len(entries[0])
    total = None
    for i in range(rows):
        for j in range(cols):
            g = tf_realization(*entries[i][j])
            left, right = np.zeros((rows, 1)), np.zeros((1, cols))
            left[i, 0], right[0, j] = 1.0, 1.0
            g = scale(g, left, right)
            total = g if total is None else parallel(total, g)
    return minreal(total)


def identity_plant(d: int = 1) -> ExtremumPlant:
    return ExtremumPlant(static(np.eye(d)), name="identity")


def pole_family(p: float) -> ExtremumPlant:
    """``G1(z) = (z - 0.5) / ((z + p)(z + 0.5))``."""
    g = tf_realization([1.0, -0.5], np.polymul([1.0, p], [1.0, 0.5]))
    return ExtremumPlant(g, name=f"pole_family({p:g})", meta={"p": p})


def delay(nu: int) -> ExtremumPlant:
    """``G1(z) = z^-nu``: gradients evaluated at a lagged iterate."""
    den = np.zeros(nu + 1)
    den[0] = 1.0
    return ExtremumPlant(tf_realization([1.0], den), name=f"delay({nu})", meta={"nu": nu})


def mimo_sex3() -> ExtremumPlant:
    """2x2 gradient filter; the controller output is the optimized variable."""
    g = tf_matrix([[([1.0], [1.0]), ([1.0, -0.2], [1.0, 1.2])],
                   [([1.0, -1.2], [1.0, 0.5]), ([1.0], [1.0])]])
    return ExtremumPlant(g, layout="right", name="mimo_sex3")


EXAMPLES = {"pole_family": pole_family, "delay": delay, "mimo_sex3": lambda _=None: mimo_sex3()}


def mimo_full_rate(ell_design: int, ell_full: int, fc: FunctionClass, cfg: RunConfig | None = None,
                   tol: float | None = None) -> dict:
    """Upper bound for full multipliers on the 2x2 example.

    The controller is designed with repeated multipliers and then analyzed
    with full ones, which is valid for diagonally repeated gradients only.
    """
    cfg = cfg or default_config()
    ep = mimo_sex3()
    fc2 = FunctionClass(fc.m, fc.L, ep.d)
    rep = bisect_extremum_rate(ep, fc2, ell_design, tol, cfg=cfg)
    out = {"repeated": rep.rho_star, "full": rep.rho_star, "status": rep.status,
           "note": EXTERNAL_THEOREM}
    if rep.status != "ok":
        return out
    ctrl = assemble_near(ep, fc2, rep.rho_star, ell_design, cfg)
    out["design_rho"] = ctrl.certificate.rho
    full = bisect_rate(ctrl.algorithm, fc2, ell_full, "full", tol, (1e-3, ctrl.certificate.rho), cfg)
    if full.status in ("ok", "at_lower_bracket"):
        out["full"] = min(rep.rho_star, full.rho_star)
    return out


def example_harness(name: str, params, kappas, ells, cfg: RunConfig | None = None,
                    tol: float | None = None, m: float = 1.0) -> list[dict]:
    """One bisection per ``(param, kappa, ell)``; failures are recorded, not raised."""
    cfg = cfg or default_config()
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}")
    rows = []
    for param in params:
        ep = EXAMPLES[name](param)
        for kappa in kappas:
            fc = FunctionClass(m, m * kappa, ep.d)
            for ell in ells:
                row = {"example": name, "param": param, "kappa": kappa, "ell": ell}
                try:
                    res = bisect_extremum_rate(ep, fc, ell, tol, cfg=cfg)
                    margin = res.certificate.margin if res.certificate is not None else float("nan")
                    row.update(rho_star=res.rho_star, status=res.status, margin=margin)
                except Exception as exc:  # per-cell isolation
                    row.update(rho_star=float("nan"), status=f"error: {exc}", margin=float("nan"))
                rows.append(row)
    return rows


CSV_HEADER = ("example", "param", "kappa", "ell", "rho_star", "status", "margin")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k) for k in CSV_HEADER})
    return buf.getvalue()
