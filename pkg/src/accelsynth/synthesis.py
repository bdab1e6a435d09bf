"""Convex design of first-order algorithms.

Design proceeds in the Youla parameter: every algorithm that converges
for all admissible objectives yields a weighted loop ``T1 + T2 Q T3`` with
stable ``Q``. Multiplying by a Zames-Falb multiplier and substituting
``Z = Pi(Lam) T2 Q`` turns the search into a convex problem in
``(Lam, Z)``; after eliminating ``Z`` only ``Lam`` and a Lyapunov matrix
remain. Controllers are recovered by Lyapunov completion followed by one
more LMI that is affine in the controller matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import lmi
from .analysis import (
    AlgorithmRealization,
    BisectionResult,
    FunctionClass,
    RateCertificate,
    StructureFailure,
    bisect,
    kron_expand,
    certify,
    structure_check,
)
from .config import RunConfig, default_config
from .multipliers import ZamesFalbParams, build_fir, fir_shift
from .sysops import (
    GeneralizedPlant,
    StateSpace,
    close_loop,
    frequency_response,
    inverse,
    is_schur,
    kernel_basis,
    minreal,
    sample_points,
    series,
    static,
)


class SynthesisError(RuntimeError):
    """Internal inconsistency: a feasible design did not survive verification."""


class ReconstructionError(SynthesisError):
    pass


def _class_mats(fc: FunctionClass, d: int):
    """``(M, L - M, sigma)`` as ``d x d`` matrices."""
    if fc.is_structured:
        if d != fc.d:
            raise ValueError("structured classes fix the dimension")
        return fc.lower, fc.spread, fc.sigma
    eye = np.eye(d)
    return fc.m * eye, (fc.L - fc.m) * eye, (fc.kappa - 1.0) * eye


def _working_dim(fc: FunctionClass, class_tag: str) -> int:
    """Dimension at which the LMIs are solved (1 unless structure forbids it)."""
    if fc.is_structured or class_tag == "full":
        return fc.d
    return 1


# ---------------------------------------------------------------------------
# Youla data and plants

@dataclass(frozen=True, eq=False)
class YoulaData:
    t1: StateSpace
    t2: StateSpace
    t3: StateSpace
    sigma: float | np.ndarray
    rho: float
    d: int

    @property
    def zeros(self) -> tuple[float, float]:
        """Zeros of ``T3`` outside the open unit disc."""
        return 1.0 / self.rho, np.inf


def youla_data(fc: FunctionClass, rho: float, d: int | None = None) -> YoulaData:
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    d = fc.d if d is None else d
    _, spread, sigma = _class_mats(fc, d)
    z, eye = np.zeros((d, d)), np.eye(d)
    t1 = StateSpace(z, -eye / rho, sigma, -eye)
    t2 = static(spread)
    t3 = StateSpace(np.block([[z, z], [eye / rho, z]]), np.vstack([-eye / rho, eye / rho]), np.hstack([z, eye]), z)
    sig = sigma if fc.is_structured else float(fc.kappa - 1.0)
    return YoulaData(t1, t2, t3, sig, rho, d)


def loop_plant(fc: FunctionClass, rho: float, d: int | None = None) -> GeneralizedPlant:
    """Weighted integrator loop: controller input is the integrator state, output the query point."""
    d = fc.d if d is None else d
    lo, spread, _ = _class_mats(fc, d)
    eye = np.eye(d)
    return GeneralizedPlant(eye / rho, eye / rho, lo / rho, np.zeros((d, d)), -eye, spread, eye, np.zeros((d, d)))


def controller_of(alg: AlgorithmRealization, rho: float) -> StateSpace:
    """Controller ``[rho^-1 A_c, rho^-1 B_c; C_c, D_c]`` in feedback with :func:`loop_plant`."""
    return StateSpace(alg.ac / rho, alg.bc / rho, alg.cc, alg.dc)


def weighted_plant(fc: FunctionClass, rho: float, lam: ZamesFalbParams) -> GeneralizedPlant:
    """Product of the multiplier with :func:`loop_plant` for a fixed ``lam``."""
    d = lam.d
    lo, spread, _ = _class_mats(fc, d)
    flt = build_fir(lam)
    nf = flt.n
    eye, zd = np.eye(d), np.zeros((d, d))
    a = sla.block_diag(flt.a, eye / rho)
    b1 = np.vstack([-flt.b, eye / rho])
    b = np.vstack([flt.b @ spread, lo / rho])
    c1 = np.hstack([flt.c, np.zeros((d, d))])
    c = np.hstack([np.zeros((d, nf)), eye])
    return GeneralizedPlant(a, b1, b, c1, -flt.d, flt.d @ spread, c, zd)


@dataclass(frozen=True, eq=False)
class SynthesisPlant:
    """Plant whose closed loop with ``Z`` is ``Pi(Lam) T1 + T2 Z T3``; output rows depend on ``Lam``."""

    a: np.ndarray
    b1: np.ndarray
    b: np.ndarray
    e: np.ndarray
    c: np.ndarray
    f: np.ndarray
    j: np.ndarray
    sigma: np.ndarray
    ell: int
    d: int
    rho: float

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def c1(self, cf, df):
        d = self.d
        tail = lmi.hstack([df @ self.sigma, np.zeros((d, d))])
        return lmi.hstack([cf, tail]) if self.ell else tail

    def d1(self, df):
        return -df

    def at(self, lam: ZamesFalbParams) -> GeneralizedPlant:
        if lam.d != self.d or lam.ell != self.ell:
            raise ValueError("multiplier does not match the plant")
        cf = np.hstack(lam.blocks[:-1]) if self.ell else np.zeros((self.d, 0))
        df = lam.blocks[-1]
        c1 = self.c1(lmi.Expr.lift(cf), lmi.Expr.lift(df)).const
        return GeneralizedPlant(self.a, self.b1, self.b, c1, -df, self.e, self.c, self.f)


def build_synthesis_plant(fc: FunctionClass, rho: float, ell: int, d: int | None = None) -> SynthesisPlant:
    if ell < 0:
        raise ValueError("ell must be non-negative")
    d = fc.d if d is None else d
    _, spread, sigma = _class_mats(fc, d)
    af, bf = fir_shift(ell, d)
    nf = af.shape[0]
    eye, zd = np.eye(d), np.zeros((d, d))
    a = np.block([
        [af, bf @ sigma, np.zeros((nf, d))],
        [np.zeros((d, nf)), zd, zd],
        [np.zeros((d, nf)), eye / rho, zd],
    ])
    b1 = np.vstack([-bf, -eye / rho, eye / rho])
    n = nf + 2 * d
    c = np.hstack([np.zeros((d, nf + d)), eye])
    j = np.vstack([np.eye(nf + d), np.zeros((d, nf + d))])
    return SynthesisPlant(a, b1, np.zeros((n, d)), spread, c, np.zeros((d, d)), j, sigma, ell, d, rho)


# ---------------------------------------------------------------------------
# synthesis LMIs

def synthesis_problem(fc: FunctionClass, rho: float, ell: int, class_tag: str = "repeated",
                      lam: ZamesFalbParams | None = None, d: int | None = None):
    """LMIs in ``X`` (and ``Lam`` unless fixed) certifying that some ``Z`` exists."""
    d = _working_dim(fc, class_tag) if d is None else d
    plant = build_synthesis_plant(fc, rho, ell, d)
    prob = lmi.Problem(name="synthesis")
    x = prob.sym("X", plant.n)
    if lam is None:
        var = prob.zf("Lam", ell, d, rho, class_tag, base=fc.congruence())
        cf, df = var.cf(), var.df()
    else:
        cf = lmi.Expr.lift(np.hstack(lam.blocks[:-1]) if ell else np.zeros((d, 0)))
        df = lmi.Expr.lift(lam.blocks[-1])
    aj, bj = plant.a @ plant.j, plant.b1
    cj = plant.c1(cf, df) @ plant.j
    prob.add(x.expr, ">", "X > 0")
    prob.add(lmi.kyp_expr(aj, bj, cj, plant.d1(df), x.expr, e=plant.j), "<", "compressed KYP")
    return prob, plant


def _expand_lam(lam: ZamesFalbParams, d: int) -> ZamesFalbParams:
    if lam.d == d:
        return lam
    return ZamesFalbParams(tuple(np.kron(b, np.eye(d)) for b in lam.blocks), lam.rho, lam.class_tag)


def synthesis_feasible(fc: FunctionClass, rho: float, ell: int, class_tag: str = "repeated",
                       cfg: RunConfig | None = None) -> RateCertificate:
    """Joint search over the multiplier and the Lyapunov matrix; witnesses refer to the working dimension."""
    cfg = cfg or default_config()
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    fc = fc.canonical()
    if class_tag == "full" and not fc.is_structured and fc.d == 1:
        class_tag = "repeated"
    prob, plant = synthesis_problem(fc, rho, ell, class_tag)
    sol = lmi.solve(prob, cfg)
    lam = sol.assignment["Lam"] if sol.feasible else None
    return RateCertificate(rho, ell, class_tag, lam, sol.margin, "synthesis_lmi",
                           sol.assignment["X"] if sol.feasible else None, sol.status, sol.message,
                           {"iterations": sol.iterations, "working_dim": plant.d})


def pick_value(lam: ZamesFalbParams, fc: FunctionClass, rho: float) -> np.ndarray:
    """Left-hand side of the reduced (Pick) inequality for a fixed multiplier."""
    d = lam.d
    _, _, sigma = _class_mats(fc, d)
    flt = build_fir(lam)
    r = frequency_response(flt, 1.0 / rho).real @ (np.eye(d) + sigma)
    l0 = lam.blocks[-1]
    return np.block([[(r.T + r) / (1 - rho ** 2), r.T + l0], [r + l0.T, l0.T + l0]])


def pick_matrix(lam: ZamesFalbParams, fc: FunctionClass, rho: float) -> np.ndarray:
    """Pick matrix of ``H = Pi(Lam) T1`` at the zeros ``rho^-1`` and infinity of ``T3``."""
    yd = youla_data(fc, rho, lam.d)
    h = series(build_fir(lam), yd.t1)
    h1 = frequency_response(h, 1.0 / rho)
    h2 = h.d.astype(complex)
    z1 = 1.0 / rho
    out = np.block([
        [(h1.conj().T + h1) / (1 - 1 / (z1 * z1)), h1.conj().T + h2],
        [h2.conj().T + h1, h2.conj().T + h2],
    ])
    return out.real


def pick_problem(fc: FunctionClass, rho: float, ell: int, d: int | None = None) -> lmi.Problem:
    d = _working_dim(fc, "repeated") if d is None else d
    _, _, sigma = _class_mats(fc, d)
    prob = lmi.Problem(name="pick")
    var = prob.zf("Lam", ell, d, rho, "repeated", base=fc.congruence())
    r = var.block(0) * 1.0
    for k in range(1, ell + 1):
        r = r + var.block(k) * rho ** k
    r = r @ (np.eye(d) + sigma)
    l0 = var.block(0)
    m = lmi.bmat([[(r.T + r) * (1.0 / (1 - rho ** 2)), r.T + l0], [r + l0.T, l0.T + l0]])
    prob.add(m, ">", "Pick")
    return prob


def pick_feasible(fc: FunctionClass, rho: float, ell: int, cfg: RunConfig | None = None) -> RateCertificate:
    """Multiplier-only test obtained by eliminating the Lyapunov matrix."""
    cfg = cfg or default_config()
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    sol = lmi.solve(pick_problem(fc.canonical(), rho, ell), cfg)
    lam = sol.assignment["Lam"] if sol.feasible else None
    return RateCertificate(rho, ell, "repeated", lam, sol.margin, "pick", None, sol.status, sol.message,
                           {"iterations": sol.iterations})


def optimal_rate(fc: FunctionClass, ell: int) -> float:
    """Smallest achievable rate for repeated multipliers of length ``ell`` (infimum, not attained)."""
    k = fc.kappa
    if k <= 1:
        raise ValueError("need kappa > 1")
    if ell == 0:
        return (k - 1) / (k + 1)
    return 1 - 1 / np.sqrt(k)


def bisect_synthesis_rate(fc: FunctionClass, ell: int, class_tag: str = "repeated", method: str | None = None,
                          tol: float | None = None, bracket: tuple[float, float] = (1e-3, 1 - 1e-4),
                          cfg: RunConfig | None = None) -> BisectionResult:
    """Smallest designable rate; uses the reduced test for repeated multipliers."""
    cfg = cfg or default_config()
    tol = cfg.tol_bisect if tol is None else tol
    method = method or ("pick" if class_tag == "repeated" else "lmi")
    if method == "pick":
        test = lambda r: pick_feasible(fc, r, ell, cfg)
    else:
        test = lambda r: synthesis_feasible(fc, r, ell, class_tag, cfg)
    return bisect(test, bracket[0], bracket[1], tol)


# ---------------------------------------------------------------------------
# controller reconstruction

def lmis1_problem(plant: GeneralizedPlant) -> lmi.Problem:
    """Elimination LMIs in ``(X, Y)`` for the negative-real supply ``He(z^T w)``."""
    nw, nu, nz, ny = plant.dims
    n = plant.n
    prob = lmi.Problem(name="reconstruction")
    x = prob.sym("X", n).expr
    y = prob.sym("Y", n).expr
    prob.add(lmi.bmat([[x, np.eye(n)], [np.eye(n), y]]), ">", "coupling")
    u = kernel_basis(np.hstack([plant.c, plant.f]))
    if u.shape[1]:
        ux, uw = u[:n], u[n:]
        top = plant.a @ ux + plant.b1 @ uw
        outz = plant.c1 @ ux + plant.d1 @ uw
        prob.add(lmi.dissipation(top, ux, outz, uw, x), "<", "primal")
    v = kernel_basis(np.hstack([plant.b.T, plant.e.T]))
    if v.shape[1]:
        vx, vz = v[:n], v[n:]
        bottom = -(plant.a.T @ vx + plant.c1.T @ vz)
        outw = -(plant.b1.T @ vx + plant.d1.T @ vz)
        prob.add(lmi.dissipation(vx, bottom, vz, outw, y), ">", "dual")
    return prob


def balanced_solve(prob: lmi.Problem, names, cfg: RunConfig | None = None, fraction: float = 0.5) -> lmi.SdpSolution:
    """Maximize the margin, then keep a fraction of it and minimize the traces of ``names``.

    Margin maximization alone drives Lyapunov matrices towards the norm
    bound; the second stage returns a well-conditioned witness instead.
    """
    cfg = cfg or default_config()
    first = lmi.solve(prob, cfg)
    if not first.feasible:
        return first
    trace = None
    for name in names:
        v = prob.variables[name]
        e = v.expr
        for i in range(v.shape[0]):
            trace = e[i:i + 1, i:i + 1] if trace is None else trace + e[i:i + 1, i:i + 1]
    prob.set_objective("min", trace)
    try:
        second = lmi.solve(prob, cfg, fixed_margin=fraction * min(first.margin, cfg.margin_cap))
    finally:
        prob.objective = None
    return second if second.feasible else first


def completion(x: np.ndarray, y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Closed-loop Lyapunov matrix with leading block ``x`` whose inverse has leading block ``y``."""
    gap = x - np.linalg.inv(y)
    gap = 0.5 * (gap + gap.T)
    w, v = np.linalg.eigh(gap)
    if w.min() < -tol * max(1.0, np.abs(w).max()):
        raise ReconstructionError(f"X - Y^-1 is indefinite (min eigenvalue {w.min():.3e})")
    mm = v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    n = x.shape[0]
    return np.block([[x, mm], [mm.T, np.eye(n)]])


def _closed_loop_exprs(plant: GeneralizedPlant, k: lmi.Expr, nk: int):
    nw, nu, nz, ny = plant.dims
    n = plant.n
    left = np.block([[np.zeros((n, nk)), plant.b], [np.eye(nk), np.zeros((nk, nu))]])
    right = np.block([[np.zeros((nk, n)), np.eye(nk)], [plant.c, np.zeros((ny, nk))]])
    right_w = np.vstack([np.zeros((nk, nw)), plant.f])
    a = sla.block_diag(plant.a, np.zeros((nk, nk))) + left @ k @ right
    b = np.vstack([plant.b1, np.zeros((nk, nw))]) + left @ k @ right_w
    lz = np.hstack([np.zeros((nz, nk)), plant.e])
    c = np.hstack([plant.c1, np.zeros((nz, nk))]) + lz @ k @ right
    dd = plant.d1 + lz @ k @ right_w
    return a, b, c, dd


def closed_loop_margin(cl: StateSpace, xcl: np.ndarray) -> float:
    """Smallest slack of the closed-loop KYP inequality at a given Lyapunov matrix."""
    k = lmi.kyp_expr(cl.a, cl.b, cl.c, cl.d, xcl).const
    return float(min(np.linalg.eigvalsh(xcl).min(), -np.linalg.eigvalsh(k).max()))


def _controller_lmi(plant: GeneralizedPlant, xcl: np.ndarray, nk: int, cfg: RunConfig):
    """Closed-loop inequality at a fixed Lyapunov matrix; affine in the controller matrices."""
    n = plant.n
    nw, nu, nz, ny = plant.dims
    prob = lmi.Problem(name="controller")
    kv = prob.general("K", nk + nu, nk + ny).expr
    a, b, c, dd = _closed_loop_exprs(plant, kv, nk)
    ncl = n + nk
    ab = lmi.hstack([a, b])
    supply = lmi.hstack([c, dd]).T @ np.hstack([np.zeros((nw, ncl)), np.eye(nw)])
    lead = lmi.Expr.lift(-sla.block_diag(xcl, np.zeros((nw, nw)))) + supply.he()
    # congruence with diag(I, xcl) keeps both diagonal blocks on the scale of xcl
    xab = xcl @ ab
    prob.add(lmi.bmat([[lead, xab.T], [xab, lmi.Expr.lift(-xcl)]]).sym(), "<", "closed loop")
    sol = lmi.solve(prob, cfg)
    kmat = sol.assignment["K"]
    return StateSpace(kmat[:nk, :nk], kmat[:nk, nk:], kmat[nk:, :nk], kmat[nk:, nk:]), sol


def closed_loop_certificate(cl: StateSpace, cfg: RunConfig | None = None) -> lmi.SdpSolution:
    """Well-conditioned Lyapunov matrix for the closed loop (negative-real supply)."""
    prob = lmi.Problem(name="closed-loop analysis")
    x = prob.sym("X", cl.n)
    prob.add(x.expr, ">", "X > 0")
    prob.add(lmi.kyp_expr(cl.a, cl.b, cl.c, cl.d, x.expr), "<", "KYP")
    return balanced_solve(prob, ["X"], cfg)


def reconstruct_controller(plant: GeneralizedPlant, x, y, cfg: RunConfig | None = None,
                           nk: int | None = None, refine: int = 2) -> tuple[StateSpace, dict]:
    """Full-order controller for ``plant`` from a solution ``(x, y)`` of :func:`lmis1_problem`.

    The completed Lyapunov matrix is often badly conditioned, so the
    controller LMI may only be solvable with a vanishing margin. Its best
    iterate is kept and the closed loop is re-certified with a freshly
    solved Lyapunov matrix; if that fails the two convex steps alternate
    ``refine`` more times.
    """
    cfg = cfg or default_config()
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    xcl = completion(x, y)
    nk = plant.n if nk is None else nk
    history = []
    for _ in range(refine + 1):
        ctrl, sol = _controller_lmi(plant, xcl, nk, cfg)
        cl = close_loop(plant, ctrl)
        if not np.all(np.isfinite(cl.a)):
            break
        ok, radius = is_schur(cl.a, cfg.tol_schur)
        history.append({"lmi_margin": sol.margin, "radius": radius})
        if ok:
            cert = closed_loop_certificate(cl, cfg)
            if cert.feasible:
                xv = cert.assignment["X"]
                margin = closed_loop_margin(cl, xv)
                if margin > 0:
                    return ctrl, {"xcl": xv, "margin": margin, "lmi_margin": sol.margin, "history": history}
            if cert.status == lmi.INFEASIBLE:
                break
            xcl = cert.assignment["X"]
        else:
            break
    raise ReconstructionError(f"closed-loop verification failed after {len(history)} attempt(s)")


def reconstruct_on(plant: GeneralizedPlant, cfg: RunConfig | None = None,
                   fractions=(0.5, 0.1, 0.9, 0.25)) -> tuple[StateSpace, dict]:
    """Solve the elimination LMIs and reconstruct, retrying with other margin fractions.

    Near the optimal rate the witness pair ``(X, Y)`` is close to singular
    and whether the completion yields a certifiable loop depends on the
    fraction of the margin kept in :func:`balanced_solve`.
    """
    cfg = cfg or default_config()
    prob = lmis1_problem(plant)
    last = None
    for frac in fractions:
        sol = balanced_solve(prob, ["X", "Y"], cfg, fraction=frac)
        if not sol.feasible:
            raise ReconstructionError(f"elimination LMIs are infeasible: {sol.message}")
        try:
            ctrl, info = reconstruct_controller(plant, sol.assignment["X"], sol.assignment["Y"], cfg)
        except ReconstructionError as exc:
            last = exc
            continue
        info["fraction"] = frac
        return ctrl, info
    raise last


# ---------------------------------------------------------------------------
# Youla parameter to algorithm

def youla_to_algorithm(q: StateSpace, fc: FunctionClass, rho: float, verify: bool = True,
                       tol: float = 1e-8, name: str = "synthesized") -> AlgorithmRealization:
    d = q.inputs
    if q.outputs != d:
        raise ValueError("Q must be square")
    ok, radius = is_schur(q.a)
    if not ok:
        raise ValueError(f"Q is not stable (spectral radius {radius:.6g})")
    lo, _, _ = _class_mats(fc, d)
    ac = np.block([[-lo @ q.d, -lo @ q.c], [rho * q.b, rho * q.a]])
    bc = np.vstack([-lo @ q.d, rho * q.b])
    cc = np.hstack([q.d, q.c])
    dc = q.d - np.linalg.inv(lo)
    alg = AlgorithmRealization.from_factors(ac, bc, cc, dc, name=name)
    if verify:
        gap = youla_gap(alg, q, fc, rho)
        if gap > tol:
            raise SynthesisError(f"Youla correspondence violated (gap {gap:.3e})")
    return alg


def youla_gap(alg: AlgorithmRealization, q: StateSpace, fc: FunctionClass, rho: float, count: int = 10) -> float:
    """Relative response mismatch between the weighted loop and ``T1 + T2 Q T3``."""
    d = alg.d
    yd = youla_data(fc, rho, d)
    cl = close_loop(loop_plant(fc, rho, d), controller_of(alg, rho))
    worst = 0.0
    for z in sample_points(count):
        lhs = frequency_response(cl, z)
        rhs = frequency_response(yd.t1, z) + yd.t2.d @ frequency_response(q, z) @ frequency_response(yd.t3, z)
        worst = max(worst, float(np.abs(lhs - rhs).max() / (1.0 + np.abs(rhs).max())))
    return worst


def q_from_z(z: StateSpace, lam: ZamesFalbParams, fc: FunctionClass, rho: float, cfg: RunConfig | None = None):
    """``Q = T2^-1 Pi(Lam~)^-1 T2 Z`` with a small shift of ``Lam_0`` when it is near singular."""
    cfg = cfg or default_config()
    d = lam.d
    _, spread, _ = _class_mats(fc, d)
    eps = 0.0
    l0 = lam.blocks[-1]
    if np.linalg.cond(l0) > 1e8:
        eps = max(1e-8, 1e-6 * max(np.abs(b).max() for b in lam.blocks))
        bar = ZamesFalbParams.identity(lam.ell, d, rho, lam.class_tag)
        lam = lam.plus(bar, eps) if fc.congruence() is None else lam.plus(
            ZamesFalbParams(tuple(fc.congruence() @ b @ fc.congruence().T for b in bar.blocks), rho, lam.class_tag), eps)
    pinv = inverse(build_fir(lam))
    ok, radius = is_schur(pinv.a, cfg.tol_schur)
    if not ok:
        raise SynthesisError(f"inverse multiplier is unstable (radius {radius:.6g})")
    spread_inv = np.linalg.inv(spread)
    q = series(static(spread_inv), series(pinv, series(static(spread), z)))
    return q, {"eps_bar": eps}


def reduce_algorithm(alg: AlgorithmRealization, tol: float = 1e-8) -> AlgorithmRealization:
    """Minimal realization refactored into integrator and controller."""
    red = minreal(alg.system, tol)
    try:
        out = structure_check(red)
    except StructureFailure:
        return alg
    return AlgorithmRealization(out.a, out.b, out.c, out.ac, out.bc, out.cc, out.dc, out.d, alg.name, dict(alg.meta))


@dataclass
class SynthesisResult:
    algorithm: AlgorithmRealization | None
    certificate: RateCertificate | None
    design: RateCertificate
    raw: AlgorithmRealization | None = None
    route: str = "youla"
    info: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.algorithm is not None

    def to_dict(self) -> dict:
        return {
            "route": self.route,
            "feasible": self.feasible,
            "algorithm": None if self.algorithm is None else self.algorithm.to_dict(),
            "raw_algorithm": None if self.raw is None else self.raw.to_dict(),
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "design": self.design.to_dict(),
            "info": {k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool, list, dict))},
        }


def _design_multiplier(fc, rho, ell, class_tag, cfg, d):
    """Fix ``Lam*`` (reduced test when available) together with a Lyapunov witness."""
    if class_tag == "repeated":
        pick = pick_feasible(fc, rho, ell, cfg)
        if not pick.feasible:
            return pick, None
        pick.lambda_star = normalize_multiplier(pick.lambda_star)
        prob, _ = synthesis_problem(fc, rho, ell, class_tag, lam=pick.lambda_star, d=d)
        sol = balanced_solve(prob, ["X"], cfg)
        if sol.feasible:
            pick.x = sol.assignment["X"]
            pick.meta["x_margin"] = sol.margin
            return pick, sol.assignment["X"]
    cert = synthesis_feasible(fc, rho, ell, class_tag, cfg)
    if not cert.feasible:
        return cert, None
    # both tests are homogeneous in the multiplier; rescale before fixing it
    cert.lambda_star = normalize_multiplier(cert.lambda_star)
    prob, _ = synthesis_problem(fc, rho, ell, class_tag, lam=cert.lambda_star, d=d)
    sol = balanced_solve(prob, ["X"], cfg)
    if not sol.feasible:
        raise SynthesisError(f"Lyapunov matrix lost after rescaling the multiplier: {sol.message}")
    cert.x = sol.assignment["X"]
    return cert, cert.x


def normalize_multiplier(lam: ZamesFalbParams) -> ZamesFalbParams:
    scale = float(np.linalg.eigvalsh(0.5 * (lam.blocks[-1] + lam.blocks[-1].T)).max())
    if scale <= 0:
        scale = max(float(np.abs(b).max()) for b in lam.blocks)
    return ZamesFalbParams(tuple(b / scale for b in lam.blocks), lam.rho, lam.class_tag)


def _youla_route(fc, rho, ell, lam, x, d, cfg):
    """Reconstruct ``Z`` on the elimination plant, then ``Q`` and the algorithm."""
    g = build_synthesis_plant(fc, rho, ell, d).at(lam)
    # dual inequality reduces to Y - A Y A^T > 0; scale its unit solution past X^-1
    y0 = sla.solve_discrete_lyapunov(g.a, np.eye(g.n))
    si = np.linalg.inv(np.linalg.cholesky(y0))
    alpha = 2.0 * max(float(np.linalg.eigvalsh(si @ np.linalg.inv(x) @ si.T).max()), 1e-12)
    info = {"alpha0": alpha, "y_choice": "scaled"}
    try:
        zc, rinfo = reconstruct_controller(g, x, alpha * y0, cfg)
    except ReconstructionError:
        sol = balanced_solve(lmis1_problem(g), ["X", "Y"], cfg)
        if not sol.feasible:
            raise
        info["y_choice"] = "balanced"
        zc, rinfo = reconstruct_controller(g, sol.assignment["X"], sol.assignment["Y"], cfg)
    q, qinfo = q_from_z(zc, lam, fc, rho, cfg)
    info.update(qinfo)
    info.update(rinfo)
    return youla_to_algorithm(q, fc, rho, name="synthesized"), info


def _direct_route(fc, rho, ell, lam, x, d, cfg):
    """Reconstruct the algorithm controller on the multiplier-weighted loop."""
    kc, rinfo = reconstruct_on(weighted_plant(fc, rho, lam), cfg)
    return AlgorithmRealization.from_factors(rho * kc.a, rho * kc.b, kc.c, kc.d, name="synthesized"), rinfo


def synthesize(fc: FunctionClass, rho: float, ell: int, class_tag: str = "repeated", route: str = "auto",
               cfg: RunConfig | None = None, reduce: bool = True, simulate: int = 0) -> SynthesisResult:
    """Design an algorithm with rate ``rho`` and certify it; infeasible designs return no algorithm.

    ``route="youla"`` reconstructs ``Z`` on the elimination plant and maps
    it back through the Youla parameter; ``route="direct"`` reconstructs
    the algorithm on the multiplier-weighted loop. ``"auto"`` tries the
    former and falls back to the latter if reconstruction fails.
    """
    cfg = cfg or default_config()
    if route not in ("youla", "direct", "auto"):
        raise ValueError("route must be 'youla', 'direct' or 'auto'")
    fc = fc.canonical()
    if class_tag == "full" and not fc.is_structured and fc.d == 1:
        class_tag = "repeated"
    d = _working_dim(fc, class_tag)
    design, x = _design_multiplier(fc, rho, ell, class_tag, cfg, d)
    if not design.feasible:
        return SynthesisResult(None, None, design, route=route)
    lam = design.lambda_star
    fcw = fc if (fc.is_structured or d == fc.d) else fc.with_dim(d)
    info: dict = {}
    routes = ["youla", "direct"] if route == "auto" else [route]
    errors = []
    for rt in routes:
        try:
            raw, rinfo = (_youla_route if rt == "youla" else _direct_route)(fcw, rho, ell, lam, x, d, cfg)
            break
        except ReconstructionError as exc:
            errors.append(f"{rt}: {exc}")
    else:
        raise ReconstructionError("; ".join(errors))
    route = rt
    info.update({k: v for k, v in rinfo.items() if k not in ("xcl", "history")})
    if errors:
        info["fallback"] = errors
    info["reconstruction_margin"] = rinfo["margin"]
    alg = reduce_algorithm(raw, cfg.tol_minreal) if reduce else raw
    alg = kron_expand(alg, fc.d)
    raw = kron_expand(raw, fc.d)
    meta = {"rho": rho, "ell": ell, "class": class_tag, "route": route, "raw_order": raw.n, "order": alg.n}
    alg = AlgorithmRealization(alg.a, alg.b, alg.c, alg.ac, alg.bc, alg.cc, alg.dc, alg.d, "synthesized", meta)
    cert = certify(alg, fc, rho, ell, class_tag, cfg)
    if not cert.feasible:
        raise SynthesisError(f"synthesized algorithm failed certification at rho={rho}: {cert.message}")
    if simulate:
        from .objectives import monte_carlo

        mc = monte_carlo(alg, fc, runs=simulate, seed=0)
        info["simulation"] = mc.to_dict()
    return SynthesisResult(alg, cert, design, raw, route, info)


def synthesize_structured(fc: FunctionClass, rho: float, ell: int, class_tag: str = "repeated", **kwargs) -> SynthesisResult:
    if not fc.is_structured:
        raise ValueError("expected a structured function class")
    return synthesize(fc, rho, ell, class_tag, **kwargs)
