"""Rate certification for first-order algorithms.

An algorithm is the linear system ``x+ = A x + B w, z = C x`` in feedback
with ``w = grad f(z)``. For ``f`` strongly convex with parameter ``m`` and
``L``-Lipschitz gradient, a rate ``rho`` is certified by finding an
admissible multiplier ``Pi(Lam)`` that renders ``Pi(Lam) G~`` strictly
negative real, where ``G~`` is the loop with ``m`` removed and weighted by
``rho^-1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import lmi
from .config import RunConfig, default_config
from .multipliers import ZamesFalbParams, fir_shift, is_member
from .sysops import (
    StateSpace,
    block_rank,
    coordinate_change,
    hautus,
    integrator,
    is_schur,
    kernel_basis,
    left_kernel_basis,
    observable_part,
    series,
)


class StructureFailure(ValueError):
    """The system cannot be an algorithm that converges for all admissible objectives."""


@dataclass(frozen=True, eq=False)
class FunctionClass:
    m: float
    L: float
    d: int = 1
    mf: np.ndarray | None = None
    lf: np.ndarray | None = None

    def __post_init__(self):
        if self.mf is None:
            if not (self.m > 0 and self.L > self.m):
                raise ValueError("need 0 < m < L")
        else:
            mf = np.atleast_2d(np.asarray(self.mf, dtype=float))
            lf = np.atleast_2d(np.asarray(self.lf, dtype=float))
            if mf.shape != (self.d, self.d) or lf.shape != (self.d, self.d):
                raise ValueError("structured bounds must be d x d")
            if np.abs(mf - mf.T).max() > 1e-12 or np.abs(lf - lf.T).max() > 1e-12:
                raise ValueError("structured bounds must be symmetric")
            if np.linalg.eigvalsh(mf).min() <= 0 or np.linalg.eigvalsh(lf - mf).min() <= 0:
                raise ValueError("need 0 < M_f < L_f")
            object.__setattr__(self, "mf", mf)
            object.__setattr__(self, "lf", lf)

    @classmethod
    def structured(cls, mf, lf) -> "FunctionClass":
        mf = np.atleast_2d(np.asarray(mf, dtype=float))
        lf = np.atleast_2d(np.asarray(lf, dtype=float))
        return cls(float(np.linalg.eigvalsh(mf).min()), float(np.linalg.eigvalsh(lf).max()), mf.shape[0], mf, lf)

    @property
    def is_structured(self) -> bool:
        return self.mf is not None

    @property
    def kappa(self) -> float:
        return self.L / self.m

    @property
    def lower(self) -> np.ndarray:
        """Lower Hessian bound as a d x d matrix."""
        return self.mf if self.is_structured else self.m * np.eye(self.d)

    @property
    def upper(self) -> np.ndarray:
        return self.lf if self.is_structured else self.L * np.eye(self.d)

    @property
    def spread(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def sigma(self) -> np.ndarray:
        """``L m^-1 - I`` (matrix-valued for structured classes)."""
        return self.upper @ np.linalg.inv(self.lower) - np.eye(self.d)

    def congruence(self) -> np.ndarray | None:
        """``T = (L_f - M_f)^(-1/2)`` for structured classes, else ``None``."""
        if not self.is_structured:
            return None
        w, v = np.linalg.eigh(self.spread)
        return v @ np.diag(w ** -0.5) @ v.T

    def canonical(self) -> "FunctionClass":
        """Unstructured equivalent when ``M_f = mI`` and ``L_f = LI``, else ``self``."""
        if not self.is_structured:
            return self
        eye = np.eye(self.d)
        if np.abs(self.mf - self.m * eye).max() <= 1e-12 * self.m and np.abs(self.lf - self.L * eye).max() <= 1e-12 * self.L:
            return FunctionClass(self.m, self.L, self.d)
        return self

    def with_dim(self, d: int) -> "FunctionClass":
        if self.is_structured:
            raise ValueError("cannot change the dimension of a structured class")
        return FunctionClass(self.m, self.L, d)


@dataclass(frozen=True, eq=False)
class AlgorithmRealization:
    """Algorithm matrices together with their integrator factorization."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    ac: np.ndarray
    bc: np.ndarray
    cc: np.ndarray
    dc: np.ndarray
    d: int
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def system(self) -> StateSpace:
        return StateSpace(self.a, self.b, self.c, np.zeros((self.d, self.d)))

    @property
    def controller(self) -> StateSpace:
        return StateSpace(self.ac, self.bc, self.cc, self.dc)

    def canonical(self) -> StateSpace:
        """Realization ``[[I, 0], [B_c, A_c]], [I; 0], [D_c, C_c]``."""
        d, nc = self.d, self.ac.shape[0]
        a = np.block([[np.eye(d), np.zeros((d, nc))], [self.bc, self.ac]])
        b = np.vstack([np.eye(d), np.zeros((nc, d))])
        c = np.hstack([self.dc, self.cc])
        return StateSpace(a, b, c, np.zeros((d, d)))

    def factored(self) -> StateSpace:
        """Controller in series with the integrator."""
        return series(self.controller, integrator(self.d))

    @classmethod
    def from_factors(cls, ac, bc, cc, dc, name: str = "", meta=None) -> "AlgorithmRealization":
        dc = np.atleast_2d(np.asarray(dc, dtype=float))
        d = dc.shape[0]
        ac = _sq(ac)
        nc = ac.shape[0]
        ctrl = StateSpace(ac, np.asarray(bc, dtype=float).reshape(nc, d), np.asarray(cc, dtype=float).reshape(d, nc), dc)
        alg = cls(np.zeros((0, 0)), np.zeros((0, d)), np.zeros((d, 0)), ctrl.a, ctrl.b, ctrl.c, ctrl.d, d, name, dict(meta or {}))
        can = alg.canonical()
        return cls(can.a, can.b, can.c, ctrl.a, ctrl.b, ctrl.c, ctrl.d, d, name, dict(meta or {}))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "d": self.d,
            "A": self.a.tolist(), "B": self.b.tolist(), "C": self.c.tolist(),
            "Ac": self.ac.tolist(), "Bc": self.bc.tolist(), "Cc": self.cc.tolist(), "Dc": self.dc.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AlgorithmRealization":
        d = int(data["d"])
        if "A" in data:
            n = len(data["A"])
            sys_ = StateSpace(np.asarray(data["A"], dtype=float).reshape(n, n), np.asarray(data["B"], dtype=float).reshape(n, d),
                              np.asarray(data["C"], dtype=float).reshape(d, n), np.zeros((d, d)))
            if "Ac" not in data:
                out = structure_check(sys_)
                return cls(out.a, out.b, out.c, out.ac, out.bc, out.cc, out.dc, d, data.get("name", ""), data.get("meta", {}))
        nc = len(data["Ac"])
        ac = np.asarray(data["Ac"], dtype=float).reshape(nc, nc)
        bc = np.asarray(data["Bc"], dtype=float).reshape(nc, d)
        cc = np.asarray(data["Cc"], dtype=float).reshape(d, nc)
        dc = np.asarray(data["Dc"], dtype=float).reshape(d, d)
        if "A" not in data:
            return cls.from_factors(ac, bc, cc, dc, data.get("name", ""), data.get("meta", {}))
        return cls(sys_.a, sys_.b, sys_.c, ac, bc, cc, dc, d, data.get("name", ""), data.get("meta", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AlgorithmRealization":
        return cls.from_dict(json.loads(text))


def _sq(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((0, 0))
    return np.atleast_2d(a)


# ---------------------------------------------------------------------------
# catalog

def _momentum_matrices(alpha, beta, gamma, d):
    eye = np.eye(d)
    a = np.block([[(1 + beta) * eye, -beta * eye], [eye, 0 * eye]])
    b = np.vstack([-alpha * eye, 0 * eye])
    c = np.hstack([(1 + gamma) * eye, -gamma * eye])
    return StateSpace(a, b, c, np.zeros((d, d)))


def triple_momentum_parameters(m: float, L: float) -> tuple[float, float, float]:
    """Step size and momentum weights ``(alpha, beta, gamma)`` of the triple momentum method."""
    rb = 1.0 - 1.0 / np.sqrt(L / m)
    alpha = (1 + rb) / L
    beta = rb**2 / (2 - rb)
    gamma = rb**2 / ((1 + rb) * (2 - rb))
    return alpha, beta, gamma


def catalog(name: str, d: int = 1, fc: FunctionClass | None = None, **params) -> AlgorithmRealization:
    """Named algorithms: gradient_descent(alpha), heavy_ball(alpha, beta),
    nesterov(alpha, beta), triple_momentum(m, L)."""
    if name == "gradient_descent":
        alpha = float(params["alpha"])
        hi = 2.0 / fc.L if fc is not None else np.inf
        if not 0 < alpha < hi:
            raise ValueError("gradient descent needs 0 < alpha < 2/L")
        eye = np.eye(d)
        g = StateSpace(eye, -alpha * eye, eye, np.zeros((d, d)))
        meta = {"alpha": alpha}
    elif name in ("heavy_ball", "nesterov"):
        alpha, beta = float(params["alpha"]), float(params["beta"])
        if not 0 <= beta < 1:
            raise ValueError("momentum parameter must lie in [0, 1)")
        hi = 2 * (1 + beta) / fc.L if fc is not None else np.inf
        if not 0 < alpha < hi:
            raise ValueError("step size must lie in (0, 2(1+beta)/L)")
        g = _momentum_matrices(alpha, beta, 0.0 if name == "heavy_ball" else beta, d)
        meta = {"alpha": alpha, "beta": beta}
    elif name == "triple_momentum":
        m = float(params.get("m", fc.m if fc is not None else np.nan))
        L = float(params.get("L", fc.L if fc is not None else np.nan))
        if not (m > 0 and L > m):
            raise ValueError("triple momentum needs 0 < m < L")
        alpha, beta, gamma = triple_momentum_parameters(m, L)
        g = _momentum_matrices(alpha, beta, gamma, d)
        meta = {"alpha": alpha, "beta": beta, "gamma": gamma, "m": m, "L": L, "source": "external parameter formulas"}
    else:
        raise ValueError(f"unknown algorithm {name!r}")
    alg = structure_check(g)
    return AlgorithmRealization(alg.a, alg.b, alg.c, alg.ac, alg.bc, alg.cc, alg.dc, d, name, meta)


CATALOG = ("gradient_descent", "heavy_ball", "nesterov", "triple_momentum")


# ---------------------------------------------------------------------------
# structure

def structure_check(g: StateSpace, tol: float = 1e-10) -> AlgorithmRealization:
    """Factor ``g`` as controller times integrator or raise :class:`StructureFailure`."""
    if g.inputs != g.outputs:
        raise StructureFailure("algorithm must have as many outputs as inputs")
    if np.any(np.abs(g.d) > tol):
        raise StructureFailure("algorithm must have zero feedthrough")
    d = g.inputs
    if not hautus(g.a, g.c, "detectable", 1.0):
        g = observable_part(g, tol)
    n = g.n
    if n < d:
        raise StructureFailure(f"state dimension {n} is smaller than d={d}")
    a_minus = g.a - np.eye(n)
    rank = block_rank(a_minus, tol)
    if rank != n - d:
        raise StructureFailure(f"rank(A - I) = {rank}, expected n - d = {n - d}")
    nl = left_kernel_basis(a_minus, 1e-9)
    if nl.shape[1] != d:
        raise StructureFailure("left kernel of A - I has the wrong dimension")
    mb = nl.T @ g.b
    if np.linalg.cond(mb) > 1e12:
        raise StructureFailure("T1^T B is singular: 1 is an uncontrollable eigenvalue")
    t1 = nl @ np.linalg.inv(mb).T
    t2 = kernel_basis(g.b.T, 1e-12)
    t = np.hstack([t1, t2])
    if t.shape != (n, n) or np.linalg.cond(t) > 1e12:
        raise StructureFailure("transformation to integrator form is singular")
    # xi = T^T x, i.e. x = T^-T xi
    h = coordinate_change(g, np.linalg.inv(t.T))
    ac, bc = h.a[d:, d:], h.a[d:, :d]
    cc, dc = h.c[:, d:], h.c[:, :d]
    return AlgorithmRealization(g.a, g.b, g.c, ac, bc, cc, dc, d, meta={"transform": t.tolist()})


def fixed_point(alg: AlgorithmRealization, z_star, tol: float = 1e-10) -> np.ndarray:
    """Unique ``x*`` with ``A x* = x*`` and ``C x* = z*``."""
    z_star = np.atleast_1d(np.asarray(z_star, dtype=float))
    n = alg.n
    m = np.vstack([alg.a - np.eye(n), alg.c])
    rhs = np.concatenate([np.zeros(n), z_star])
    if block_rank(m, 1e-12) < n:
        raise StructureFailure("fixed-point equations are singular")
    x, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    if np.linalg.norm(m @ x - rhs) > tol * max(1.0, np.linalg.norm(rhs)):
        raise StructureFailure("fixed-point equations have no solution")
    return x


def kron_expand(alg: AlgorithmRealization, d: int) -> AlgorithmRealization:
    """Apply a scalar algorithm coordinate-wise in dimension ``d``."""
    if d == alg.d:
        return alg
    if alg.d != 1:
        raise ValueError("only scalar algorithms can be expanded")
    k = lambda m: np.kron(m, np.eye(d))
    return AlgorithmRealization.from_factors(k(alg.ac), k(alg.bc), k(alg.cc), k(alg.dc), alg.name, alg.meta)


def weighted_system(alg: AlgorithmRealization | StateSpace, fc: FunctionClass, rho: float) -> StateSpace:
    """``[rho^-1 (A + B M C), rho^-1 B; (L - M) C, -I]`` with ``M``, ``L`` the Hessian bounds."""
    a, b, c = (alg.a, alg.b, alg.c)
    d = b.shape[1]
    lo = fc.lower if fc.d == d else fc.m * np.eye(d)
    spread = fc.spread if fc.d == d else (fc.L - fc.m) * np.eye(d)
    return StateSpace((a + b @ lo @ c) / rho, b / rho, spread @ c, -np.eye(d))


# ---------------------------------------------------------------------------
# certification

@dataclass
class RateCertificate:
    rho: float
    ell: int
    class_tag: str
    lambda_star: ZamesFalbParams | None
    margin: float
    method: str
    x: np.ndarray | None = None
    status: str = "feasible"
    message: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "ell": self.ell,
            "class": self.class_tag,
            "lambda_star": None if self.lambda_star is None else self.lambda_star.to_dict(),
            "margin": self.margin,
            "method": self.method,
            "status": self.status,
            "message": self.message,
            "x": None if self.x is None else np.asarray(self.x).tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RateCertificate":
        lam = data.get("lambda_star")
        x = data.get("x")
        return cls(
            float(data["rho"]), int(data["ell"]), data["class"],
            None if lam is None else ZamesFalbParams.from_dict(lam),
            float(data["margin"]), data["method"],
            None if x is None else np.asarray(x, dtype=float),
            data.get("status", "feasible"), data.get("message", ""), data.get("meta", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RateCertificate":
        return cls.from_dict(json.loads(text))


def multiplied_system(gt: StateSpace, ell: int):
    """State matrices of ``Pi(Lam) G~``; output matrices are returned as builders in ``Lam``."""
    d = gt.inputs
    af, bf = fir_shift(ell, d)
    nf, n = af.shape[0], gt.n
    a = np.block([[af, bf @ gt.c], [np.zeros((n, nf)), gt.a]])
    b = np.vstack([bf @ gt.d, gt.b])

    def outputs(cf, df):
        c = lmi.hstack([cf, df @ gt.c]) if nf else df @ gt.c
        return c, df @ gt.d

    return a, b, outputs


def analysis_problem(alg, fc: FunctionClass, rho: float, ell: int, class_tag: str = "repeated"):
    """Assemble the analysis LMI jointly in the Lyapunov matrix and the multiplier."""
    gt = weighted_system(alg, fc, rho)
    d = gt.inputs
    a, b, outputs = multiplied_system(gt, ell)
    prob = lmi.Problem(name="analysis")
    x = prob.sym("X", a.shape[0])
    lam = prob.zf("Lam", ell, d, rho, class_tag, base=fc.congruence())
    c, dd = outputs(lam.cf(), lam.df())
    prob.add(x.expr, ">", "X > 0")
    prob.add(lmi.kyp_expr(a, b, c, dd, x.expr), "<", "KYP")
    return prob, gt


def certify(alg, fc: FunctionClass, rho: float, ell: int, class_tag: str = "repeated",
            cfg: RunConfig | None = None, reduce: bool = True) -> RateCertificate:
    """Try to certify ``rho``-convergence with a length-``ell`` multiplier."""
    cfg = cfg or default_config()
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if isinstance(alg, StateSpace):
        alg = structure_check(alg)
    gt = weighted_system(alg, fc, rho)
    ok, radius = is_schur(gt.a, cfg.tol_schur)
    if not ok:
        return RateCertificate(rho, ell, class_tag, None, -np.inf, "analysis_lmi", status="infeasible",
                               message=f"rho^-1 (A + B m C) is not Schur (radius {radius:.6g})")
    prob, _ = analysis_problem(alg, fc, rho, ell, class_tag)
    sol = lmi.solve_structured(prob, alg.d, cfg, reduce=reduce and not fc.is_structured)
    lam = sol.assignment["Lam"] if sol.feasible else None
    return RateCertificate(rho, ell, class_tag, lam, sol.margin, "analysis_lmi",
                           sol.assignment["X"] if sol.feasible else None, sol.status, sol.message,
                           {"iterations": sol.iterations, "ipm": sol.residuals.get("ipm_status")})


def verify_certificate(alg, fc: FunctionClass, cert: RateCertificate) -> float:
    """Re-evaluate the analysis LMI at the stored witnesses; returns the smallest slack."""
    if cert.lambda_star is None or cert.x is None:
        raise ValueError("certificate carries no witnesses")
    ok, why = is_member(_pullback(cert.lambda_star, fc))
    if not ok:
        return -np.inf
    gt = weighted_system(alg, fc, cert.rho)
    a, b, outputs = multiplied_system(gt, cert.ell)
    lam = cert.lambda_star
    cf = np.hstack(lam.blocks[:-1]) if cert.ell else np.zeros((lam.d, 0))
    c, dd = outputs(lmi.Expr.lift(cf), lmi.Expr.lift(lam.blocks[-1]))
    k = lmi.kyp_expr(a, b, c, dd, cert.x).const
    return float(min(np.linalg.eigvalsh(cert.x).min(), -np.linalg.eigvalsh(k).max()))


def _pullback(lam: ZamesFalbParams, fc: FunctionClass) -> ZamesFalbParams:
    t = fc.congruence()
    if t is None:
        return lam
    ti = np.linalg.inv(t)
    return ZamesFalbParams(tuple(ti @ b @ ti.T for b in lam.blocks), lam.rho, lam.class_tag)


@dataclass
class BisectionResult:
    rho_star: float
    certificate: RateCertificate | None
    status: str
    lo: float
    hi: float
    evaluations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rho_star": self.rho_star,
            "status": self.status,
            "bracket": [self.lo, self.hi],
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "evaluations": self.evaluations,
        }


def bisect(test, lo: float, hi: float, tol: float) -> BisectionResult:
    """Smallest ``rho`` in ``[lo, hi]`` with ``test(rho).feasible`` (monotonicity assumed).

    ``test`` returns an object with a ``feasible`` attribute; inconclusive
    answers count as infeasible.
    """
    evals = []
    top = test(hi)
    evals.append((hi, top.status if hasattr(top, "status") else bool(top.feasible)))
    if not top.feasible:
        return BisectionResult(np.nan, None, "no_certificate", lo, hi, evals)
    best = top
    bottom = test(lo)
    evals.append((lo, bottom.status if hasattr(bottom, "status") else bool(bottom.feasible)))
    if bottom.feasible:
        return BisectionResult(lo, bottom, "at_lower_bracket", lo, hi, evals)
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        res = test(mid)
        evals.append((mid, res.status if hasattr(res, "status") else bool(res.feasible)))
        if res.feasible:
            b, best = mid, res
        else:
            a = mid
    return BisectionResult(b, best, "ok", a, b, evals)


def default_bracket(fc: FunctionClass) -> tuple[float, float]:
    return max(1.0 - 1.0 / np.sqrt(fc.kappa) - 0.05, 1e-3), 1.0 - 1e-4


def bisect_rate(alg, fc: FunctionClass, ell: int, class_tag: str = "repeated", tol: float | None = None,
                bracket: tuple[float, float] | None = None, cfg: RunConfig | None = None) -> BisectionResult:
    cfg = cfg or default_config()
    tol = cfg.tol_bisect if tol is None else tol
    lo, hi = bracket or default_bracket(fc)
    if isinstance(alg, StateSpace):
        alg = structure_check(alg)
    return bisect(lambda r: certify(alg, fc, r, ell, class_tag, cfg), lo, hi, tol)
