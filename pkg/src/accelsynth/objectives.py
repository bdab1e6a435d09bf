"""Objective oracles, trajectory simulation and empirical checks.

Quadratic objectives run through the compiled kernel in
``_kernels.simulate_quadratic``; other objectives use a plain loop over the
gradient oracle. Empirical rates are slopes of ``log |z_k - z*|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .analysis import AlgorithmRealization, FunctionClass, fixed_point, kron_expand
from .multipliers import ZamesFalbParams

BLOWUP = 1e12
FLOOR = 1e-12
DEFAULT_HORIZON = 500


class RateEstimateError(ValueError):
    """Too few usable samples to fit a rate."""


# ---------------------------------------------------------------------------
# objectives

@dataclass(frozen=True, eq=False)
class Objective:
    kind: str
    m: float
    L: float
    d: int
    grad: Callable[[np.ndarray], np.ndarray]
    value: Callable[[np.ndarray], float] | None
    z_star: np.ndarray
    hess: np.ndarray | None = None
    lin: np.ndarray | None = None

    @classmethod
    def quadratic(cls, hess, lin=None, m: float | None = None, L: float | None = None,
                  tol: float = 1e-9) -> "Objective":
        """``f(z) = z^T H z / 2 - b^T z``; ``m``/``L`` default to the extreme eigenvalues."""
        h = np.atleast_2d(np.asarray(hess, dtype=float))
        d = h.shape[0]
        if h.shape != (d, d) or np.abs(h - h.T).max() > tol * (1.0 + np.abs(h).max()):
            raise ValueError("Hessian must be symmetric")
        h = (h + h.T) / 2
        b = np.zeros(d) if lin is None else np.asarray(lin, dtype=float).reshape(d)
        ev = np.linalg.eigvalsh(h)
        m = float(ev[0]) if m is None else float(m)
        L = float(ev[-1]) if L is None else float(L)
        if ev[0] <= 0 or ev[0] < m - tol * L or ev[-1] > L + tol * L:
            raise ValueError(f"Hessian spectrum [{ev[0]:.3g}, {ev[-1]:.3g}] not inside [{m:.3g}, {L:.3g}]")
        z_star = np.linalg.solve(h, b)
        return cls("quadratic", m, L, d, lambda z: h @ z - b, lambda z: 0.5 * z @ h @ z - b @ z, z_star, h, b)

    @classmethod
    def logistic_ridge(cls, data, labels, mu: float) -> "Objective":
        """Mean logistic loss plus ``mu/2 |z|^2``; labels in {-1, +1}."""
        a = np.atleast_2d(np.asarray(data, dtype=float))
        y = np.asarray(labels, dtype=float).reshape(a.shape[0])
        n, d = a.shape
        L = mu + float(np.linalg.eigvalsh(a.T @ a).max()) / (4 * n)

        def value(z):
            return float(np.mean(np.logaddexp(0.0, -y * (a @ z))) + 0.5 * mu * z @ z)

        def grad(z):
            s = -y / (1.0 + np.exp(y * (a @ z)))
            return a.T @ s / n + mu * z

        return cls("logistic_ridge", float(mu), L, d, grad, value, reference_minimizer(grad, L, d))

    @classmethod
    def custom(cls, grad, m: float, L: float, d: int, z_star=None, value=None) -> "Objective":
        z = reference_minimizer(grad, L, d) if z_star is None else np.asarray(z_star, dtype=float).reshape(d)
        return cls("custom", float(m), float(L), int(d), grad, value, z)

    def spot_check(self, samples: int = 100, seed: int = 0, scale: float = 1.0, tol: float = 1e-9) -> bool:
        """Strong monotonicity and Lipschitz bounds on random secants."""
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            x = self.z_star + scale * rng.standard_normal(self.d)
            y = self.z_star + scale * rng.standard_normal(self.d)
            dx, dg = x - y, self.grad(x) - self.grad(y)
            n2 = float(dx @ dx)
            if dg @ dx < self.m * n2 - tol * (1 + n2):
                return False
            if np.linalg.norm(dg) > self.L * np.sqrt(n2) + tol * (1 + np.sqrt(n2)):
                return False
        return True


def reference_minimizer(grad, L: float, d: int, x0=None, max_iter: int = 1_000_000, tol: float = 1e-12) -> np.ndarray:
    """Gradient descent with step ``1/L`` until ``|grad| <= tol``."""
    x = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= tol:
            break
        x = x - g / L
    return x


def random_quadratic(d: int, m: float, L: float, rng: np.random.Generator, pinned: bool = True) -> Objective:
    """Random quadratic whose spectrum contains ``m`` and ``L`` (when ``d > 1``)."""
    ev = rng.uniform(m, L, d)
    if pinned:
        ev[0] = m if d > 1 or rng.random() < 0.5 else L
        if d > 1:
            ev[1] = L
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    h = q @ np.diag(ev) @ q.T
    return Objective.quadratic((h + h.T) / 2, rng.standard_normal(d), m, L)


def random_structured_quadratic(fc: FunctionClass, rng: np.random.Generator) -> Objective:
    """Quadratic with ``M_f <= H <= L_f``, extreme in two directions."""
    d = fc.d
    w, v = np.linalg.eigh(fc.spread)
    root = v @ np.diag(np.sqrt(w)) @ v.T
    ev = rng.uniform(0, 1, d)
    ev[0] = 0.0
    if d > 1:
        ev[1] = 1.0
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    h = fc.lower + root @ q @ np.diag(ev) @ q.T @ root
    return Objective.quadratic((h + h.T) / 2, rng.standard_normal(d), fc.m, fc.L)


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True, eq=False)
class Trajectory:
    xs: np.ndarray
    zs: np.ndarray
    ws: np.ndarray
    err: np.ndarray
    x0: np.ndarray
    divergent: bool = False

    @property
    def steps(self) -> int:
        return self.xs.shape[0] - 1

    def replay_residual(self, alg: AlgorithmRealization, obj: Objective) -> float:
        """Largest violation of the recursion along the stored trajectory."""
        if not len(self.xs):
            return 0.0
        r1 = self.xs[1:] - self.xs[:-1] @ alg.a.T - self.ws[:-1] @ alg.b.T
        r2 = self.zs - self.xs @ alg.c.T
        r3 = self.ws - np.array([obj.grad(z) for z in self.zs])
        scale = 1.0 + np.abs(self.xs).max()
        return float(max(np.abs(r).max(initial=0.0) for r in (r1, r2, r3)) / scale)


def run(alg: AlgorithmRealization, obj: Objective, x0, N: int = DEFAULT_HORIZON) -> Trajectory:
    """Iterate ``x+ = A x + B grad f(C x)`` for ``N`` steps."""
    if N < 1:
        raise ValueError("horizon must be at least 1")
    if alg.d != obj.d:
        raise ValueError(f"algorithm acts on R^{alg.d}, objective on R^{obj.d}")
    x0 = np.asarray(x0, dtype=float).reshape(alg.n)
    if obj.hess is not None:
        xs, zs, ws, err, done = _kernels.simulate_quadratic(alg.a, alg.b, alg.c, obj.hess, obj.lin, obj.z_star,
                                                            x0, N, BLOWUP)
    else:
        xs, zs, ws, err, done = _simulate_oracle(alg, obj, x0, N)
    done = int(done)
    div = done < N
    return Trajectory(xs[: done + 1], zs[: done + 1], ws[: done + 1], err[: done + 1], x0, div)


def _simulate_oracle(alg, obj, x0, steps):
    xs = np.zeros((steps + 1, alg.n))
    zs = np.zeros((steps + 1, alg.d))
    ws = np.zeros((steps + 1, alg.d))
    err = np.zeros(steps + 1)
    x, done = x0.copy(), steps
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps + 1):
            z = alg.c @ x
            w = obj.grad(z)
            xs[k], zs[k], ws[k] = x, z, w
            err[k] = np.linalg.norm(z - obj.z_star)
            if not np.isfinite(err[k]) or not np.all(np.isfinite(w)) or np.linalg.norm(z) > BLOWUP:
                done = k
                break
            if k < steps:
                x = alg.a @ x + alg.b @ w
    return xs, zs, ws, err, done


def estimate_rate(traj: Trajectory | np.ndarray, min_samples: int = 20) -> float:
    """``exp`` of the least-squares slope of ``log err`` over the tail half of the usable horizon.

    The usable horizon ends before the first error at or below ``1e-12``.
    """
    err = np.asarray(traj.err if isinstance(traj, Trajectory) else traj, dtype=float)
    bad = np.flatnonzero(~(np.isfinite(err) & (err > FLOOR)))
    usable = err[: bad[0]] if len(bad) else err
    if len(usable) < min_samples:
        raise RateEstimateError(f"only {len(usable)} samples above {FLOOR:g}; need {min_samples}")
    k0 = len(usable) // 2
    k = np.arange(k0, len(usable))
    slope = np.polyfit(k, np.log(usable[k0:]), 1)[0]
    return float(np.exp(slope))


# ---------------------------------------------------------------------------
# Monte-Carlo rate probing

@dataclass
class MonteCarloResult:
    rho_hats: list = field(default_factory=list)
    divergences: int = 0
    unresolved: int = 0

    @property
    def rho_hat_max(self) -> float:
        return float(max(self.rho_hats)) if self.rho_hats else float("nan")

    @property
    def rho_hat_med(self) -> float:
        return float(np.median(self.rho_hats)) if self.rho_hats else float("nan")

    def to_dict(self) -> dict:
        return {"rho_hat_max": self.rho_hat_max, "rho_hat_med": self.rho_hat_med,
                "divergences": self.divergences, "runs": len(self.rho_hats) + self.unresolved,
                "unresolved": self.unresolved}


def monte_carlo(alg: AlgorithmRealization, fc: FunctionClass, runs: int = 100, seed: int = 0,
                d_max: int = 10, horizon: int = DEFAULT_HORIZON) -> MonteCarloResult:
    """Empirical rates on random quadratics with extreme Hessian eigenvalues.

    Scalar algorithms are applied coordinate-wise in a random dimension
    ``2..d_max``; otherwise the dimension of ``alg`` (or of a structured
    ``fc``) is used. Run ``i`` draws from ``default_rng([seed, i])`` so runs
    are independent and can be split across workers.
    """
    out = MonteCarloResult()
    for i in range(runs):
        rng = np.random.default_rng([seed, i])
        if fc.is_structured:
            obj = random_structured_quadratic(fc, rng)
            a = alg
        else:
            d = int(rng.integers(2, d_max + 1)) if alg.d == 1 and d_max >= 2 else alg.d
            a = kron_expand(alg, d)
            obj = random_quadratic(d, fc.m, fc.L, rng)
        x_star = fixed_point(a, obj.z_star)
        dx = rng.standard_normal(a.n)
        traj = run(a, obj, x_star + dx / np.linalg.norm(dx), horizon)
        if traj.divergent:
            out.divergences += 1
        try:
            out.rho_hats.append(estimate_rate(traj))
        except RateEstimateError:
            out.unresolved += 1
    return out


# ---------------------------------------------------------------------------
# empirical IQC check

def _weighted_gradient(kind: str, rng, d: int, spread: np.ndarray, scale: float):
    """Sample ``grad g`` for ``g`` convex, ``g(0)`` minimal, Hessian in ``[0, spread]``."""
    w, v = np.linalg.eigh(spread)
    root = v @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ v.T
    if kind == "quadratic":
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        u = q @ np.diag(rng.uniform(0, 1, d)) @ q.T
        h = root @ u @ root
        return lambda z: h @ z
    # g(z) = sum_i phi(S^(1/2) z)_i with phi' piecewise linear, slopes in [0, 1]
    knots = np.sort(rng.uniform(-scale, scale, int(rng.integers(2, 8))))
    knots = np.concatenate([[-10 * scale], knots[knots < 0], [0.0], knots[knots > 0], [10 * scale]])
    slopes = rng.uniform(0, 1, len(knots) - 1) * (rng.random(len(knots) - 1) < 0.8)
    vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    vals -= np.interp(0.0, knots, vals)
    lo, hi = slopes[0], slopes[-1]

    def phi(t):
        out = np.interp(t, knots, vals)
        out = np.where(t < knots[0], vals[0] + lo * (t - knots[0]), out)
        return np.where(t > knots[-1], vals[-1] + hi * (t - knots[-1]), out)

    return lambda z: root @ phi(root @ z)


def iqc_inner(params: ZamesFalbParams, spread: np.ndarray, grad, rho: float, zc: np.ndarray) -> float:
    """``<Pi(Lam) z~, w~>`` for the weighted response of ``grad`` to ``zc`` (rows are time)."""
    n = zc.shape[0]
    wts = rho ** np.arange(n)
    wc = np.array([grad(wts[k] * zc[k]) / wts[k] for k in range(n)])
    zt = zc @ spread.T - wc
    return _kernels.weighted_inner(params.impulse(), zt, wc)


def iqc_check(params: ZamesFalbParams, fc: FunctionClass, rho: float, g_samples: int = 200,
              horizon: int = 60, seed: int = 0) -> float:
    """Minimum inner product over random nonlinearities and decaying inputs.

    Half of the samples are quadratics, half are coordinate-wise
    piecewise-quadratic functions, both with Hessian in ``[0, L - m]``.
    For structured classes ``spread = L_f - M_f`` replaces ``(L - m) I``.
    """
    d = params.d
    spread = fc.spread if fc.is_structured else (fc.L - fc.m) * np.eye(d)
    if spread.shape != (d, d):
        raise ValueError("multiplier size does not match the function class")
    rng = np.random.default_rng(seed)
    worst = np.inf
    for i in range(g_samples):
        r = rng.uniform(0.5, 1.0) * rho
        zc = rng.standard_normal((horizon, d)) * (r ** np.arange(horizon))[:, None] / rho ** np.arange(horizon)[:, None]
        zc *= rng.uniform(0.1, 10.0)
        scale = float(np.abs(zc).max() * np.sqrt(np.abs(spread).max()))
        kind = "quadratic" if i % 2 == 0 else "piecewise"
        grad = _weighted_gradient(kind, rng, d, spread, scale)
        worst = min(worst, iqc_inner(params, spread, grad, rho, zc))
    return float(worst)
