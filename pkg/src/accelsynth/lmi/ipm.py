"""Dense primal-dual interior-point method for small block SDPs.

Standard form (dual side)::

    maximize  b^T y
    s.t.      S_j = C_j - sum_i y_i A_ij  >= 0   (PSD blocks)
              s   = c   - A_lp y          >= 0   (one nonnegative orthant block)

The primal is ``min sum <C_j, X_j> + c^T x`` subject to
``sum_j <A_ij, X_j> + (A_lp^T x)_i = b_i``. Search directions use the
HKM scaling with a Mehrotra predictor-corrector; step lengths come from
Cholesky-based eigenvalue bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .. import _kernels


@dataclass
class SdpData:
    c_blocks: list
    a_blocks: list  # each of shape (k, p, p)
    c_lp: np.ndarray
    a_lp: np.ndarray  # (q, k)
    b: np.ndarray

    @property
    def k(self) -> int:
        return self.b.shape[0]


@dataclass
class IpmResult:
    y: np.ndarray
    x_blocks: list
    s_blocks: list
    x_lp: np.ndarray
    s_lp: np.ndarray
    status: str
    iterations: int
    pobj: float
    dobj: float
    gap: float
    pinf: float
    dinf: float
    history: list = field(default_factory=list)


def _aop(data: SdpData, xs, x_lp) -> np.ndarray:
    out = data.a_lp.T @ x_lp if x_lp.size else np.zeros(data.k)
    for a, x in zip(data.a_blocks, xs):
        out = out + a.reshape(data.k, -1) @ x.ravel()
    return out


def _aadj(data: SdpData, y):
    blocks = [np.einsum("i,ipq->pq", y, a) for a in data.a_blocks]
    lp = data.a_lp @ y if data.a_lp.size else np.zeros(0)
    return blocks, lp


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    if x.size == 0:
        return np.inf
    try:
        l = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    li = sla.solve_triangular(l, np.eye(x.shape[0]), lower=True)
    m = li @ dx @ li.T
    lam = np.linalg.eigvalsh(0.5 * (m + m.T)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve_sdp(data: SdpData, max_iter: int = 80, tol: float = 1e-9) -> IpmResult:
    k = data.k
    b = data.b
    dims = [c.shape[0] for c in data.c_blocks]
    q = data.c_lp.shape[0]
    ntot = sum(dims) + q
    patterns = [_kernels.sparse_pattern(a) for a in data.a_blocks]

    # starting point (scaled identities)
    xs, ss = [], []
    for c, a, p in zip(data.c_blocks, data.a_blocks, dims):
        an = np.sqrt(np.einsum("ipq,ipq->i", a, a))
        xi = max(10.0, np.sqrt(p), p * np.max((1 + np.abs(b)) / (1 + an)))
        eta = max(10.0, np.sqrt(p), an.max(initial=0.0), np.linalg.norm(c))
        xs.append(xi * np.eye(p))
        ss.append(eta * np.eye(p))
    if q:
        an = np.linalg.norm(data.a_lp, axis=0)
        xi = max(10.0, np.sqrt(q), np.sqrt(q) * np.max((1 + np.abs(b)) / (1 + an)))
        x_lp = xi * np.ones(q)
        s_lp = np.maximum(10.0, np.abs(data.c_lp) + 1.0)
    else:
        x_lp = np.zeros(0)
        s_lp = np.zeros(0)
    y = np.zeros(k)

    normb = 1.0 + np.linalg.norm(b)
    normc = 1.0 + np.sqrt(sum(np.linalg.norm(c) ** 2 for c in data.c_blocks) + np.linalg.norm(data.c_lp) ** 2)
    status = "max_iter"
    history = []
    it = 0
    best = None
    for it in range(1, max_iter + 1):
        rp = b - _aop(data, xs, x_lp)
        aty, aty_lp = _aadj(data, y)
        rd = [c - s - t for c, s, t in zip(data.c_blocks, ss, aty)]
        rd_lp = data.c_lp - s_lp - aty_lp
        gapv = sum(np.vdot(x, s) for x, s in zip(xs, ss)) + x_lp @ s_lp
        mu = gapv / ntot
        pobj = sum(np.vdot(c, x) for c, x in zip(data.c_blocks, xs)) + data.c_lp @ x_lp
        dobj = b @ y
        pinf = np.linalg.norm(rp) / normb
        dinf = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in rd) + np.linalg.norm(rd_lp) ** 2) / normc
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        history.append((it, pobj, dobj, relgap, pinf, dinf, mu))
        score = max(relgap, pinf, dinf)
        if best is None or score < best[0]:
            best = (score, y.copy(), [x.copy() for x in xs], [s.copy() for s in ss], x_lp.copy(), s_lp.copy(), pobj, dobj, relgap, pinf, dinf)
        if relgap < tol and pinf < tol and dinf < tol:
            status = "optimal"
            break

        # Schur complement
        sinv = []
        ok = True
        for s in ss:
            try:
                l = np.linalg.cholesky(s)
                li = sla.solve_triangular(l, np.eye(s.shape[0]), lower=True)
                sinv.append(li.T @ li)
            except np.linalg.LinAlgError:
                ok = False
                break
        if not ok:
            status = "failed"
            break
        m = np.zeros((k, k))
        for a, pat, x, si in zip(data.a_blocks, patterns, xs, sinv):
            g = np.matmul(np.matmul(x, a), si)
            m += _kernels.schur_block(a, pat, g)
        if q:
            m += data.a_lp.T @ ((x_lp / s_lp)[:, None] * data.a_lp)
        m = 0.5 * (m + m.T)
        try:
            cho = sla.cho_factor(m)
            msolve = lambda r: sla.cho_solve(cho, r)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            reg = 1e-12 * (1.0 + np.abs(np.diag(m)).max())
            try:
                cho = sla.cho_factor(m + reg * np.eye(k))
                msolve = lambda r: sla.cho_solve(cho, r)
            except (np.linalg.LinAlgError, sla.LinAlgError):
                msolve = lambda r: np.linalg.lstsq(m, r, rcond=None)[0]

        xrdsi = [x @ r @ si for x, r, si in zip(xs, rd, sinv)]

        def direction(rcsi, rc_lp):
            # rcsi = Rc S^-1 per block, rc_lp = Rc / s for the orthant block
            lp_term = (rc_lp - x_lp * rd_lp / s_lp) if q else x_lp
            h = rp - _aop(data, [r - t for r, t in zip(rcsi, xrdsi)], lp_term)
            dy = msolve(h)
            aty_d, aty_lp_d = _aadj(data, dy)
            ds = [r - t for r, t in zip(rd, aty_d)]
            dx = []
            for x, d_s, rc, si in zip(xs, ds, rcsi, sinv):
                v = rc - x @ d_s @ si
                dx.append(0.5 * (v + v.T))
            if q:
                ds_lp = rd_lp - aty_lp_d
                dx_lp = rc_lp - x_lp * ds_lp / s_lp
            else:
                ds_lp = dx_lp = np.zeros(0)
            return dy, dx, ds, dx_lp, ds_lp

        def steps(dx, ds, dx_lp, ds_lp):
            ap = min([_max_step(x, d) for x, d in zip(xs, dx)] + [_max_step_lp(x_lp, dx_lp) if q else np.inf])
            ad = min([_max_step(s, d) for s, d in zip(ss, ds)] + [_max_step_lp(s_lp, ds_lp) if q else np.inf])
            return ap, ad

        # predictor
        dy, dx, ds, dx_lp, ds_lp = direction([-x for x in xs], -x_lp)
        ap, ad = steps(dx, ds, dx_lp, ds_lp)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (
            sum(np.vdot(x + ap * a_, s + ad * b_) for x, a_, s, b_ in zip(xs, dx, ss, ds))
            + (x_lp + ap * dx_lp) @ (s_lp + ad * ds_lp)
        ) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        rcsi = []
        for x, s, si, a_, b_ in zip(xs, ss, sinv, dx, ds):
            rcsi.append(sigma * mu * si - x - a_ @ b_ @ si)
        rc_lp = (sigma * mu - x_lp * s_lp - dx_lp * ds_lp) / s_lp if q else x_lp
        dy, dx, ds, dx_lp, ds_lp = direction(rcsi, rc_lp)
        ap, ad = steps(dx, ds, dx_lp, ds_lp)
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        xs = [x + ap * d for x, d in zip(xs, dx)]
        ss = [s + ad * d for s, d in zip(ss, ds)]
        if q:
            x_lp = x_lp + ap * dx_lp
            s_lp = s_lp + ad * ds_lp
        y = y + ad * dy
        if max(ap, ad) < 1e-10:
            status = "stalled"
            break

    if status != "optimal" and best is not None:
        _, y, xs, ss, x_lp, s_lp, pobj, dobj, relgap, pinf, dinf = best
    return IpmResult(y, xs, ss, x_lp, s_lp, status, it, float(pobj), float(dobj), float(relgap), float(pinf), float(dinf), history)
