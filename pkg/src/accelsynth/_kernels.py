"""Hot loops with a numba implementation and a pure-numpy fallback.

The numba path is used when numba imports and the environment variable
``ACCELSYNTH_DISABLE_NUMBA`` is unset or ``0``. Both implementations are
importable directly (``NUMPY_IMPL``, ``NUMBA_IMPL``) so they can be
benchmarked and cross-tested against each other.
"""
from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "ACCELSYNTH_DISABLE_NUMBA"


# --------------------------------------------------------------------------
# numpy reference implementations

def _simulate_quadratic_np(a, b, c, hess, lin, zstar, x0, steps, blowup):
    """Run ``x+ = a x + b (hess z - lin)``, ``z = c x`` for ``steps`` iterations.

    Returns states (steps+1, n), outputs, gradients, errors ``|z_k - z*|``
    and the number of completed steps (smaller than ``steps`` on divergence).
    """
    n = a.shape[0]
    d = c.shape[0]
    xs = np.zeros((steps + 1, n))
    zs = np.zeros((steps + 1, d))
    ws = np.zeros((steps + 1, d))
    err = np.zeros(steps + 1)
    x = x0.copy()
    done = steps
    for k in range(steps + 1):
        z = c @ x
        w = hess @ z - lin
        xs[k], zs[k], ws[k] = x, z, w
        err[k] = np.linalg.norm(z - zstar)
        if not np.isfinite(err[k]) or np.linalg.norm(z) > blowup:
            done = k
            break
        if k < steps:
            x = a @ x + b @ w
    return xs, zs, ws, err, done


def _fir_filter_np(blocks, sig):
    """``out_k = sum_i blocks[i] @ sig_{k-i}`` with zero initial history."""
    ell1 = blocks.shape[0]
    out = np.zeros_like(sig)
    for i in range(ell1):
        if i == 0:
            out += sig @ blocks[0].T
        else:
            out[i:] += sig[:-i] @ blocks[i].T
    return out


def _weighted_inner_np(blocks, zs, ws):
    return float(np.sum(_fir_filter_np(blocks, zs) * ws))


def _schur_block_np(dense, ptr, rows, cols, vals, g):
    """``m[i, j] = <A_i, g_j^T>`` using the dense coefficient stack."""
    k = dense.shape[0]
    return dense.reshape(k, -1) @ g.transpose(0, 2, 1).reshape(k, -1).T


# --------------------------------------------------------------------------
# numba implementations

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def simulate_quadratic(a, b, c, hess, lin, zstar, x0, steps, blowup):
        n = a.shape[0]
        d = c.shape[0]
        xs = np.zeros((steps + 1, n))
        zs = np.zeros((steps + 1, d))
        ws = np.zeros((steps + 1, d))
        err = np.zeros(steps + 1)
        x = x0.copy()
        z = np.zeros(d)
        w = np.zeros(d)
        done = steps
        for k in range(steps + 1):
            zn = 0.0
            en = 0.0
            for i in range(d):
                acc = 0.0
                for j in range(n):
                    acc += c[i, j] * x[j]
                z[i] = acc
                zn += acc * acc
                en += (acc - zstar[i]) ** 2
            for i in range(d):
                acc = -lin[i]
                for j in range(d):
                    acc += hess[i, j] * z[j]
                w[i] = acc
            xs[k] = x
            zs[k] = z
            ws[k] = w
            err[k] = np.sqrt(en)
            if not np.isfinite(en) or np.sqrt(zn) > blowup:
                done = k
                break
            if k < steps:
                xn = np.zeros(n)
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc += a[i, j] * x[j]
                    for j in range(d):
                        acc += b[i, j] * w[j]
                    xn[i] = acc
                x = xn
        return xs, zs, ws, err, done

    @njit(cache=True)
    def fir_filter(blocks, sig):
        ell1, d, _ = blocks.shape
        steps = sig.shape[0]
        out = np.zeros_like(sig)
        for k in range(steps):
            for i in range(min(ell1, k + 1)):
                for r in range(d):
                    acc = 0.0
                    for s in range(d):
                        acc += blocks[i, r, s] * sig[k - i, s]
                    out[k, r] += acc
        return out

    @njit(cache=True)
    def weighted_inner(blocks, zs, ws):
        ell1, d, _ = blocks.shape
        steps = zs.shape[0]
        total = 0.0
        for k in range(steps):
            for i in range(min(ell1, k + 1)):
                for r in range(d):
                    acc = 0.0
                    for s in range(d):
                        acc += blocks[i, r, s] * zs[k - i, s]
                    total += acc * ws[k, r]
        return total

    @njit(cache=True)
    def schur_block(dense, ptr, rows, cols, vals, g):
        k = ptr.shape[0] - 1
        m = np.zeros((k, k))
        for i in range(k):
            for q in range(ptr[i], ptr[i + 1]):
                a = rows[q]
                b = cols[q]
                v = vals[q]
                for j in range(k):
                    m[i, j] += v * g[j, b, a]
        return m

    return {
        "simulate_quadratic": simulate_quadratic,
        "fir_filter": fir_filter,
        "weighted_inner": weighted_inner,
        "schur_block": schur_block,
    }


NUMPY_IMPL = {
    "simulate_quadratic": _simulate_quadratic_np,
    "fir_filter": _fir_filter_np,
    "weighted_inner": _weighted_inner_np,
    "schur_block": _schur_block_np,
}

try:
    NUMBA_IMPL = _build_numba()
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_IMPL = None


def numba_enabled() -> bool:
    flag = os.environ.get(DISABLE_ENV, "0").strip().lower()
    return NUMBA_IMPL is not None and flag in ("", "0", "false", "no")


def backend() -> str:
    return "numba" if numba_enabled() else "numpy"


def _impl(name: str):
    return (NUMBA_IMPL if numba_enabled() else NUMPY_IMPL)[name]


def simulate_quadratic(a, b, c, hess, lin, zstar, x0, steps, blowup=1e12):
    f = _impl("simulate_quadratic")
    args = [np.ascontiguousarray(v, dtype=float) for v in (a, b, c, hess, lin, zstar, x0)]
    return f(*args, int(steps), float(blowup))


def fir_filter(blocks, sig):
    return _impl("fir_filter")(np.ascontiguousarray(blocks, dtype=float), np.ascontiguousarray(sig, dtype=float))


def weighted_inner(blocks, zs, ws):
    """``sum_k <(Pi zs)_k, ws_k>`` for the FIR filter with impulse response ``blocks``."""
    f = _impl("weighted_inner")
    return float(f(*(np.ascontiguousarray(v, dtype=float) for v in (blocks, zs, ws))))


def sparse_pattern(dense):
    """CSR-like listing of nonzeros of each matrix in a (k, p, p) stack."""
    k = dense.shape[0]
    flat = dense.reshape(k, -1)
    idx_i, idx_f = np.nonzero(flat)
    p = dense.shape[2]
    ptr = np.zeros(k + 1, dtype=np.int64)
    np.add.at(ptr, idx_i + 1, 1)
    ptr = np.cumsum(ptr)
    return ptr, (idx_f // p).astype(np.int64), (idx_f % p).astype(np.int64), flat[idx_i, idx_f].copy()


def schur_block(dense, pattern, g):
    """Schur-complement contribution ``m[i, j] = tr(A_i g_j)`` of one PSD block."""
    ptr, rows, cols, vals = pattern
    return _impl("schur_block")(dense, ptr, rows, cols, vals, np.ascontiguousarray(g))
