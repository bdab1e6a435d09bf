"""KYP-type inequalities in Lyapunov-matrix form.

Supply rates are written for the signal order ``(z, w)``::

    [z; w]^T [[q, s], [s^T, r]] [z; w]

and the negative-real choice is ``q = r = 0``, ``s = I``.
"""
from __future__ import annotations

import numpy as np

from ..sysops import StateSpace
from .expr import Expr, LmiError, hstack


def _is_const(x) -> bool:
    return not isinstance(x, Expr) or not x.coefs


def _const(x) -> np.ndarray:
    return x.const if isinstance(x, Expr) else np.atleast_2d(np.asarray(x, dtype=float))


def dissipation(top, bottom, outz, outw, x, q=None, s=None, r=None) -> Expr:
    """``top^T x top - bottom^T x bottom + [outz; outw]^T P [outz; outw]``.

    ``top`` and ``bottom`` must be constant when ``x`` is a decision
    expression; ``outz`` may depend affinely on decision variables when
    ``q`` vanishes, and ``outw`` must then be constant whenever ``r`` does
    not vanish.
    """
    x = Expr.lift(x)
    outz, outw = Expr.lift(outz), Expr.lift(outw)
    nz, nw = outz.shape[0], outw.shape[0]
    s = np.eye(nz, nw) if s is None else np.atleast_2d(np.asarray(s, dtype=float))
    q = np.zeros((nz, nz)) if q is None else np.atleast_2d(np.asarray(q, dtype=float))
    r = np.zeros((nw, nw)) if r is None else np.atleast_2d(np.asarray(r, dtype=float))
    if x.coefs and not (_is_const(top) and _is_const(bottom)):
        raise LmiError("state rows must be constant when the Lyapunov matrix is a variable")
    top, bottom = _const(top), _const(bottom)
    out = top.T @ x @ top - bottom.T @ x @ bottom
    if np.any(q):
        if not _is_const(outz):
            raise LmiError("non-zero q requires constant output rows")
        oz = _const(outz)
        out = out + oz.T @ q @ oz
    if np.any(r):
        if not _is_const(outw):
            raise LmiError("non-zero r requires constant input rows")
        ow = _const(outw)
        out = out + ow.T @ r @ ow
    if np.any(s):
        if _is_const(outz):
            out = out + (_const(outz).T @ s @ outw).he()
        elif _is_const(outw):
            out = out + (outz.T @ (s @ _const(outw))).he()
        else:
            raise LmiError("cross term of two decision-dependent rows is not affine")
    return out.sym()


def kyp_expr(a, b, c, d, x, q=None, s=None, r=None, e=None) -> Expr:
    """Dissipation inequality for ``e xi+ = a xi + b w, z = c xi + d w`` (``e = I`` by default).

    Negative definiteness of the result together with ``x > 0`` certifies
    stability and strict dissipativity with respect to the supply rate.
    """
    a, b = _const(a), _const(b)
    c, d = Expr.lift(c), Expr.lift(d)
    n, k = a.shape
    m = b.shape[1]
    if b.shape[0] != n or c.shape[1] != k or d.shape[1] != m or c.shape[0] != d.shape[0]:
        raise LmiError("kyp dimensions are inconsistent")
    e = np.eye(n, k) if e is None else _const(e)
    top = np.hstack([a, b])
    bottom = np.hstack([e, np.zeros((n, m))])
    outz = hstack([c, d]) if k else d
    outw = np.hstack([np.zeros((m, k)), np.eye(m)])
    return dissipation(top, bottom, outz, outw, x, q, s, r)


def kyp_constraint(g: StateSpace, x, q=None, s=None, r=None, c=None, d=None) -> Expr:
    """KYP expression for the system ``g``; ``c``/``d`` override its output matrices."""
    return kyp_expr(g.a, g.b, g.c if c is None else c, g.d if d is None else d, x, q, s, r)


def snr_frequency_margin(g: StateSpace, samples: int = 512) -> float:
    """``max_theta lambda_max(G + G^*)`` on the unit circle (negative iff SNR, for stable ``g``)."""
    from ..sysops import frequency_response

    worst = -np.inf
    for th in np.linspace(0.0, np.pi, samples):
        h = frequency_response(g, np.exp(1j * th))
        worst = max(worst, float(np.linalg.eigvalsh(h + h.conj().T).max()))
    return worst
