"""Discrete-time state-space algebra.

All systems are real, dense and small. A system with zero states is a
static gain; every operation below handles that case without special
treatment by the caller.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

TOL_SCHUR = 1e-10
TOL_RANK = 1e-12
COND_MAX = 1e12


class DimensionError(ValueError):
    pass


class SingularError(ValueError):
    pass


def _mat(x, rows=None, cols=None) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        if a.size == 0 and rows is not None and cols is not None:
            a = a.reshape(rows, cols)
        else:
            a = a.reshape(1, -1) if rows is None or rows == 1 else a.reshape(-1, 1)
    if a.size == 0 and rows is not None and cols is not None:
        a = a.reshape(rows, cols)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Input-output operator ``x+ = a x + b w, z = c x + d w``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        d = _mat(self.d)
        p, m = d.shape
        a = np.asarray(self.a, dtype=float)
        n = a.shape[0] if a.size else 0
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "a", _mat(self.a, n, n))
        object.__setattr__(self, "b", _mat(self.b, n, m))
        object.__setattr__(self, "c", _mat(self.c, p, n))
        if self.a.shape != (n, n):
            raise DimensionError(f"a must be square, got {self.a.shape}")
        if self.b.shape != (n, m):
            raise DimensionError(f"b has shape {self.b.shape}, expected {(n, m)}")
        if self.c.shape != (p, n):
            raise DimensionError(f"c has shape {self.c.shape}, expected {(p, n)}")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def inputs(self) -> int:
        return self.d.shape[1]

    @property
    def outputs(self) -> int:
        return self.d.shape[0]

    def __repr__(self):
        return f"StateSpace(n={self.n}, inputs={self.inputs}, outputs={self.outputs})"

    def to_dict(self) -> dict:
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "d": self.d.tolist(),
            "dims": [self.n, self.inputs, self.outputs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpace":
        if "dims" in data:
            n, m, p = data["dims"]
        else:
            d = np.asarray(data["d"], dtype=float)
            p, m = d.shape if d.ndim == 2 else (1, 1)
            n = len(data["a"])
        return cls(
            np.asarray(data["a"], dtype=float).reshape(n, n),
            np.asarray(data["b"], dtype=float).reshape(n, m),
            np.asarray(data["c"], dtype=float).reshape(p, n),
            np.asarray(data["d"], dtype=float).reshape(p, m),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StateSpace":
        return cls.from_dict(json.loads(text))

    def response(self, z: complex) -> np.ndarray:
        return frequency_response(self, z)


def static(gain, inputs: int | None = None) -> StateSpace:
    """Static gain ``z = gain * w`` with an empty state."""
    g = np.atleast_2d(np.asarray(gain, dtype=float))
    if inputs is not None and g.shape == (1, 1) and inputs > 1:
        g = g[0, 0] * np.eye(inputs)
    p, m = g.shape
    return StateSpace(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), g)


def integrator(d: int) -> StateSpace:
    """Discrete integrator ``eta+ = eta + u, y = eta`` on ``d`` channels."""
    if d < 1:
        raise ValueError("integrator dimension must be positive")
    eye = np.eye(d)
    return StateSpace(eye, eye, eye, np.zeros((d, d)))


def series(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Composition ``g1 * g2``: the output of ``g2`` drives ``g1``."""
    if g1.inputs != g2.outputs:
        raise DimensionError(f"series: g1 has {g1.inputs} inputs but g2 has {g2.outputs} outputs")
    n1, n2 = g1.n, g2.n
    a = np.block([[g1.a, g1.b @ g2.c], [np.zeros((n2, n1)), g2.a]])
    b = np.vstack([g1.b @ g2.d, g2.b])
    c = np.hstack([g1.c, g1.d @ g2.c])
    return StateSpace(a, b, c, g1.d @ g2.d)


def parallel(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Sum ``g1 + g2`` of two systems with identical signal dimensions."""
    if g1.inputs != g2.inputs or g1.outputs != g2.outputs:
        raise DimensionError("parallel: input/output dimensions differ")
    a = sla.block_diag(g1.a, g2.a)
    b = np.vstack([g1.b, g2.b])
    c = np.hstack([g1.c, g2.c])
    return StateSpace(a, b, c, g1.d + g2.d)


def append(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Block-diagonal stacking ``diag(g1, g2)``."""
    return StateSpace(
        sla.block_diag(g1.a, g2.a),
        sla.block_diag(g1.b, g2.b),
        sla.block_diag(g1.c, g2.c),
        sla.block_diag(g1.d, g2.d),
    )


def scale(g: StateSpace, left=None, right=None) -> StateSpace:
    """Pre/post multiply by constant matrices: ``left * g * right``."""
    left = np.eye(g.outputs) if left is None else np.atleast_2d(left)
    right = np.eye(g.inputs) if right is None else np.atleast_2d(right)
    return StateSpace(g.a, g.b @ right, left @ g.c, left @ g.d @ right)


def negate(g: StateSpace) -> StateSpace:
    return StateSpace(g.a, g.b, -g.c, -g.d)


def subsystem(g: StateSpace, outputs=None, inputs=None) -> StateSpace:
    """Select output rows and input columns (slices or index lists)."""
    outputs = slice(None) if outputs is None else outputs
    inputs = slice(None) if inputs is None else inputs
    return StateSpace(g.a, g.b[:, inputs], g.c[outputs, :], g.d[outputs][:, inputs])


def inverse(g: StateSpace, cond_max: float = COND_MAX) -> StateSpace:
    """Inverse operator; requires a square, well-conditioned feedthrough."""
    if g.inputs != g.outputs:
        raise DimensionError("inverse requires a square system")
    if np.linalg.cond(g.d) > cond_max:
        raise SingularError("feedthrough matrix is singular or ill-conditioned")
    dinv = np.linalg.inv(g.d)
    return StateSpace(g.a - g.b @ dinv @ g.c, g.b @ dinv, -dinv @ g.c, dinv)


def coordinate_change(g: StateSpace, t) -> StateSpace:
    """State transformation ``x = t xi``: returns ``(t^-1 a t, t^-1 b, c t, d)``."""
    t = np.atleast_2d(np.asarray(t, dtype=float))
    if t.shape != (g.n, g.n):
        raise DimensionError("coordinate change must be n x n")
    if g.n and np.linalg.cond(t) > COND_MAX:
        raise SingularError("coordinate change is singular")
    if g.n == 0:
        return g
    return StateSpace(np.linalg.solve(t, g.a @ t), np.linalg.solve(t, g.b), g.c @ t, g.d)


def frequency_response(g: StateSpace, z: complex) -> np.ndarray:
    """Transfer matrix ``c (zI - a)^-1 b + d`` at the complex point ``z``."""
    if g.n == 0:
        return g.d.astype(complex)
    m = z * np.eye(g.n) - g.a
    if np.linalg.cond(m) > 1e14:
        raise SingularError(f"z={z} is (numerically) a pole")
    return g.c @ np.linalg.solve(m, g.b.astype(complex)) + g.d


def spectral_radius(a) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def is_schur(a, tol: float = TOL_SCHUR) -> tuple[bool, float]:
    """Return ``(radius < 1 - tol, radius)``."""
    r = spectral_radius(a)
    return r < 1.0 - tol, r


def _rank_deficient(m: np.ndarray, n: int, tol: float) -> bool:
    s = np.linalg.svd(m, compute_uv=False)
    scale = max(1.0, s[0]) if s.size else 1.0
    return s.size < n or s[n - 1] <= tol * scale


def hautus(a, bc, mode: str = "stabilizable", disc_radius: float = 1.0, tol: float = 1e-9) -> bool:
    """PBH rank test over the eigenvalues of ``a`` with modulus ``>= disc_radius``.

    ``mode='stabilizable'`` checks ``rank [lam I - a, b] = n``; ``'detectable'``
    checks ``rank [lam I - a; c] = n``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0] if a.size else 0
    if n == 0:
        return True
    bc = np.asarray(bc, dtype=float)
    if mode == "stabilizable":
        bc = bc.reshape(n, -1)
    elif mode == "detectable":
        bc = bc.reshape(-1, n)
    else:
        raise ValueError("mode must be 'stabilizable' or 'detectable'")
    for lam in np.linalg.eigvals(a):
        if abs(lam) < disc_radius:
            continue
        if mode == "stabilizable":
            m = np.hstack([lam * np.eye(n) - a, bc.astype(complex)])
        else:
            m = np.vstack([lam * np.eye(n) - a, bc.astype(complex)])
        if _rank_deficient(m, n, tol):
            return False
    return True


def sylvester_solve(a1, a2, q) -> np.ndarray:
    """Solve ``a1 X - X a2 + q = 0``; spectra of ``a1`` and ``a2`` must be disjoint."""
    a1 = np.atleast_2d(np.asarray(a1, dtype=float))
    a2 = np.atleast_2d(np.asarray(a2, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if a1.size == 0 or a2.size == 0:
        return np.zeros(q.shape)
    e1, e2 = np.linalg.eigvals(a1), np.linalg.eigvals(a2)
    sep = np.min(np.abs(e1[:, None] - e2[None, :]))
    if sep < 1e-9 * max(1.0, np.abs(e1).max(), np.abs(e2).max()):
        raise SingularError("sylvester equation: spectra (nearly) intersect")
    x = sla.solve_sylvester(a1, -a2, -q)
    return x


def kernel_basis(m, tol: float = TOL_RANK) -> np.ndarray:
    """Orthonormal basis of ``ker(m)`` from an SVD; relative tolerance ``tol``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    rows, cols = m.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0 or not np.any(m):
        return np.eye(cols)
    _, s, vt = np.linalg.svd(m)
    rank = int(np.sum(s > tol * max(s[0], 1e-300)))
    return vt[rank:].T.copy()


def left_kernel_basis(m, tol: float = TOL_RANK) -> np.ndarray:
    """Columns ``t`` with ``t.T @ m = 0``."""
    return kernel_basis(np.asarray(m, dtype=float).T, tol)


def _orth(m: np.ndarray, tol: float) -> np.ndarray:
    if m.size == 0:
        return np.zeros((m.shape[0], 0))
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((m.shape[0], 0))
    return u[:, s > tol * s[0]]


def controllable_subspace(a, b, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the reachable subspace of ``(a, b)``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    scale = max(1.0, np.linalg.norm(a, 2) if n else 1.0)
    v = _orth(np.asarray(b, dtype=float).reshape(n, -1), tol)
    while True:
        grown = _orth(np.hstack([v, a @ v / scale]), tol)
        if grown.shape[1] == v.shape[1]:
            return v
        v = grown


def _split(basis: np.ndarray, n: int) -> np.ndarray:
    comp = kernel_basis(basis.T) if basis.shape[1] < n else np.zeros((n, 0))
    return np.hstack([basis, comp])


def controllable_part(g: StateSpace, tol: float = 1e-10) -> StateSpace:
    """Restrict ``g`` to its reachable subspace (response unchanged)."""
    if g.n == 0:
        return g
    v = controllable_subspace(g.a, g.b, tol)
    return StateSpace(v.T @ g.a @ v, v.T @ g.b, g.c @ v, g.d)


def observable_part(g: StateSpace, tol: float = 1e-10) -> StateSpace:
    """Quotient out the unobservable subspace (response unchanged)."""
    if g.n == 0:
        return g
    w = controllable_subspace(g.a.T, g.c.T, tol)
    return StateSpace(w.T @ g.a @ w, w.T @ g.b, g.c @ w, g.d)


def minreal(g: StateSpace, tol: float = 1e-8) -> StateSpace:
    """Kalman reduction to a controllable and observable realization."""
    return observable_part(controllable_part(g, tol), tol)


def kalman_observability(a, c, tol: float = 1e-10):
    """Orthogonal ``t = [t_unobs, t_obs]`` and the observable dimension.

    In the coordinates ``x = t xi`` the pair reads
    ``[[a11, a12], [0, a22]]``, ``c = [0, c2]``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    w = controllable_subspace(a.T, np.asarray(c, dtype=float).reshape(-1, n).T, tol)
    k = w.shape[1]
    t = np.hstack([_split(w, n)[:, k:], w])
    return t, k


def block_rank(m, tol: float = 1e-10) -> int:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def responses_close(g1: StateSpace, g2: StateSpace, points, tol: float) -> bool:
    return max_response_gap(g1, g2, points) <= tol


def max_response_gap(g1: StateSpace, g2: StateSpace, points) -> float:
    gap = 0.0
    for z in points:
        gap = max(gap, float(np.max(np.abs(frequency_response(g1, z) - frequency_response(g2, z)))))
    return gap


def sample_points(count: int = 10, radius: float = 1.3, seed: int = 0) -> np.ndarray:
    """Deterministic complex evaluation points on a circle (avoids the real axis)."""
    theta = 0.37 + 2 * np.pi * np.arange(count) / count
    return radius * np.exp(1j * theta)


@dataclass(frozen=True, eq=False)
class GeneralizedPlant:
    """Open-loop plant with performance channel ``w -> z`` and control ``u``, measurement ``y``."""

    a: np.ndarray
    b1: np.ndarray
    b: np.ndarray
    c1: np.ndarray
    d1: np.ndarray
    e: np.ndarray
    c: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        for name in ("a", "b1", "b", "c1", "d1", "e", "c", "f"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n = self.a.shape[0]
        nw, nu = self.d1.shape[1], self.e.shape[1]
        nz, ny = self.d1.shape[0], self.f.shape[0]
        expect = {
            "a": (n, n), "b1": (n, nw), "b": (n, nu), "c1": (nz, n),
            "e": (nz, nu), "c": (ny, n), "f": (ny, nw),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.size == 0:
                object.__setattr__(self, name, np.zeros(shape))
            elif arr.shape != shape:
                raise DimensionError(f"plant block {name} has shape {arr.shape}, expected {shape}")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """(n_w, n_u, n_z, n_y)."""
        return self.d1.shape[1], self.e.shape[1], self.d1.shape[0], self.f.shape[0]

    def as_statespace(self) -> StateSpace:
        nw, nu, nz, ny = self.dims
        return StateSpace(
            self.a,
            np.hstack([self.b1, self.b]),
            np.vstack([self.c1, self.c]),
            np.block([[self.d1, self.e], [self.f, np.zeros((ny, nu))]]),
        )


def close_loop(plant: GeneralizedPlant, k: StateSpace) -> StateSpace:
    """Closed loop ``w -> z`` of ``plant`` with ``u = k y`` (plant has no y/u feedthrough)."""
    nw, nu, nz, ny = plant.dims
    if k.inputs != ny or k.outputs != nu:
        raise DimensionError("controller dimensions do not match plant")
    a = np.block([
        [plant.a + plant.b @ k.d @ plant.c, plant.b @ k.c],
        [k.b @ plant.c, k.a],
    ])
    b = np.vstack([plant.b1 + plant.b @ k.d @ plant.f, k.b @ plant.f])
    c = np.hstack([plant.c1 + plant.e @ k.d @ plant.c, plant.e @ k.c])
    d = plant.d1 + plant.e @ k.d @ plant.f
    return StateSpace(a, b, c, d)
