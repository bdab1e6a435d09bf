"""Causal FIR Zames-Falb multipliers and their admissible coefficient sets.

A multiplier of length ``ell`` acts as ``(Pi w)_k = sum_i Lam_i w_{k-i}``.
Blocks are stored in the order ``(Lam_ell, ..., Lam_1, Lam_0)`` which is the
order in which they appear in the output matrix of the realization.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .sysops import SingularError, StateSpace

TOL_MEMBER = 1e-12
CLASSES = ("repeated", "full")


@dataclass(frozen=True, eq=False)
class ZamesFalbParams:
    blocks: tuple
    rho: float
    class_tag: str = "repeated"

    def __post_init__(self):
        if self.class_tag not in CLASSES:
            raise ValueError(f"class_tag must be one of {CLASSES}")
        if not 0.0 < self.rho:
            raise ValueError("rho must be positive")
        blocks = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.blocks)
        if not blocks:
            raise ValueError("need at least Lam_0")
        d = blocks[0].shape[0]
        for b in blocks:
            if b.shape != (d, d):
                raise ValueError("all blocks must be d x d")
            b.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def ell(self) -> int:
        return len(self.blocks) - 1

    @property
    def d(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def coeffs(self) -> list[np.ndarray]:
        """Impulse-response order ``[Lam_0, Lam_1, ..., Lam_ell]``."""
        return list(self.blocks[::-1])

    def scalars(self) -> np.ndarray:
        """``(lam_0, ..., lam_ell)`` for the repeated class."""
        return np.array([b[0, 0] for b in self.coeffs])

    @classmethod
    def from_coeffs(cls, coeffs, rho, class_tag="repeated") -> "ZamesFalbParams":
        return cls(tuple(coeffs)[::-1], rho, class_tag)

    @classmethod
    def repeated(cls, lams, rho, d: int = 1) -> "ZamesFalbParams":
        """Repeated multiplier from scalars ``(lam_0, ..., lam_ell)``."""
        return cls.from_coeffs([l * np.eye(d) for l in np.atleast_1d(lams)], rho, "repeated")

    @classmethod
    def identity(cls, ell: int, d: int, rho: float, class_tag="repeated") -> "ZamesFalbParams":
        """``(0, ..., 0, I)``: the identity operator."""
        return cls.from_coeffs([np.eye(d)] + [np.zeros((d, d))] * ell, rho, class_tag)

    def plus(self, other: "ZamesFalbParams", eps: float = 1.0) -> "ZamesFalbParams":
        if other.ell != self.ell or other.d != self.d:
            raise ValueError("multipliers must have equal length and size")
        return ZamesFalbParams(tuple(a + eps * b for a, b in zip(self.blocks, other.blocks)), self.rho, self.class_tag)

    def impulse(self) -> np.ndarray:
        """Stack ``(ell+1, d, d)`` with entry ``i`` equal to ``Lam_i``."""
        return np.array(self.coeffs)

    def to_dict(self) -> dict:
        return {"rho": self.rho, "class": self.class_tag, "blocks": [b.tolist() for b in self.blocks]}

    @classmethod
    def from_dict(cls, data: dict) -> "ZamesFalbParams":
        return cls(tuple(np.asarray(b, dtype=float) for b in data["blocks"]), float(data["rho"]), data["class"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ZamesFalbParams":
        return cls.from_dict(json.loads(text))


def fir_shift(ell: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Shift-register pair ``(A_f, B_f)`` with ``ell`` blocks of size ``d``."""
    n = ell * d
    a = np.zeros((n, n))
    if ell > 1:
        a[: n - d, d:] = np.eye(n - d)
    b = np.zeros((n, d))
    if ell:
        b[n - d:, :] = np.eye(d)
    return a, b


def build_fir(params: ZamesFalbParams) -> StateSpace:
    """Realization ``(A_f, B_f, [Lam_ell ... Lam_1], Lam_0)`` of the multiplier."""
    a, b = fir_shift(params.ell, params.d)
    c = np.hstack(params.blocks[:-1]) if params.ell else np.zeros((params.d, 0))
    return StateSpace(a, b, c, params.blocks[-1])


def is_member(params: ZamesFalbParams, tol: float = TOL_MEMBER) -> tuple[bool, list[str]]:
    """Elementwise membership test; returns the list of violated conditions."""
    rho = params.rho
    coeffs = params.coeffs
    d = params.d
    bad = []
    off = coeffs[0] - np.diag(np.diag(coeffs[0]))
    if np.any(off > tol):
        bad.append("offdiag(Lam_0) <= 0")
    for i, lam in enumerate(coeffs[1:], start=1):
        if np.any(lam > tol):
            bad.append(f"Lam_{i} <= 0")
    rows = sum(lam * rho**i for i, lam in enumerate(coeffs)) @ np.ones(d)
    if np.any(rows < -tol):
        bad.append("row sums (weights rho^i) >= 0")
    cols = np.ones(d) @ sum(lam * rho ** (-i) for i, lam in enumerate(coeffs))
    if np.any(cols < -tol):
        bad.append("column sums (weights rho^-i) >= 0")
    if params.class_tag == "repeated":
        for i, lam in enumerate(coeffs):
            if np.max(np.abs(lam - lam[0, 0] * np.eye(d))) > tol:
                bad.append(f"Lam_{i} not a multiple of identity")
    return not bad, bad


@dataclass(frozen=True)
class LinearConstraints:
    """Homogeneous inequalities ``g @ theta >= 0`` on the free parameters.

    ``theta`` lists the blocks in the order ``(Lam_ell, ..., Lam_0)``; for the
    repeated class one scalar per block, for the full class the ``d*d``
    entries of each block in row-major order.
    """

    g: np.ndarray
    labels: list = field(default_factory=list)
    class_tag: str = "repeated"
    ell: int = 0
    d: int = 1

    @property
    def nparams(self) -> int:
        return self.g.shape[1]

    def unpack(self, theta) -> list[np.ndarray]:
        """Free parameters to blocks ``(Lam_ell, ..., Lam_0)``."""
        theta = np.asarray(theta, dtype=float)
        if self.class_tag == "repeated":
            return [t * np.eye(self.d) for t in theta]
        return [theta[i * self.d**2:(i + 1) * self.d**2].reshape(self.d, self.d) for i in range(self.ell + 1)]


def constraint_generators(class_tag: str, ell: int, d: int, rho: float) -> LinearConstraints:
    """Linear description of the admissible multiplier set."""
    if ell < 0 or d < 1:
        raise ValueError("need ell >= 0 and d >= 1")
    rows, labels = [], []
    if class_tag == "repeated":
        npar = ell + 1

        def pos(i):  # position of lam_i in theta
            return ell - i

        for i in range(1, ell + 1):
            r = np.zeros(npar)
            r[pos(i)] = -1.0
            rows.append(r)
            labels.append(f"lam_{i} <= 0")
        r = np.zeros(npar)
        for i in range(ell + 1):
            r[pos(i)] = rho**i
        rows.append(r)
        labels.append("sum lam_i rho^i >= 0")
        r = np.zeros(npar)
        for i in range(ell + 1):
            r[pos(i)] = rho ** (-i)
        rows.append(r)
        labels.append("sum lam_i rho^-i >= 0")
    elif class_tag == "full":
        npar = (ell + 1) * d * d

        def pos(i, r_, c_):
            return (ell - i) * d * d + r_ * d + c_

        for r_ in range(d):
            for c_ in range(d):
                if r_ != c_:
                    v = np.zeros(npar)
                    v[pos(0, r_, c_)] = -1.0
                    rows.append(v)
                    labels.append(f"Lam_0[{r_},{c_}] <= 0")
        for i in range(1, ell + 1):
            for r_ in range(d):
                for c_ in range(d):
                    v = np.zeros(npar)
                    v[pos(i, r_, c_)] = -1.0
                    rows.append(v)
                    labels.append(f"Lam_{i}[{r_},{c_}] <= 0")
        for r_ in range(d):
            v = np.zeros(npar)
            for i in range(ell + 1):
                for c_ in range(d):
                    v[pos(i, r_, c_)] = rho**i
            rows.append(v)
            labels.append(f"row {r_}: sum Lam_i rho^i e >= 0")
        for c_ in range(d):
            v = np.zeros(npar)
            for i in range(ell + 1):
                for r_ in range(d):
                    v[pos(i, r_, c_)] = rho ** (-i)
            rows.append(v)
            labels.append(f"column {c_}: e^T sum Lam_i rho^-i >= 0")
    else:
        raise ValueError(f"unknown class {class_tag!r}")
    g = np.array(rows) if rows else np.zeros((0, npar))
    return LinearConstraints(g, labels, class_tag, ell, d)


@dataclass(frozen=True, eq=False)
class TransformedClass:
    """The congruence image ``{T Lam T^T : Lam admissible}``."""

    class_tag: str
    ell: int
    d: int
    rho: float
    t: np.ndarray

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.t, dtype=float))
        if t.shape != (self.d, self.d):
            raise ValueError("t must be d x d")
        if np.linalg.cond(t) > 1e12:
            raise SingularError("transformation is singular")
        object.__setattr__(self, "t", t)

    def apply(self, params: ZamesFalbParams) -> ZamesFalbParams:
        return ZamesFalbParams(tuple(self.t @ b @ self.t.T for b in params.blocks), params.rho, params.class_tag)

    def pullback(self, params: ZamesFalbParams) -> ZamesFalbParams:
        ti = np.linalg.inv(self.t)
        return ZamesFalbParams(tuple(ti @ b @ ti.T for b in params.blocks), params.rho, params.class_tag)

    def is_member(self, params: ZamesFalbParams, tol: float = TOL_MEMBER) -> tuple[bool, list[str]]:
        return is_member(self.pullback(params), tol)

    def generators(self) -> LinearConstraints:
        return constraint_generators(self.class_tag, self.ell, self.d, self.rho)


def transform_class(class_tag: str, ell: int, d: int, rho: float, t) -> TransformedClass:
    return TransformedClass(class_tag, ell, d, rho, t)
