"""Affine matrix expressions in named decision variables.

An :class:`Expr` is ``const + sum_v coef_v(theta_v)`` where ``theta_v`` is
the flat parameter vector of variable ``v`` and ``coef_v`` has shape
``(rows, cols, len(theta_v))``. Products are only allowed with constant
matrices, which keeps every expression affine by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..multipliers import ZamesFalbParams, constraint_generators


class LmiError(ValueError):
    pass


def _svec_index(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


@dataclass(eq=False)
class Var:
    """Decision variable.

    kinds: ``sym`` (n x n symmetric, entries on and above the diagonal),
    ``general`` (rows x cols), ``zf`` (Zames-Falb multiplier blocks).
    """

    name: str
    kind: str
    shape: tuple
    class_tag: str = "repeated"
    ell: int = 0
    rho: float = 0.5
    base: np.ndarray | None = None  # congruence factor T for transformed classes

    def __post_init__(self):
        if self.kind not in ("sym", "general", "zf"):
            raise LmiError(f"unknown variable kind {self.kind!r}")
        if self.kind == "zf" and self.base is not None:
            self.base = np.atleast_2d(np.asarray(self.base, dtype=float))

    @property
    def size(self) -> int:
        if self.kind == "sym":
            n = self.shape[0]
            return n * (n + 1) // 2
        if self.kind == "general":
            return self.shape[0] * self.shape[1]
        d = self.shape[0]
        return (self.ell + 1) * (1 if self.class_tag == "repeated" else d * d)

    @property
    def d(self) -> int:
        return self.shape[0]

    # -- expressions ---------------------------------------------------
    def _basis(self) -> np.ndarray:
        if self.kind == "sym":
            n = self.shape[0]
            coef = np.zeros((n, n, self.size))
            for t, (i, j) in enumerate(_svec_index(n)):
                coef[i, j, t] = 1.0
                coef[j, i, t] = 1.0
            return coef
        if self.kind == "general":
            r, c = self.shape
            return np.eye(r * c).reshape(r, c, r * c)
        raise LmiError("use block(i), cf() or df() for multiplier variables")

    @property
    def expr(self) -> "Expr":
        return Expr(np.zeros(self.shape), {self.name: self._basis()}, {self.name: self})

    def block(self, i: int) -> "Expr":
        """Expression of ``Lam_i`` (impulse index ``i``)."""
        if self.kind != "zf":
            raise LmiError("block() is only defined for multiplier variables")
        if not 0 <= i <= self.ell:
            raise LmiError("block index out of range")
        d = self.d
        pos = self.ell - i
        coef = np.zeros((d, d, self.size))
        t = np.eye(d) if self.base is None else self.base
        if self.class_tag == "repeated":
            coef[:, :, pos] = t @ t.T
        else:
            for r in range(d):
                for c in range(d):
                    e = np.zeros((d, d))
                    e[r, c] = 1.0
                    coef[:, :, pos * d * d + r * d + c] = t @ e @ t.T
        return Expr(np.zeros((d, d)), {self.name: coef}, {self.name: self})

    def cf(self) -> "Expr":
        """Output matrix ``[Lam_ell ... Lam_1]`` of the multiplier realization."""
        if self.ell == 0:
            return Expr.zeros(self.d, 0)
        return hstack([self.block(i) for i in range(self.ell, 0, -1)])

    def df(self) -> "Expr":
        return self.block(0)

    def generators(self):
        if self.kind != "zf":
            return None
        return constraint_generators(self.class_tag, self.ell, self.d if self.class_tag == "full" else 1, self.rho)

    # -- values -----------------------------------------------------------
    def raw_value(self, theta) -> ZamesFalbParams:
        """Multiplier before the congruence by ``base``."""
        theta = np.asarray(theta, dtype=float)
        d = self.d
        if self.class_tag == "full":
            raw = constraint_generators("full", self.ell, d, self.rho).unpack(theta)
        else:
            raw = [x * np.eye(d) for x in theta]
        return ZamesFalbParams(tuple(raw), self.rho, self.class_tag)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "zf":
            raw = self.raw_value(theta)
            if self.base is None:
                return raw
            t = self.base
            return ZamesFalbParams(tuple(t @ b @ t.T for b in raw.blocks), self.rho, self.class_tag)
        return np.einsum("ijk,k->ij", self._basis(), theta)

    def theta_of(self, value) -> np.ndarray:
        """Inverse of :meth:`value` for matrix variables."""
        value = np.asarray(value, dtype=float)
        if self.kind == "sym":
            return np.array([value[i, j] for i, j in _svec_index(self.shape[0])])
        if self.kind == "general":
            return value.reshape(-1).copy()
        raise LmiError("theta_of is not defined for multiplier variables")

    def describe(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "shape": list(self.shape)}
        if self.kind == "zf":
            out.update(class_tag=self.class_tag, ell=self.ell, rho=self.rho)
            if self.base is not None:
                out["base"] = self.base.tolist()
        return out


class Expr:
    __array_ufunc__ = None  # make ``ndarray @ Expr`` dispatch to __rmatmul__

    def __init__(self, const, coefs=None, vars_=None):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        if self.const.ndim != 2:
            raise LmiError("constant part must be a matrix")
        self.coefs = dict(coefs or {})
        self.vars = dict(vars_ or {})
        for name, c in self.coefs.items():
            if c.shape[:2] != self.const.shape:
                raise LmiError(f"coefficient of {name} has shape {c.shape[:2]}, expected {self.const.shape}")

    @staticmethod
    def zeros(r: int, c: int) -> "Expr":
        return Expr(np.zeros((r, c)))

    @staticmethod
    def lift(x) -> "Expr":
        if isinstance(x, Expr):
            return x
        return Expr(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    def __repr__(self):
        return f"Expr(shape={self.shape}, vars={sorted(self.coefs)})"

    def _merge(self, other: "Expr", sign: float) -> "Expr":
        if self.shape != other.shape:
            raise LmiError(f"shape mismatch {self.shape} vs {other.shape}")
        coefs = {k: v.copy() for k, v in self.coefs.items()}
        for k, v in other.coefs.items():
            coefs[k] = coefs[k] + sign * v if k in coefs else sign * v
        return Expr(self.const + sign * other.const, coefs, {**self.vars, **other.vars})

    def __add__(self, other):
        return self._merge(Expr.lift(other), 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._merge(Expr.lift(other), -1.0)

    def __rsub__(self, other):
        return Expr.lift(other)._merge(self, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, s):
        if isinstance(s, Expr) or np.ndim(s) != 0:
            raise LmiError("use @ for matrix products; * only scales by a number")
        s = float(s)
        return Expr(self.const * s, {k: v * s for k, v in self.coefs.items()}, self.vars)

    __rmul__ = __mul__

    def __matmul__(self, m):
        if isinstance(m, Expr):
            raise LmiError("product of two decision-dependent expressions is not affine")
        m = np.atleast_2d(np.asarray(m, dtype=float))
        return Expr(self.const @ m, {k: np.einsum("pqk,qs->psk", v, m) for k, v in self.coefs.items()}, self.vars)

    def __rmatmul__(self, m):
        m = np.atleast_2d(np.asarray(m, dtype=float))
        return Expr(m @ self.const, {k: np.einsum("rp,pqk->rqk", m, v) for k, v in self.coefs.items()}, self.vars)

    @property
    def T(self) -> "Expr":
        return Expr(self.const.T, {k: v.transpose(1, 0, 2) for k, v in self.coefs.items()}, self.vars)

    def he(self) -> "Expr":
        """``E + E^T``."""
        return self + self.T

    def sym(self) -> "Expr":
        return (self + self.T) * 0.5

    def kron(self, d: int) -> "Expr":
        """``E (x) I_d``."""
        eye = np.eye(d)
        return Expr(
            np.kron(self.const, eye),
            {k: np.einsum("pqk,ab->paqbk", v, eye).reshape(self.shape[0] * d, self.shape[1] * d, -1) for k, v in self.coefs.items()},
            self.vars,
        )

    def __getitem__(self, idx):
        const = self.const[idx]
        if const.ndim != 2:
            raise LmiError("indexing must keep two dimensions (use slices)")
        return Expr(const, {k: v[idx] for k, v in self.coefs.items()}, self.vars)

    def evaluate(self, assign: dict) -> np.ndarray:
        out = self.const.copy()
        for k, v in self.coefs.items():
            if k not in assign:
                raise LmiError(f"no value for variable {k!r}")
            out = out + np.einsum("pqk,k->pq", v, np.asarray(assign[k], dtype=float))
        return out

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        scale = 1.0 + np.abs(self.const).max(initial=0.0)
        if np.abs(self.const - self.const.T).max(initial=0.0) > tol * scale:
            return False
        for v in self.coefs.values():
            if np.abs(v - v.transpose(1, 0, 2)).max(initial=0.0) > tol * (1.0 + np.abs(v).max(initial=0.0)):
                return False
        return True


def _as_expr_grid(rows):
    """Resolve ``None``/``0`` placeholders in a block grid to zero matrices."""
    nr, nc = len(rows), len(rows[0])
    heights = [None] * nr
    widths = [None] * nc
    for i, row in enumerate(rows):
        if len(row) != nc:
            raise LmiError("ragged block grid")
        for j, blk in enumerate(row):
            if blk is None or (np.isscalar(blk) and blk == 0):
                continue
            shp = blk.shape if isinstance(blk, Expr) else np.atleast_2d(np.asarray(blk)).shape
            if heights[i] is None:
                heights[i] = shp[0]
            elif heights[i] != shp[0]:
                raise LmiError(f"block row {i}: inconsistent heights")
            if widths[j] is None:
                widths[j] = shp[1]
            elif widths[j] != shp[1]:
                raise LmiError(f"block column {j}: inconsistent widths")
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise LmiError("cannot infer the size of an all-zero block row/column")
    grid = []
    for i, row in enumerate(rows):
        out = []
        for j, blk in enumerate(row):
            if blk is None or (np.isscalar(blk) and blk == 0):
                out.append(Expr.zeros(heights[i], widths[j]))
            else:
                out.append(Expr.lift(blk))
        grid.append(out)
    return grid


def bmat(rows) -> Expr:
    """Block matrix of expressions and constants (``None`` or ``0`` for zero blocks)."""
    grid = _as_expr_grid(rows)
    names = {}
    for row in grid:
        for blk in row:
            names.update(blk.vars)
    const = np.block([[blk.const for blk in row] for row in grid])
    coefs = {}
    for name, var in names.items():
        k = var.size
        coefs[name] = np.concatenate(
            [np.concatenate([blk.coefs.get(name, np.zeros(blk.shape + (k,))) for blk in row], axis=1) for row in grid],
            axis=0,
        )
    return Expr(const, coefs, names)


def hstack(items) -> Expr:
    return bmat([list(items)])


def vstack(items) -> Expr:
    return bmat([[x] for x in items])


def blkdiag(*items) -> Expr:
    items = [Expr.lift(x) for x in items]
    rows = []
    for i, a in enumerate(items):
        row = []
        for j, b in enumerate(items):
            row.append(a if i == j else np.zeros((a.shape[0], b.shape[1])))
        rows.append(row)
    return bmat(rows)


@dataclass(eq=False)
class Constraint:
    expr: Expr
    sense: str  # '>' strict pos. def., '<' strict neg. def., '>=' / '<=' non-strict, 'ge' elementwise >= 0
    label: str = ""


@dataclass(eq=False)
class Problem:
    """Collection of variables and affine constraints."""

    variables: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    objective: tuple | None = None  # ('min'|'max', Expr 1x1)
    name: str = ""

    def sym(self, name: str, n: int) -> Var:
        return self._add(Var(name, "sym", (n, n)))

    def general(self, name: str, rows: int, cols: int) -> Var:
        return self._add(Var(name, "general", (rows, cols)))

    def zf(self, name: str, ell: int, d: int, rho: float, class_tag: str = "repeated", base=None) -> Var:
        """Multiplier variable; its admissibility constraints are added automatically."""
        var = self._add(Var(name, "zf", (d, d), class_tag=class_tag, ell=ell, rho=rho, base=base))
        gen = var.generators()
        if gen.g.shape[0]:
            coef = gen.g.reshape(gen.g.shape[0], 1, gen.g.shape[1])
            self.constraints.append(Constraint(Expr(np.zeros((gen.g.shape[0], 1)), {name: coef}, {name: var}), "ge", f"{name} admissible"))
        return var

    def _add(self, var: Var) -> Var:
        if var.name in self.variables:
            raise LmiError(f"duplicate variable name {var.name!r}")
        self.variables[var.name] = var
        return var

    def add(self, expr: Expr, sense: str, label: str = "") -> Constraint:
        if sense not in (">", "<", ">=", "<=", "ge"):
            raise LmiError(f"unknown sense {sense!r}")
        expr = Expr.lift(expr)
        for name in expr.coefs:
            if name not in self.variables or self.variables[name] is not expr.vars[name]:
                raise LmiError(f"constraint uses undeclared variable {name!r}")
        if sense != "ge":
            if not expr.is_symmetric(1e-9):
                raise LmiError(f"constraint {label!r} is not symmetric")
            expr = expr.sym()
        con = Constraint(expr, sense, label)
        self.constraints.append(con)
        return con

    def set_objective(self, direction: str, expr: Expr):
        expr = Expr.lift(expr)
        if direction not in ("min", "max") or expr.shape != (1, 1):
            raise LmiError("objective must be ('min'|'max', 1x1 expression)")
        self.objective = (direction, expr)

    # -- scalarization ------------------------------------------------
    def offsets(self) -> dict:
        off, pos = {}, 0
        for name, var in self.variables.items():
            off[name] = (pos, pos + var.size)
            pos += var.size
        return off

    @property
    def nvars(self) -> int:
        return sum(v.size for v in self.variables.values())

    def flat(self, expr: Expr) -> tuple[np.ndarray, np.ndarray]:
        """``(const, coef)`` with ``coef`` of shape ``(nvars, rows, cols)``."""
        off = self.offsets()
        coef = np.zeros((self.nvars,) + expr.shape)
        for name, c in expr.coefs.items():
            a, b = off[name]
            coef[a:b] = np.moveaxis(c, 2, 0)
        return expr.const, coef

    def split(self, theta) -> dict:
        off = self.offsets()
        return {name: np.asarray(theta[a:b]) for name, (a, b) in off.items()}

    def join(self, assign: dict) -> np.ndarray:
        return np.concatenate([np.asarray(assign[name], dtype=float).ravel() for name in self.variables]) if self.variables else np.zeros(0)

    def check(self, assign: dict, margin: float = 0.0, tol: float = 1e-8) -> list[tuple[str, float]]:
        """Evaluate every constraint; returns ``(label, slack)`` with slack ``>= margin - tol`` expected."""
        out = []
        for con in self.constraints:
            val = con.expr.evaluate(assign)
            if con.sense == "ge":
                out.append((con.label, float(val.min(initial=np.inf))))
                continue
            eig = np.linalg.eigvalsh(val) if val.size else np.array([np.inf])
            if con.sense in (">", ">="):
                out.append((con.label, float(eig.min())))
            else:
                out.append((con.label, float(-eig.max())))
        return out
