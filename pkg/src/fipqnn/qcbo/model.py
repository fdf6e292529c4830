"""Binary-variable registry, polynomial expressions and the constrained model."""
from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, SizeLimitError

FAMILIES = ("beta_output", "beta_preact", "weight_bit", "bias_bit",
            "activ_bit", "aux_product", "slack_bit", "var")


class VarRegistry:
    """Dense integer ids for tagged binary variables.

    A tag is a tuple whose first entry names the family, e.g.
    ``("weight_bit", layer, j, k, bit)``.
    """

    def __init__(self):
        self.tags: list[tuple] = []
        self._index: dict[tuple, int] = {}

    def __len__(self):
        return len(self.tags)

    def add(self, tag) -> int:
        tag = tuple(tag)
        if tag[0] not in FAMILIES:
            raise InvalidInputError(f"unknown variable family {tag[0]!r}")
        if tag in self._index:
            raise InvalidInputError(f"duplicate variable tag {tag}")
        self._index[tag] = len(self.tags)
        self.tags.append(tag)
        return len(self.tags) - 1

    def get(self, tag):
        return self._index.get(tuple(tag))

    def id_of(self, tag) -> int:
        return self._index[tuple(tag)]

    def family(self, i: int) -> str:
        return self.tags[i][0]

    def ids_in(self, family: str) -> list[int]:
        return [i for i, t in enumerate(self.tags) if t[0] == family]

    def counts(self) -> dict:
        out = {f: 0 for f in FAMILIES}
        for t in self.tags:
            out[t[0]] += 1
        return out

    def copy(self) -> "VarRegistry":
        r = VarRegistry()
        r.tags = list(self.tags)
        r._index = dict(self._index)
        return r


@dataclass
class Expr:
    """Polynomial of degree <= 2 over binary variables.

    ``x_i * x_i`` is folded into the linear part since ``x_i`` is binary.
    Quadratic keys are ordered pairs ``(i, j)`` with ``i < j``.
    """

    lin: dict = field(default_factory=dict)
    quad: dict = field(default_factory=dict)
    const: float = 0.0

    @classmethod
    def var(cls, i: int, c: float = 1.0) -> "Expr":
        return cls({int(i): float(c)})

    @classmethod
    def constant(cls, c: float) -> "Expr":
        return cls(const=float(c))

    @classmethod
    def sum_of(cls, ids, coeffs=None) -> "Expr":
        e = cls()
        coeffs = itertools.repeat(1.0) if coeffs is None else coeffs
        for i, c in zip(ids, coeffs):
            e.add_lin(i, c)
        return e

    def copy(self) -> "Expr":
        return Expr(dict(self.lin), dict(self.quad), self.const)

    def add_lin(self, i: int, c: float):
        i = int(i)
        v = self.lin.get(i, 0.0) + float(c)
        if v == 0.0:
            self.lin.pop(i, None)
        else:
            self.lin[i] = v
        return self

    def add_quad(self, i: int, j: int, c: float):
        i, j = int(i), int(j)
        if i == j:
            return self.add_lin(i, c)
        key = (i, j) if i < j else (j, i)
        v = self.quad.get(key, 0.0) + float(c)
        if v == 0.0:
            self.quad.pop(key, None)
        else:
            self.quad[key] = v
        return self

    def iadd(self, other: "Expr", scale: float = 1.0):
        for i, c in other.lin.items():
            self.add_lin(i, scale * c)
        for (i, j), c in other.quad.items():
            self.add_quad(i, j, scale * c)
        self.const += scale * other.const
        return self

    def __add__(self, other):
        if not isinstance(other, Expr):
            other = Expr.constant(other)
        return self.copy().iadd(other)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Expr):
            other = Expr.constant(other)
        return self.copy().iadd(other, -1.0)

    def __rsub__(self, other):
        return Expr.constant(other) - self

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if isinstance(other, Expr):
            return self.mul(other)
        s = float(other)
        if s == 0.0:
            return Expr()
        return Expr({i: c * s for i, c in self.lin.items()},
                    {k: c * s for k, c in self.quad.items()}, self.const * s)

    __rmul__ = __mul__

    def mul(self, other: "Expr") -> "Expr":
        """Product of two expressions whose result has degree <= 2."""
        if (self.quad and (other.lin or other.quad)) or (other.quad and self.lin):
            raise InvalidInputError("product would exceed degree 2")
        out = Expr(const=self.const * other.const)
        for i, c in self.lin.items():
            out.add_lin(i, c * other.const)
        for i, c in other.lin.items():
            out.add_lin(i, c * self.const)
        for (i, j), c in self.quad.items():
            out.add_quad(i, j, c * other.const)
        for (i, j), c in other.quad.items():
            out.add_quad(i, j, c * self.const)
        for i, a in self.lin.items():
            for j, b in other.lin.items():
                out.add_quad(i, j, a * b)
        return out

    def square(self) -> "Expr":
        return self.mul(self)

    @property
    def is_linear(self) -> bool:
        return not self.quad

    def variables(self) -> set:
        vs = set(self.lin)
        for i, j in self.quad:
            vs.add(i)
            vs.add(j)
        return vs

    def max_var(self) -> int:
        vs = self.variables()
        return max(vs) if vs else -1

    def evaluate(self, x) -> float:
        x = np.asarray(x)
        v = self.const
        for i, c in self.lin.items():
            v += c * x[i]
        for (i, j), c in self.quad.items():
            v += c * x[i] * x[j]
        return float(v)

    def evaluate_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        v = np.full(X.shape[0], self.const)
        if self.lin:
            ids = np.fromiter(self.lin.keys(), int)
            v += X[:, ids] @ np.fromiter(self.lin.values(), float)
        if self.quad:
            ij = np.array(list(self.quad.keys()))
            c = np.fromiter(self.quad.values(), float)
            v += (X[:, ij[:, 0]] * X[:, ij[:, 1]]) @ c
        return v

    def bounds(self) -> tuple[float, float]:
        """Interval bounds over all binary assignments (exact when linear)."""
        lo = hi = self.const
        for c in list(self.lin.values()) + list(self.quad.values()):
            if c < 0:
                lo += c
            else:
                hi += c
        return lo, hi

    def abs_coeff_sum(self) -> float:
        return float(sum(abs(c) for c in self.lin.values()) + sum(abs(c) for c in self.quad.values()))

    def to_json(self) -> dict:
        return {"lin": [[i, c] for i, c in sorted(self.lin.items())],
                "quad": [[i, j, c] for (i, j), c in sorted(self.quad.items())],
                "const": self.const}

    @classmethod
    def from_json(cls, d: dict) -> "Expr":
        e = cls(const=float(d.get("const", 0.0)))
        for i, c in d.get("lin", []):
            e.add_lin(i, c)
        for i, j, c in d.get("quad", []):
            e.add_quad(i, j, c)
        return e


@dataclass
class Constraint:
    """``expr (sense) rhs`` with sense ``"=="`` or ``"<="``; constants live in rhs."""

    expr: Expr
    sense: str
    rhs: float
    tag: tuple = ()

    def __post_init__(self):
        if self.sense not in ("==", "<="):
            raise InvalidInputError(f"unknown sense {self.sense!r}")
        if self.expr.const:
            self.rhs = float(self.rhs) - self.expr.const
            self.expr = self.expr.copy()
            self.expr.const = 0.0
        self.rhs = float(self.rhs)

    def residual(self, x) -> float:
        return self.expr.evaluate(x) - self.rhs

    def satisfied(self, x, tol: float = 1e-9) -> bool:
        r = self.residual(x)
        return abs(r) <= tol if self.sense == "==" else r <= tol

    def satisfied_many(self, X, tol: float = 1e-9) -> np.ndarray:
        r = self.expr.evaluate_many(X) - self.rhs
        return np.abs(r) <= tol if self.sense == "==" else r <= tol

    def to_json(self) -> dict:
        return {"expr": self.expr.to_json(), "sense": self.sense, "rhs": self.rhs,
                "tag": list(self.tag)}

    @classmethod
    def from_json(cls, d: dict) -> "Constraint":
        return cls(Expr.from_json(d["expr"]), d["sense"], d["rhs"], tuple(d.get("tag", ())))


def _tag_to_json(t):
    return [list(x) if isinstance(x, tuple) else x for x in t]


def _tag_from_json(t):
    return tuple(tuple(x) if isinstance(x, list) else x for x in t)


@dataclass
class QcboModel:
    """Binary optimization model with linear and (pending) quadratic constraints.

    Attributes:
        registry: variable tags.
        objective: quadratic objective to minimize.
        eq_constraints: linear equalities.
        ineq_constraints: linear ``<=`` inequalities.
        quad_constraints: constraints with product terms awaiting linearization.
        onehot_groups: variable id lists each carrying a ``sum == 1`` equality.
        meta: free-form build information (JSON-serializable).
    """

    registry: VarRegistry = field(default_factory=VarRegistry)
    objective: Expr = field(default_factory=Expr)
    eq_constraints: list = field(default_factory=list)
    ineq_constraints: list = field(default_factory=list)
    quad_constraints: list = field(default_factory=list)
    onehot_groups: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.registry)

    @property
    def is_linearized(self) -> bool:
        return not self.quad_constraints

    def add_var(self, tag) -> int:
        return self.registry.add(tag)

    def add_constraint(self, expr: Expr, sense: str, rhs: float, tag=()):
        """Append a constraint; ``>=`` is stored as a negated ``<=``."""
        if sense == ">=":
            expr, rhs, sense = -expr, -rhs, "<="
        con = Constraint(expr, sense, rhs, tuple(tag))
        if not con.expr.is_linear:
            self.quad_constraints.append(con)
        elif sense == "==":
            self.eq_constraints.append(con)
        else:
            self.ineq_constraints.append(con)
        return con

    def add_onehot(self, ids, tag=()):
        ids = [int(i) for i in ids]
        self.onehot_groups.append(ids)
        self.add_constraint(Expr.sum_of(ids), "==", 1.0, ("onehot",) + tuple(tag))

    def constraints(self):
        return self.eq_constraints + self.ineq_constraints + self.quad_constraints

    def is_feasible(self, x, tol: float = 1e-9) -> bool:
        return all(c.satisfied(x, tol) for c in self.constraints())

    def feasible_mask(self, X, tol: float = 1e-9) -> np.ndarray:
        X = np.asarray(X)
        ok = np.ones(X.shape[0], dtype=bool)
        for c in self.constraints():
            ok &= c.satisfied_many(X, tol)
        return ok

    def copy(self) -> "QcboModel":
        return copy.deepcopy(self)

    def to_json(self) -> dict:
        return {
            "vars": [_tag_to_json(t) for t in self.registry.tags],
            "objective": self.objective.to_json(),
            "eq_constraints": [c.to_json() for c in self.eq_constraints],
            "ineq_constraints": [c.to_json() for c in self.ineq_constraints],
            "quad_constraints": [c.to_json() for c in self.quad_constraints],
            "onehot_groups": self.onehot_groups,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d: dict) -> "QcboModel":
        m = cls()
        for t in d["vars"]:
            m.registry.add(_tag_from_json(t))
        m.objective = Expr.from_json(d["objective"])
        m.eq_constraints = [Constraint.from_json(c) for c in d["eq_constraints"]]
        m.ineq_constraints = [Constraint.from_json(c) for c in d["ineq_constraints"]]
        m.quad_constraints = [Constraint.from_json(c) for c in d["quad_constraints"]]
        m.onehot_groups = [list(g) for g in d["onehot_groups"]]
        m.meta = d.get("meta", {})
        return m


def all_assignments(n: int) -> np.ndarray:
    """All ``2**n`` bit vectors in lexicographic order (x_0 most significant)."""
    if n > 22:
        raise SizeLimitError(f"refusing to enumerate 2**{n} assignments")
    codes = np.arange(2 ** n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.int8)


def brute_force_model(model: QcboModel, tol: float = 1e-9):
    """Exhaustive constrained minimum.

    Returns ``(x, value)`` with ties broken toward the lexicographically
    smallest vector, or ``(None, inf)`` when no assignment is feasible.
    """
    X = all_assignments(model.n_vars)
    ok = model.feasible_mask(X, tol)
    if not ok.any():
        return None, float("inf")
    vals = model.objective.evaluate_many(X)
    vals[~ok] = np.inf
    best = vals.min()
    idx = int(np.flatnonzero(vals <= best + tol * max(1.0, abs(best)))[0])
    return X[idx].astype(int), float(vals[idx])
