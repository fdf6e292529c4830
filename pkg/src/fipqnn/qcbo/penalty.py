"""Quadratic penalty form of a linearized model (the direct QUBO)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, ModelBuildError
from ..qubo import QuboInstance
from .fip import bounded_bits
from .gadgets import bounded_coefficients
from .model import Expr, QcboModel


@dataclass
class PenaltyQubo:
    """QUBO over the model variables followed by slack bits.

    Attributes:
        qubo: the instance.
        n_model: number of leading model variables.
        penalty: weight multiplying every squared constraint residual.
        slacks: per inequality, ``(first slack index, coefficients)``.
    """

    qubo: QuboInstance
    n_model: int
    penalty: float
    slacks: list

    def model_part(self, x) -> np.ndarray:
        return np.asarray(x)[: self.n_model]

    def complete_slacks(self, model: QcboModel, x_model) -> np.ndarray:
        """Append slack bits that zero each satisfied inequality's residual."""
        x = np.zeros(self.qubo.n, dtype=np.int8)
        x[: self.n_model] = x_model
        for (start, coeffs), con in zip(self.slacks, _kept_ineqs(model)):
            gap = int(round(con.rhs - con.expr.evaluate(x_model)))
            gap = min(max(gap, 0), sum(coeffs))
            if all(c == 1 for c in coeffs):
                x[start:start + gap] = 1
            else:
                x[start:start + len(coeffs)] = bounded_bits(gap, sum(coeffs))
        return x


def _is_integral(vals, tol=1e-9) -> bool:
    return all(abs(v - round(v)) <= tol for v in vals)


def _kept_ineqs(model: QcboModel):
    kept = []
    for con in model.ineq_constraints:
        lo, hi = con.expr.bounds()
        if hi <= con.rhs + 1e-9:
            continue
        kept.append(con)
    return kept


def default_penalty(model: QcboModel) -> float:
    """``1 + sum |coeffs|`` of the objective before any Rosenberg terms were added.

    Rosenberg terms already cost at least their own weight when violated, so
    the bound only has to dominate the original objective.
    """
    return 1.0 + model.meta.get("objective_abs_sum", model.objective.abs_coeff_sum())


def to_penalty_qubo(model: QcboModel, penalty: float | None = None, slack: str = "binary") -> PenaltyQubo:
    """Fold constraints into the objective as ``P * residual**2``.

    Equalities contribute ``P (a.x - b)**2``. Each inequality ``a.x <= b``
    with integer coefficients gets an integer slack ``s`` over exactly
    ``0 .. b - min(a.x)`` and contributes ``P (a.x + s - b)**2``.
    Inequalities that hold for every assignment are dropped.

    With integer data every violated row costs at least ``P``, and the
    default ``P = 1 + sum |objective coefficients|`` exceeds any objective
    difference, so minimizers of the QUBO are minimizers of the model.
    """
    if not model.is_linearized:
        raise InvalidInputError("model has unlinearized product constraints")
    P = default_penalty(model) if penalty is None else float(penalty)
    n = model.n_vars
    total = model.objective.copy()
    for con in model.eq_constraints:
        r = con.expr - con.rhs
        lo, hi = r.bounds()
        if lo > 1e-9 or hi < -1e-9:
            raise ModelBuildError(f"equality {con.tag} can never hold")
        total.iadd(r.square(), P)
    slacks = []
    nxt = n
    for con in _kept_ineqs(model):
        lo, _ = con.expr.bounds()
        if lo > con.rhs + 1e-9:
            raise ModelBuildError(f"inequality {con.tag} can never hold")
        coeffs = list(con.expr.lin.values()) + [con.rhs]
        if not _is_integral(coeffs):
            raise InvalidInputError(f"inequality {con.tag} has non-integer data; slack encoding needs integers")
        K = int(round(con.rhs - lo))
        sc = bounded_coefficients(K) if slack == "binary" else [1] * K
        s = Expr.sum_of(range(nxt, nxt + len(sc)), sc)
        slacks.append((nxt, sc))
        nxt += len(sc)
        total.iadd((con.expr + s - con.rhs).square(), P)
    return PenaltyQubo(QuboInstance.from_expr(total, nxt), n, P, slacks)
