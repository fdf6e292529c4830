"""Removal of product terms from constraints."""
from __future__ import annotations

from collections import Counter

import numpy as np

from ..errors import InvalidInputError
from .fip import bounded_bits
from .gadgets import linearize_product, linearize_weighted_bilinear, rosenberg_penalty
from .model import Expr, QcboModel

STRATEGIES = ("constraints", "rosenberg")


def _group_by_pivot(quad: dict):
    """Assign each product term to the variable shared by most remaining terms."""
    remaining = dict(quad)
    groups = []
    while remaining:
        cnt = Counter()
        for i, j in remaining:
            cnt[i] += 1
            cnt[j] += 1
        pivot = min(cnt, key=lambda v: (-cnt[v], v))
        terms = {}
        for (i, j) in [k for k in remaining if pivot in k]:
            other = j if i == pivot else i
            terms[other] = remaining.pop((i, j))
        groups.append((pivot, terms))
    return groups


def _integral_ratio(coeffs, tol=1e-9):
    g = min(coeffs)
    ratios = [c / g for c in coeffs]
    if all(abs(r - round(r)) <= tol for r in ratios):
        return g, [int(round(r)) for r in ratios]
    return None, None


def rosenberg_weight(objective: Expr) -> float:
    """Penalty weight exceeding any objective change: ``1 + sum |coeffs|``."""
    return 1.0 + objective.abs_coeff_sum()


def linearize_all(model: QcboModel, strategy: str = "constraints") -> QcboModel:
    """Return a copy whose constraints are all linear.

    ``constraints`` replaces each product by an auxiliary variable tied with
    linear rows; groups of products sharing one variable use a single
    integer auxiliary (weighted bilinear form). ``rosenberg`` replaces each
    product by a variable and adds ``P * (3y + x1 x2 - 2y(x1 + x2))`` to the
    objective with ``P = 1 + sum |objective coefficients|``. Auxiliaries are
    shared across constraints. Objective product terms are kept.
    """
    if strategy not in STRATEGIES:
        raise InvalidInputError(f"unknown strategy {strategy!r}")
    out = model.copy()
    if not out.quad_constraints:
        return out
    pending, out.quad_constraints = out.quad_constraints, []
    aux = out.meta.setdefault("aux", [])
    cache = {}
    P = rosenberg_weight(model.objective)
    out.meta.setdefault("objective_abs_sum", model.objective.abs_coeff_sum())
    if strategy == "rosenberg":
        out.meta["rosenberg_weight"] = P
    for con in pending:
        new = Expr(dict(con.expr.lin), {}, 0.0)
        if strategy == "rosenberg":
            for (i, j), c in con.expr.quad.items():
                key = ("ros", i, j)
                if key not in cache:
                    y = out.add_var(("aux_product", "ros", i, j))
                    out.objective.iadd(rosenberg_penalty(i, j, y), P)
                    aux.append({"kind": "product", "id": y, "of": [i, j]})
                    cache[key] = y
                new.add_lin(cache[key], c)
        else:
            for pivot, terms in _group_by_pivot(con.expr.quad):
                for sign in (1.0, -1.0):
                    sub = {q: c for q, c in terms.items() if c * sign > 0}
                    if not sub:
                        continue
                    g, ratios = (None, None) if len(sub) < 2 else _integral_ratio([abs(c) for c in sub.values()])
                    if g is None:
                        for q, c in sub.items():
                            i, j = min(pivot, q), max(pivot, q)
                            key = ("mc", i, j)
                            if key not in cache:
                                y, _ = linearize_product(out, i, j)
                                aux.append({"kind": "product", "id": y, "of": [i, j]})
                                cache[key] = y
                            new.add_lin(cache[key], c)
                        continue
                    qs = list(sub)
                    key = ("wz", pivot, tuple(sorted(zip(qs, ratios))))
                    if key not in cache:
                        a = Expr.sum_of(qs, ratios)
                        z, zids, _ = linearize_weighted_bilinear(out, pivot, a, ("aux_product", "wz", pivot, len(aux)))
                        aux.append({"kind": "scaled_product", "ids": zids, "w": pivot,
                                    "a": [[q, r] for q, r in zip(qs, ratios)], "K": int(sum(ratios))})
                        cache[key] = z
                    new.iadd(cache[key], sign * g)
        out.add_constraint(new, con.sense, con.rhs, con.tag)
    return out


def complete_aux(model: QcboModel, x) -> np.ndarray:
    """Fill auxiliary product variables from their definitions."""
    x = np.array(x, dtype=np.int8, copy=True)
    for rec in model.meta.get("aux", []):
        if rec["kind"] == "product":
            i, j = rec["of"]
            x[rec["id"]] = x[i] * x[j]
        else:
            val = int(x[rec["w"]]) * sum(int(x[q]) * r for q, r in rec["a"])
            x[rec["ids"]] = bounded_bits(val, rec["K"])
    return x
