"""Encoding and linearization gadgets for binary models."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .model import Expr, QcboModel


def power_coefficients(bits: int) -> list[int]:
    return [1 << k for k in range(bits)]


def bounded_coefficients(K: int) -> list[int]:
    """Coefficients whose subset sums cover exactly ``0..K``.

    Powers of two up to the largest that fits, then a remainder term, so the
    encoded integer can never exceed ``K``.
    """
    K = int(K)
    if K < 0:
        raise InvalidInputError("range must be non-negative")
    coeffs, total, p = [], 0, 1
    while total + p <= K:
        coeffs.append(p)
        total += p
        p <<= 1
    if total < K:
        coeffs.append(K - total)
    return coeffs


def code_offset(bits: int, signed: bool) -> int:
    return -(1 << (bits - 1)) if signed else 0


def encode_integer(model: QcboModel, bits: int, signed: bool = False, tag=("var",)):
    """Register ``bits`` fresh variables and return their integer expression.

    Unsigned: ``sum_l 2**l * d_l``. Signed: the same minus ``2**(bits-1)``.
    Variables are tagged ``tag + (l,)``.

    Returns:
        (Expr, list of ids)
    """
    if bits < 1:
        raise InvalidInputError("bits must be >= 1")
    ids = [model.add_var(tuple(tag) + (k,)) for k in range(bits)]
    e = Expr.sum_of(ids, power_coefficients(bits))
    e.const = float(code_offset(bits, signed))
    return e, ids


def encode_bounded(model: QcboModel, K: int, tag):
    """Register variables encoding an integer in exactly ``0..K``."""
    coeffs = bounded_coefficients(K)
    ids = [model.add_var(tuple(tag) + (k,)) for k in range(len(coeffs))]
    return Expr.sum_of(ids, coeffs), ids


def decode_bits(bits, signed: bool = False) -> int:
    v = sum(int(b) << k for k, b in enumerate(bits))
    return v + code_offset(len(bits), signed)


def rosenberg_penalty(x1: int, x2: int, y: int) -> Expr:
    """``3y + x1 x2 - 2y(x1 + x2)``: zero iff ``y == x1*x2``, else >= 1."""
    e = Expr.var(y, 3.0)
    e.add_quad(x1, x2, 1.0)
    e.add_quad(y, x1, -2.0)
    e.add_quad(y, x2, -2.0)
    return e


def rosenberg_reduce(model: QcboModel, x1: int, x2: int, tag=None):
    """New variable standing for ``x1*x2`` plus its penalty expression."""
    y = model.add_var(tag or ("aux_product", "ros", min(x1, x2), max(x1, x2)))
    return y, rosenberg_penalty(x1, x2, y)


def product_constraints(xi: int, xj: int, xij: int):
    """Three linear rows forcing ``xij == xi * xj`` on binaries."""
    return [
        (Expr({xij: 1.0, xi: -1.0}), "<=", 0.0),
        (Expr({xij: 1.0, xj: -1.0}), "<=", 0.0),
        (Expr({xi: 1.0, xj: 1.0, xij: -1.0}), "<=", 1.0),
    ]


def linearize_product(model: QcboModel, xi: int, xj: int, tag=None):
    """Add ``xij`` with the three product constraints; returns ``(xij, constraints)``."""
    xij = model.add_var(tag or ("aux_product", "mc", min(xi, xj), max(xi, xj)))
    cons = [model.add_constraint(e, s, r, ("product", xij)) for e, s, r in product_constraints(xi, xj, xij)]
    return xij, cons


def linearize_weighted_bilinear(model: QcboModel, w: int, a_expr: Expr, tag=None):
    """Integer ``z = w * a`` for binary ``w`` and a bit sum ``a`` with max ``K``.

    ``a_expr`` must be a linear form with non-negative integer coefficients
    and no constant. ``z`` is encoded over exactly ``0..K`` and tied by

        a + K w - z <= K,   z <= a,   z <= K w.

    Returns:
        (z Expr, z ids, constraints)
    """
    if a_expr.quad or a_expr.const:
        raise InvalidInputError("activation expression must be a pure linear bit sum")
    coeffs = list(a_expr.lin.values())
    if any(c < 0 or c != int(c) for c in coeffs):
        raise InvalidInputError("bit-sum coefficients must be non-negative integers")
    K = int(sum(coeffs))
    if tag is None:
        tag = ("aux_product", "wz", w, len(model.registry))
    z, zids = encode_bounded(model, K, tag)
    wk = Expr.var(w, K)
    cons = [
        model.add_constraint(a_expr + wk - z, "<=", K, ("bilinear", w)),
        model.add_constraint(z - a_expr, "<=", 0.0, ("bilinear", w)),
        model.add_constraint(z - wk, "<=", 0.0, ("bilinear", w)),
    ]
    return z, zids, cons


def _slack_expr(model, bits, lo, hi, tag):
    """Slack ranging over ``[lo, hi]`` in ``2**bits - 1`` equal steps."""
    if bits == 0:
        return Expr.constant((lo + hi) / 2.0) if lo != hi else Expr.constant(lo)
    e, _ = encode_integer(model, bits, False, tag)
    return e * ((hi - lo) / ((1 << bits) - 1)) + lo


def interval_ineq_to_penalty(model: QcboModel, beta_ids, breakpoints, h, mode: str = "midpoint",
                             slack_bits: int = 4, tag=("slack_bit", "iv")) -> Expr:
    """Quadratic penalty that is small iff the one-hot ``beta`` selects the interval of ``h``.

    Args:
        beta_ids: one-hot group, one variable per interval.
        breakpoints: ``M_0 .. M_n``.
        h: an ``Expr`` (or number) for the interval argument.
        mode: ``"slack"`` emits ``(sum_i beta_i M_{i-1} + s - h)**2`` with
            ``s`` over ``[0, dM]``; ``"midpoint"`` emits
            ``sum_i beta_i ((2h - M_{i-1} - M_i) / (2 (M_i - M_{i-1})) + s)**2``
            with ``s`` over ``[-1/2, 1/2]``. ``slack_bits=0`` fixes ``s`` to the
            middle of its range (``0`` in midpoint mode).

    Cubic terms are removed using ``sum beta == 1``, which needs uniform
    widths whenever ``h`` or ``s`` is symbolic.
    """
    bps = np.asarray(breakpoints, dtype=float)
    n = len(bps) - 1
    if len(beta_ids) != n:
        raise InvalidInputError(f"{n} intervals need {n} beta variables")
    widths = np.diff(bps)
    uniform = bool(np.allclose(widths, widths[0], rtol=1e-12, atol=0))
    h = h if isinstance(h, Expr) else Expr.constant(float(h))
    if mode == "slack":
        if not uniform:
            raise InvalidInputError("slack mode needs uniform interval widths")
        s = _slack_expr(model, slack_bits, 0.0, float(widths[0]), tag)
        inner = Expr.sum_of(beta_ids, bps[:-1]) + s - h
        return inner.square()
    if mode != "midpoint":
        raise InvalidInputError(f"unknown mode {mode!r}")
    s = _slack_expr(model, slack_bits, -0.5, 0.5, tag)
    mids = (bps[:-1] + bps[1:]) / 2
    consts = (2 * h.const - 2 * mids) / (2 * widths)
    if not (h.lin or h.quad):
        # numeric argument: sum_i b_i (c_i + s)^2 = sum_i b_i (c_i^2 + 2 c_i s) + s^2
        pen = s.square() if s.lin else Expr.constant(s.const ** 2)
        for b, c in zip(beta_ids, consts):
            pen.add_lin(b, c * c)
            pen.iadd(s.mul(Expr.var(b)), 2.0 * c)
        return pen
    if not uniform:
        raise InvalidInputError("midpoint mode with symbolic argument needs uniform widths")
    # sum_i beta_i (u - mu_i)^2 with u = h/dM + s and mu_i = m_i/dM; sum beta = 1 folds u^2
    dm = float(widths[0])
    u = h * (1.0 / dm) + s
    pen = u.square()
    for b, mu in zip(beta_ids, mids / dm):
        pen.iadd(u.mul(Expr.var(b)), -2.0 * mu)
        pen.add_lin(b, mu * mu)
    return pen


def encode_sign_activation(model: QcboModel, x, M: float, lam: float, slack_bits: int = 4,
                           tag=("slack_bit", "sign")):
    """Binary ``beta`` with ``2 beta - 1 == sign(x)`` at the penalty optimum.

    Emits ``(2b - 1) + lam * [b ((2x - M)/(2M) + s)**2 + (1-b) ((2x + M)/(2M) + s)**2]``
    reduced to quadratic form using ``b**2 == b``:
    ``(2b - 1) + lam * [((2x + M)/(2M) + s)**2 - 2 b (x/M + s)]``.

    Returns:
        (beta id, objective Expr)
    """
    if not (M > 0 and lam > 0):
        raise InvalidInputError("need M > 0 and lam > 0")
    x = x if isinstance(x, Expr) else Expr.constant(float(x))
    b = model.add_var(("var", "sign_beta", len(model.registry)))
    s = _slack_expr(model, slack_bits, -0.5, 0.5, tag + (b,))
    neg_branch = x * (1.0 / M) + 0.5 + s
    obj = Expr.var(b, 2.0) - 1.0
    obj.iadd(neg_branch.square(), lam)
    obj.iadd((x * (1.0 / M) + s).mul(Expr.var(b)), -2.0 * lam)
    return b, obj
