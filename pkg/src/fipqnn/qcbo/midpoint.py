"""Slack-free direct QUBO for network training via nearest-midpoint interval penalties.

Each pre-activation ``h`` lives on an integer grid, so interval ``i`` holds
the integers ``lows[i] .. highs[i]``. Placing virtual boundaries at the
half-integers between intervals and spacing virtual midpoints uniformly by
the common inner width ``g`` makes the one-hot choice with the nearest
midpoint exactly the interval that contains ``h``, with no ties. The penalty
``sum_i beta_i ((h - mu_i) / g)**2`` folds to a quadratic using
``sum beta == 1``; products of weight bits and upstream indicators become
Rosenberg auxiliaries. All terms live in the objective, so the model has no
constraints and its objective is the QUBO.

Unlike the constrained encodings the penalty is not zero at the correct
choice; ``strength`` trades selection sharpness against that distortion.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError, ModelBuildError
from .fip import FipLayout, NetSpec, int_code_expr, integer_inputs, interval_int_bounds
from .gadgets import rosenberg_penalty
from .model import Expr, QcboModel


def grid_midpoints(lows, highs):
    """``(mu, g)``: virtual midpoints on the integer grid and their spacing.

    Needs equal widths for the inner intervals (the first and last ones are
    unbounded under the nearest-midpoint rule).
    """
    n = len(lows)
    inner = {highs[i] - lows[i] + 1 for i in range(1, n - 1)}
    if len(inner) > 1:
        raise InvalidInputError(f"inner intervals must share one width on the integer grid, got {sorted(inner)}")
    g = inner.pop() if inner else 1
    base = lows[1] - 0.5 if n > 1 else lows[0] - 0.5
    mu = np.array([base + g * (i - 1) + g / 2.0 for i in range(n)])
    return mu, float(g)


def _midpoint_penalty(beta, h: Expr, mu, g: float) -> Expr:
    u = h * (1.0 / g)
    pen = u.square()
    for b, m in zip(beta, mu / g):
        pen.iadd(u.mul(Expr.var(b)), -2.0 * m)
        pen.add_lin(b, m * m)
    return pen


def _onehot_penalty(beta) -> Expr:
    e = Expr.sum_of(beta, [1.0] * len(beta))
    e.const -= 1.0
    return e.square()


def build_midpoint_qubo_model(spec: NetSpec, X, y, sample_weights=None, strength: float = 1.0,
                              onehot_weight: float = 1.0) -> QcboModel:
    """Unconstrained model whose objective is the direct training QUBO.

    Args:
        spec: network architecture and coding.
        X, y: features ``(N, d_0)`` and binary labels.
        sample_weights: loss multiplicities (default 1).
        strength: midpoint penalty weight per unit of sample weight.
        onehot_weight: weight of the one-hot and Rosenberg penalties per unit
            of sample weight.
    """
    X = np.atleast_2d(np.asarray(X))
    y = np.asarray(y).astype(int).ravel()
    N = X.shape[0]
    if N == 0:
        raise ModelBuildError("empty training data")
    if X.shape[1] != spec.dims[0] or len(y) != N:
        raise ModelBuildError(f"data shape {X.shape} / {len(y)} labels does not match dims {spec.dims}")
    if strength <= 0 or onehot_weight <= 0:
        raise InvalidInputError("penalty weights must be positive")
    w_s = np.ones(N) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    spec.validate_ranges(X.min(axis=0), X.max(axis=0))

    X_int, S0 = integer_inputs(X)
    codes, S = spec.activation_codes()
    n = spec.activation.n_intervals
    bps = spec.activation.breakpoints
    grids = {S0: grid_midpoints(*interval_int_bounds(bps, S0))}
    grids.setdefault(S, grid_midpoints(*interval_int_bounds(bps, S)))
    L = spec.n_layers

    m = QcboModel()
    layout = FipLayout()
    W_ids, B_expr = [], []
    for l in range(1, L + 1):
        wl, bl, be = [], [], []
        for j in range(spec.dims[l]):
            wl.append([[m.add_var(("weight_bit", l, j, k, t)) for t in range(spec.weight_bits)]
                       for k in range(spec.dims[l - 1])])
            ids = [m.add_var(("bias_bit", l, j, t)) for t in range(spec.bias_bits)]
            bl.append(ids)
            be.append(int_code_expr(ids, spec.bias_code))
        layout.weights.append(wl)
        layout.biases.append(bl)
        W_ids.append(wl)
        B_expr.append(be)

    obj = Expr()
    for s in range(N):
        prev = None   # per upstream neuron: its one-hot ids
        for l in range(1, L + 1):
            den = S0 if l == 1 else S
            mu, g = grids[den]
            cur = []
            for j in range(spec.dims[l]):
                H = B_expr[l - 1][j] * float(den)
                for k in range(spec.dims[l - 1]):
                    wexpr = int_code_expr(W_ids[l - 1][j][k], spec.weight_code)
                    if l == 1:
                        H.iadd(wexpr, float(X_int[s, k]))
                        continue
                    # (sum_t c_t b_t + c0) * sum_i code_i beta_i with b_t beta_i -> aux
                    for i, (bid, code) in enumerate(zip(prev[k], codes)):
                        if code == 0:
                            continue
                        H.add_lin(bid, wexpr.const * code)
                        for bit, coef in wexpr.lin.items():
                            aux = m.add_var(("aux_product", "ros", s, l, j, k, bit, i))
                            obj.iadd(rosenberg_penalty(bit, bid, aux), onehot_weight * w_s[s])
                            H.add_lin(aux, coef * code)
                out = l == L
                tag = ("beta_output", s, j) if out else ("beta_preact", s, l, j)
                beta = [m.add_var(tag + (i,)) for i in range(1, n + 1)]
                obj.iadd(_midpoint_penalty(beta, H, mu, g), strength * w_s[s])
                obj.iadd(_onehot_penalty(beta), onehot_weight * w_s[s])
                if out:
                    for i, b in enumerate(beta, start=1):
                        obj.add_lin(b, w_s[s] * spec.loss(i, y[s]))
                cur.append(beta)
            prev = cur

    m.objective = obj
    m.meta = {
        "kind": "fip_midpoint",
        "spec": spec.to_json(),
        "n_samples": N,
        "input_scale": S0,
        "activation_scale": S,
        "activation_codes": codes,
        "strength": strength,
        "onehot_weight": onehot_weight,
        "layout": {"weights": layout.weights, "biases": layout.biases},
    }
    return m
