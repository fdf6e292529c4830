"""Forward Interval Propagation model of a quantized feedforward network.

Every (sample, neuron) pair gets a one-hot group selecting the activation
interval of its pre-activation. Two inequalities tie the affine
pre-activation to the selected interval, and an equality ties a
binary-encoded activation code to the interval's activation value. All
arithmetic is done on integers: inputs, activation values and interval
limits are scaled by a common denominator per layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

from ..errors import InvalidInputError, ModelBuildError
from ..pwl import PiecewiseFn
from .gadgets import bounded_coefficients, encode_bounded
from .model import Expr, QcboModel

INT_CODES = ("pm1", "offset")


def int_code_values(bits: int, code: str) -> list[int]:
    """Integers representable by ``bits`` under ``code``.

    ``offset``: ``{-2**(B-1), ..., 2**(B-1)-1}``. ``pm1``: odd values
    ``2u - (2**B - 1)``, which is ``{-1, +1}`` for one bit.
    """
    if code == "offset":
        return list(range(-(1 << (bits - 1)), 1 << (bits - 1)))
    if code == "pm1":
        return [2 * u - ((1 << bits) - 1) for u in range(1 << bits)]
    raise InvalidInputError(f"unknown integer code {code!r}")


def int_code_expr(ids, code: str) -> Expr:
    bits = len(ids)
    e = Expr.sum_of(ids, [1 << k for k in range(bits)])
    if code == "offset":
        e.const = -float(1 << (bits - 1))
        return e
    e = e * 2.0
    e.const = -float((1 << bits) - 1)
    return e


def decode_int(bitvals, code: str) -> int:
    u = sum(int(b) << k for k, b in enumerate(bitvals))
    bits = len(bitvals)
    return u - (1 << (bits - 1)) if code == "offset" else 2 * u - ((1 << bits) - 1)


def encode_int(value: int, bits: int, code: str) -> list[int]:
    if value not in int_code_values(bits, code):
        raise InvalidInputError(f"{value} not representable with {bits} bits ({code})")
    u = value + (1 << (bits - 1)) if code == "offset" else (value + (1 << bits) - 1) // 2
    return [(u >> k) & 1 for k in range(bits)]


def bounded_bits(value: int, K: int) -> list[int]:
    """Bits of ``value`` under :func:`bounded_coefficients` ``(K)``."""
    coeffs = bounded_coefficients(K)
    if not 0 <= value <= K:
        raise InvalidInputError(f"{value} outside 0..{K}")
    npow = 0
    while npow < len(coeffs) and coeffs[npow] == 1 << npow:
        npow += 1
    out = [0] * len(coeffs)
    if value > (1 << npow) - 1:
        out[-1] = 1
        value -= coeffs[-1]
    for k in range(npow):
        out[k] = (value >> k) & 1
    return out


def _as_fraction(v) -> Fraction:
    return Fraction(v).limit_denominator(10 ** 9) if isinstance(v, float) else Fraction(v)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def common_scale(values) -> int:
    """Smallest positive integer making every value an integer."""
    return reduce(_lcm, (_as_fraction(v).denominator for v in values), 1)


def interval_int_bounds(breakpoints, scale: int):
    """Integer limits ``(L_i, U_i)`` of each half-open interval scaled by ``scale``.

    An integer ``H`` lies in interval ``i`` iff ``L_i <= H <= U_i``.
    """
    bps = [_as_fraction(b) * scale for b in breakpoints]
    n = len(bps) - 1
    lows = [math.ceil(b) for b in bps[:-1]]
    highs = [math.ceil(b) - 1 for b in bps[1:n]] + [math.floor(bps[n])]
    return lows, highs


@dataclass(frozen=True)
class NetSpec:
    """Architecture and coding of a quantized network.

    Attributes:
        dims: layer widths ``d_0 .. d_L``.
        activation: constant-kind piecewise activation used by every layer.
        weight_bits, bias_bits: bits per parameter.
        weight_code, bias_code: ``"pm1"`` (odd symmetric values, +-1 for one
            bit) or ``"offset"`` (shifted unsigned code).
        activation_decimals: activation values are rounded to this many
            decimals before integer scaling.
        loss_table: optional ``n x 2`` table ``loss[i][y]``; squared error
            of the rounded activation value by default.
    """

    dims: tuple
    activation: PiecewiseFn
    weight_bits: int = 1
    weight_code: str = "pm1"
    bias_bits: int = 1
    bias_code: str = "pm1"
    activation_decimals: int = 3
    loss_table: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.loss_table is not None:
            object.__setattr__(self, "loss_table", tuple(tuple(float(v) for v in r) for r in self.loss_table))
        self.check()

    def check(self):
        if len(self.dims) < 3:
            raise InvalidInputError("need at least one hidden layer: dims = (d0, d1, ..., dL)")
        if any(d < 1 for d in self.dims):
            raise InvalidInputError("layer widths must be positive")
        if self.weight_bits < 1 or self.bias_bits < 1:
            raise InvalidInputError("bit widths must be >= 1")
        if self.weight_code not in INT_CODES or self.bias_code not in INT_CODES:
            raise InvalidInputError("unknown integer code")
        if self.activation.kind != "constant":
            raise InvalidInputError("the encoder consumes constant-kind activations only")
        if self.activation_decimals < 0:
            raise InvalidInputError("activation_decimals must be >= 0")
        if self.loss_table is not None and (len(self.loss_table) != self.activation.n_intervals
                                            or any(len(r) != 2 for r in self.loss_table)):
            raise InvalidInputError("loss table must be n_intervals x 2")

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @property
    def n_params(self) -> int:
        return sum(self.dims[l] * (self.dims[l - 1] + 1) for l in range(1, len(self.dims)))

    def weight_values(self):
        return int_code_values(self.weight_bits, self.weight_code)

    def bias_values(self):
        return int_code_values(self.bias_bits, self.bias_code)

    def effective_activation(self) -> PiecewiseFn:
        return self.activation.rounded(self.activation_decimals)

    def activation_codes(self):
        """``(codes, scale)`` with activation value ``codes[i] / scale``."""
        vals = [Fraction(repr(v)) for v in self.effective_activation().values]
        scale = common_scale(vals)
        return [int(v * scale) for v in vals], scale

    def loss(self, i: int, y: int) -> float:
        """Loss of interval ``i`` (1-based) against label ``y``."""
        if self.loss_table is not None:
            return self.loss_table[i - 1][int(y)]
        v = self.effective_activation().values[i - 1]
        return (v - float(y)) ** 2

    def preact_ranges(self, input_lo, input_hi):
        """Interval-arithmetic range of every layer's pre-activation."""
        wv, bv = self.weight_values(), self.bias_values()
        av = self.effective_activation().values
        lo_in, hi_in = np.broadcast_to(input_lo, (self.dims[0],)), np.broadcast_to(input_hi, (self.dims[0],))
        out = []
        for l in range(1, len(self.dims)):
            lo = hi = 0.0
            for k in range(self.dims[l - 1]):
                corners = [w * a for w in (min(wv), max(wv)) for a in (lo_in[k], hi_in[k])]
                lo += min(corners)
                hi += max(corners)
            lo += min(bv)
            hi += max(bv)
            out.append((lo, hi))
            lo_in = np.full(self.dims[l], min(av))
            hi_in = np.full(self.dims[l], max(av))
        return out

    def validate_ranges(self, input_lo=-1.0, input_hi=1.0):
        a = self.activation
        for l, (lo, hi) in enumerate(self.preact_ranges(input_lo, input_hi), start=1):
            if lo < a.lo or hi > a.hi:
                raise ModelBuildError(
                    f"layer {l}: pre-activation range [{lo}, {hi}] not covered by "
                    f"activation breakpoints [{a.lo}, {a.hi}]")

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "activation": self.activation.to_json(),
                "weight_bits": self.weight_bits, "weight_code": self.weight_code,
                "bias_bits": self.bias_bits, "bias_code": self.bias_code,
                "activation_decimals": self.activation_decimals,
                "loss_table": None if self.loss_table is None else [list(r) for r in self.loss_table]}

    @classmethod
    def from_json(cls, d: dict) -> "NetSpec":
        d = dict(d)
        d["activation"] = PiecewiseFn.from_json(d["activation"])
        return cls(**d)


def integer_inputs(X):
    """Scale features to integers: returns ``(X_int, scale)``."""
    X = np.asarray(X)
    if np.issubdtype(X.dtype, np.integer):
        return X.astype(np.int64), 1
    flat = X.ravel().tolist()
    scale = common_scale(flat)
    return np.array([[int(_as_fraction(v) * scale) for v in row] for row in X], dtype=np.int64).reshape(X.shape), scale


def exact_forward(spec: NetSpec, X, weights, biases):
    """Integer forward pass consistent with the interval constraints.

    Returns:
        list over layers of 1-based interval indices ``(N, d_l)``, and the
        output values ``(N, d_L)`` as floats.
    """
    X_int, den = integer_inputs(np.atleast_2d(X))
    codes, scale = spec.activation_codes()
    codes = np.asarray(codes, dtype=np.int64)
    bps = spec.activation.breakpoints
    num = X_int
    idx_all = []
    for l, (W, b) in enumerate(zip(weights, biases), start=1):
        H = num @ np.asarray(W, dtype=np.int64).T + np.asarray(b, dtype=np.int64) * den
        lows, highs = interval_int_bounds(bps, den)
        bad = (H < lows[0]) | (H > highs[-1])
        if bad.any():
            s, j = np.argwhere(bad)[0]
            raise ModelBuildError(f"layer {l} neuron {j}: pre-activation {H[s, j]}/{den} out of range")
        idx = np.searchsorted(np.asarray(lows), H, side="right")
        idx_all.append(idx)
        num = codes[idx - 1]
        den = scale
    return idx_all, num / float(scale)


@dataclass
class FipLayout:
    """Ids of the structural variables of a built model (kept in ``meta``)."""

    weights: list = field(default_factory=list)   # [l][j][k] -> list of ids
    biases: list = field(default_factory=list)    # [l][j] -> list of ids


ENCODINGS = ("inequality", "compact")


def _compact_interval(m: QcboModel, beta, lows, highs, H, tag):
    """``H == sum_i beta_i lows_i + s + e`` with ``0 <= s + e <= width`` of the chosen interval.

    ``s`` is a bounded integer over ``0 .. min width``; when widths differ an
    extension ``e`` over ``0 .. max - min width`` is capped by
    ``e <= sum_i beta_i (width_i - min width)``.
    """
    widths = [hi - lo for lo, hi in zip(lows, highs)]
    kmax, kmin = max(widths), min(widths)
    s_e, _ = encode_bounded(m, kmin, ("slack_bit", "iv") + tag)
    row = H - Expr.sum_of(beta, lows) - s_e
    if kmax > kmin:
        e_e, _ = encode_bounded(m, kmax - kmin, ("slack_bit", "ext") + tag)
        row = row - e_e
        m.add_constraint(e_e - Expr.sum_of(beta, [w - kmin for w in widths]), "<=", 0.0, ("width",) + tag)
    m.add_constraint(row, "==", 0.0, ("interval",) + tag)


def build_fip_model(spec: NetSpec, X, y, sample_weights=None, encoding: str = "inequality") -> QcboModel:
    """Build the constrained binary model for training ``spec`` on ``(X, y)``.

    Args:
        spec: network architecture and coding.
        X: ``(N, d_0)`` features.
        y: ``N`` binary labels.
        sample_weights: multiplicity of each sample in the loss (default 1).
        encoding: ``"inequality"`` bounds each pre-activation by two
            inequalities and stores activation codes in their own bits;
            ``"compact"`` uses one interval equality with a width slack and
            feeds ``sum_i beta_i code_i`` straight into the next layer.
            Both have the same feasible parameter set and optimum.
    """
    if encoding not in ENCODINGS:
        raise InvalidInputError(f"encoding must be one of {ENCODINGS}")
    X = np.atleast_2d(np.asarray(X))
    y = np.asarray(y).astype(int).ravel()
    N = X.shape[0]
    if N == 0:
        raise ModelBuildError("empty training data")
    if X.shape[1] != spec.dims[0] or len(y) != N:
        raise ModelBuildError(f"data shape {X.shape} / {len(y)} labels does not match dims {spec.dims}")
    w_s = np.ones(N) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    spec.validate_ranges(X.min(axis=0), X.max(axis=0))

    X_int, S0 = integer_inputs(X)
    codes, S = spec.activation_codes()
    off = min(0, min(codes))
    K = max(codes) - off
    n = spec.activation.n_intervals
    bps = spec.activation.breakpoints
    L = spec.n_layers

    m = QcboModel()
    layout = FipLayout()
    W_expr, B_expr = [], []
    for l in range(1, L + 1):
        wl, bl, we, be = [], [], [], []
        for j in range(spec.dims[l]):
            row_ids, row_e = [], []
            for k in range(spec.dims[l - 1]):
                ids = [m.add_var(("weight_bit", l, j, k, t)) for t in range(spec.weight_bits)]
                row_ids.append(ids)
                row_e.append(int_code_expr(ids, spec.weight_code))
            ids = [m.add_var(("bias_bit", l, j, t)) for t in range(spec.bias_bits)]
            wl.append(row_ids)
            we.append(row_e)
            bl.append(ids)
            be.append(int_code_expr(ids, spec.bias_code))
        layout.weights.append(wl)
        layout.biases.append(bl)
        W_expr.append(we)
        B_expr.append(be)

    bounds = {1: interval_int_bounds(bps, S0)}
    if L > 1:
        bounds[2] = interval_int_bounds(bps, S)
    for s in range(N):
        prev = None   # activation code expressions (stored, shifted by off)
        for l in range(1, L + 1):
            den = S0 if l == 1 else S
            lows, highs = bounds[min(l, 2)]
            cur = []
            for j in range(spec.dims[l]):
                H = B_expr[l - 1][j] * float(den)
                for k in range(spec.dims[l - 1]):
                    if l == 1:
                        H.iadd(W_expr[0][j][k], float(X_int[s, k]))
                    else:
                        H.iadd(W_expr[l - 1][j][k].mul(prev[k] + float(off)))
                out = l == L
                tag = ("beta_output", s, j) if out else ("beta_preact", s, l, j)
                beta = [m.add_var(tag + (i,)) for i in range(1, n + 1)]
                m.add_onehot(beta, ("onehot", s, l, j))
                if encoding == "compact":
                    _compact_interval(m, beta, lows, highs, H, (s, l, j))
                else:
                    m.add_constraint(Expr.sum_of(beta, lows) - H, "<=", 0.0, ("lower", s, l, j))
                    m.add_constraint(H - Expr.sum_of(beta, highs), "<=", 0.0, ("upper", s, l, j))
                if out:
                    for i, b in enumerate(beta, start=1):
                        m.objective.add_lin(b, w_s[s] * spec.loss(i, y[s]))
                elif encoding == "compact":
                    cur.append(Expr.sum_of(beta, [float(c - off) for c in codes]))
                else:
                    a_e, _ = encode_bounded(m, K, ("activ_bit", s, l, j))
                    m.add_constraint(a_e - Expr.sum_of(beta, [c - off for c in codes]), "==", 0.0,
                                     ("activation", s, l, j))
                    cur.append(a_e)
            prev = cur

    m.meta = {
        "kind": "fip",
        "encoding": encoding,
        "spec": spec.to_json(),
        "n_samples": N,
        "input_scale": S0,
        "activation_scale": S,
        "activation_offset": off,
        "activation_codes": codes,
        "layout": {"weights": layout.weights, "biases": layout.biases},
    }
    return m


def layout_of(model: QcboModel) -> FipLayout:
    lay = model.meta["layout"]
    return FipLayout(lay["weights"], lay["biases"])


def parameters_from_bits(model: QcboModel, x):
    """Integer weights and biases encoded in a solution vector."""
    spec = NetSpec.from_json(model.meta["spec"])
    lay = layout_of(model)
    x = np.asarray(x)
    Ws, Bs = [], []
    for wl, bl in zip(lay.weights, lay.biases):
        Ws.append(np.array([[decode_int(x[ids], spec.weight_code) for ids in row] for row in wl], dtype=np.int64))
        Bs.append(np.array([decode_int(x[ids], spec.bias_code) for ids in bl], dtype=np.int64))
    return Ws, Bs


def feasible_completion(model: QcboModel, X, weights, biases) -> np.ndarray:
    """Solution vector for given integer parameters.

    Sets parameter bits from ``weights``/``biases``, interval indicators
    and activation codes from the exact forward pass, and any auxiliary
    product variables from their definitions.
    """
    spec = NetSpec.from_json(model.meta["spec"])
    lay = layout_of(model)
    x = np.zeros(model.n_vars, dtype=np.int8)
    for l, (wl, bl) in enumerate(zip(lay.weights, lay.biases)):
        for j, row in enumerate(wl):
            for k, ids in enumerate(row):
                x[ids] = encode_int(int(weights[l][j][k]), spec.weight_bits, spec.weight_code)
            x[bl[j]] = encode_int(int(biases[l][j]), spec.bias_bits, spec.bias_code)
    idx_all, _ = exact_forward(spec, X, weights, biases)
    codes = model.meta["activation_codes"]
    off = model.meta["activation_offset"]
    K = max(codes) - off
    reg = model.registry
    L = spec.n_layers
    compact = model.meta.get("encoding") == "compact"
    for s in range(idx_all[0].shape[0]):
        for l in range(1, L + 1):
            for j in range(spec.dims[l]):
                i = int(idx_all[l - 1][s, j])
                tag = ("beta_output", s, j, i) if l == L else ("beta_preact", s, l, j, i)
                x[reg.id_of(tag)] = 1
                if compact:
                    continue
                if l < L:
                    ids = [reg.id_of(("activ_bit", s, l, j, t)) for t in range(len(bounded_coefficients(K)))]
                    x[ids] = bounded_bits(codes[i - 1] - off, K)
    if compact:
        _complete_interval_slacks(model, x)
        return x
    from .linearize import complete_aux
    return complete_aux(model, x)


def _complete_interval_slacks(model: QcboModel, x):
    """Fill compact-encoding slacks from the interval equalities (auxiliaries first)."""
    from .linearize import complete_aux
    x[:] = complete_aux(model, x)
    tags = model.registry.tags
    for con in model.eq_constraints + model.quad_constraints:
        if not con.tag or con.tag[0] != "interval" or con.sense != "==":
            continue
        s_ids = [v for v in con.expr.lin if tags[v][:2] == ("slack_bit", "iv")]
        e_ids = [v for v in con.expr.lin if tags[v][:2] == ("slack_bit", "ext")]
        rest = con.expr.copy()
        for v in s_ids + e_ids:
            rest.lin.pop(v)
        # slack coefficients enter with a minus sign
        val = int(round(rest.evaluate(x) - con.rhs))
        kmin = -int(round(sum(con.expr.lin[v] for v in s_ids)))
        kext = -int(round(sum(con.expr.lin[v] for v in e_ids)))
        if not 0 <= val <= kmin + kext:
            raise ModelBuildError(f"{con.tag}: slack value {val} outside 0..{kmin + kext}")
        x[s_ids] = bounded_bits(min(val, kmin), kmin)
        if e_ids:
            x[e_ids] = bounded_bits(val - min(val, kmin), kext)


def spin_report(model: QcboModel) -> dict:
    """Variable counts per family plus the total."""
    counts = model.registry.counts()
    counts = {k: v for k, v in counts.items() if v}
    counts["total"] = model.n_vars
    return counts


def sample_complexity(dims, B: int, eps: float, alpha: float, c_max: float) -> int:
    """Hoeffding sample size for a finite hypothesis class of quantized nets.

    ``N = ceil(c_max**2 / (2 eps**2) * ln(2 |Theta| / alpha))`` with
    ``|Theta| = 2**(B * sum_l d_l (d_{l-1} + 1))``.
    """
    if not (0 < eps < 1 and 0 < alpha < 1):
        raise InvalidInputError("eps and alpha must lie in (0, 1)")
    if not c_max > 0:
        raise InvalidInputError("c_max must be positive")
    if int(B) != B or B < 1:
        raise InvalidInputError("B must be a positive integer")
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidInputError("dims must list at least two positive widths")
    n_params = sum(dims[l] * (dims[l - 1] + 1) for l in range(1, len(dims)))
    log_theta = B * n_params * math.log(2.0)
    return math.ceil(c_max ** 2 / (2 * eps ** 2) * (math.log(2.0) + log_theta - math.log(alpha)))
