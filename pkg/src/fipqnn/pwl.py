"""Piecewise functions used as activation and loss surrogates.

Intervals are half-open ``[M_{i-1}, M_i)`` except the last one, which is
closed on the right, so every point of ``[M_0, M_n]`` belongs to exactly one
interval. Interval indices returned to callers are 1-based.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, OutOfRangeError

KINDS = ("constant", "linear")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class PiecewiseFn:
    """Piecewise constant or piecewise linear function on ``[M_0, M_n]``.

    Attributes:
        breakpoints: strictly increasing ``M_0 .. M_n``.
        values: ``n`` reals for kind ``constant``; ``n`` ``(slope, intercept)``
            pairs for kind ``linear``.
        kind: ``"constant"`` or ``"linear"``.
    """

    breakpoints: tuple
    values: tuple
    kind: str = "constant"

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        if len(bps) < 2:
            raise InvalidInputError("need at least two breakpoints")
        if not all(np.isfinite(bps)):
            raise InvalidInputError("breakpoints must be finite")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise InvalidInputError(f"breakpoints must be strictly increasing: {bps}")
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown kind {self.kind!r}")
        if self.kind == "constant":
            vals = tuple(float(v) for v in self.values)
        else:
            vals = tuple((float(s), float(c)) for s, c in self.values)
        if len(vals) != len(bps) - 1:
            raise InvalidInputError(
                f"{len(bps)} breakpoints need {len(bps) - 1} values, got {len(vals)}")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @property
    def n_intervals(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def lo(self) -> float:
        return self.breakpoints[0]

    @property
    def hi(self) -> float:
        return self.breakpoints[-1]

    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def midpoints(self) -> np.ndarray:
        b = np.asarray(self.breakpoints)
        return (b[:-1] + b[1:]) / 2

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        w = self.widths()
        return bool(np.allclose(w, w[0], rtol=rtol, atol=0.0))

    def locate(self, x: float) -> int:
        x = float(x)
        if not (self.lo <= x <= self.hi):
            raise OutOfRangeError(f"{x} outside [{self.lo}, {self.hi}]")
        return min(bisect.bisect_right(self.breakpoints, x), self.n_intervals)

    def locate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.size and (xs.min() < self.lo or xs.max() > self.hi or np.isnan(xs).any()):
            raise OutOfRangeError(f"values outside [{self.lo}, {self.hi}]")
        idx = np.searchsorted(np.asarray(self.breakpoints), xs, side="right")
        return np.minimum(idx, self.n_intervals)

    def __call__(self, x):
        if np.ndim(x) == 0:
            i = self.locate(x) - 1
            if self.kind == "constant":
                return self.values[i]
            s, c = self.values[i]
            return s * float(x) + c
        idx = self.locate_many(x) - 1
        if self.kind == "constant":
            return np.asarray(self.values)[idx]
        sc = np.asarray(self.values)
        return sc[idx, 0] * np.asarray(x, dtype=float) + sc[idx, 1]

    def rounded(self, decimals: int) -> "PiecewiseFn":
        """Constant-kind copy with values rounded half away from zero."""
        if self.kind != "constant":
            raise InvalidInputError("rounding applies to constant kind only")
        vals = [round_half_away(v, decimals) for v in self.values]
        return PiecewiseFn(self.breakpoints, vals, "constant")

    def to_json(self) -> dict:
        vals = list(self.values) if self.kind == "constant" else [list(v) for v in self.values]
        return {"breakpoints": list(self.breakpoints), "values": vals, "kind": self.kind}

    @classmethod
    def from_json(cls, d: dict) -> "PiecewiseFn":
        return cls(tuple(d["breakpoints"]), tuple(map(lambda v: tuple(v) if isinstance(v, list) else v,
                                                      d["values"])), d.get("kind", "constant"))


def round_half_away(v: float, decimals: int) -> float:
    from decimal import Decimal, ROUND_HALF_UP
    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(float(v))).quantize(q, rounding=ROUND_HALF_UP))


def build_midpoint_constant(f: Callable[[float], float], breakpoints: Sequence[float]) -> PiecewiseFn:
    """Piecewise constant fit taking ``f`` at each interval midpoint."""
    bps = tuple(float(b) for b in breakpoints)
    if len(bps) < 2 or any(b <= a for a, b in zip(bps, bps[1:])):
        raise InvalidInputError(f"breakpoints must be strictly increasing, length >= 2: {bps}")
    vals = []
    for a, b in zip(bps, bps[1:]):
        v = float(f((a + b) / 2))
        if not math.isfinite(v):
            raise InvalidInputError(f"f is not finite at {(a + b) / 2}")
        vals.append(v)
    return PiecewiseFn(bps, tuple(vals), "constant")


def build_linear_interpolant(f: Callable[[float], float], breakpoints: Sequence[float]) -> PiecewiseFn:
    """Chord interpolant through ``(M_i, f(M_i))``."""
    bps = tuple(float(b) for b in breakpoints)
    if len(bps) < 2 or any(b <= a for a, b in zip(bps, bps[1:])):
        raise InvalidInputError(f"breakpoints must be strictly increasing, length >= 2: {bps}")
    fv = [float(f(b)) for b in bps]
    pairs = []
    for (a, b), (fa, fb) in zip(zip(bps, bps[1:]), zip(fv, fv[1:])):
        s = (fb - fa) / (b - a)
        pairs.append((s, fa - s * a))
    return PiecewiseFn(bps, tuple(pairs), "linear")


def evaluate(pwf: PiecewiseFn, x):
    return pwf(x)


def locate_interval(pwf: PiecewiseFn, x: float) -> int:
    return pwf.locate(x)


def sup_error(f: Callable, pwf: PiecewiseFn, n_grid: int = 10_001) -> float:
    """Largest ``|f - pwf|`` over a uniform grid of ``[M_0, M_n]``."""
    xs = np.linspace(pwf.lo, pwf.hi, n_grid)
    return float(np.max(np.abs(np.asarray(f(xs), dtype=float) - pwf(xs))))


def segment_count_for_error(R: float, M2: float, eps: float) -> int:
    """Smallest ``n`` with ``R**2 * M2 / (2 n**2) <= eps``."""
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    if not R > 0 or M2 < 0:
        raise InvalidInputError("need R > 0 and M2 >= 0")
    if M2 == 0:
        return 1
    num = R * R * M2

    def ok(n):
        return num / (2.0 * n * n) <= eps

    n = max(1, math.ceil(math.sqrt(num / (2.0 * eps))))
    # guard the ceil against float round-off in either direction
    while n > 1 and ok(n - 1):
        n -= 1
    while not ok(n):
        n += 1
    return n


def network_error_bound(eps_sigma: float, m: int, L: int) -> float:
    """Output error bound ``eps_sigma * sqrt(m) * L`` for a depth-L, width-m net."""
    if eps_sigma < 0 or m < 1 or L < 1:
        raise InvalidInputError("need eps_sigma >= 0, m >= 1, L >= 1")
    return float(eps_sigma) * math.sqrt(m) * L
