"""Copositive lift and the conditional-gradient loop over QUBO oracles.

A linearized model ``min f(x) s.t. A x = b`` (inequalities get integer
slacks) is lifted to matrices ``V`` in the convex hull of ``[1;x][1;x]'``.
Each equality contributes a linear row ``sum_i a_i V[0,i] = b`` and a
squared row ``[-b;a]' V [-b;a] = 0``; the second makes the lift exact
because it vanishes on a mixture only when every atom is feasible. The loop
is a Frank-Wolfe method on an augmented Lagrangian whose linear
subproblem is a QUBO handed to an oracle.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SizeLimitError
from .qcbo.gadgets import bounded_coefficients
from .qcbo.model import Expr, QcboModel, brute_force_model
from .qubo import (BRUTE_FORCE_CAP, OracleContext, QuboInstance, best_of, brute_force_solve,
                   samples_per_step, truncate)

log = logging.getLogger(__name__)

DUAL_STEPS = ("gamma_alpha", "gamma")


@dataclass
class CopositiveProgram:
    """``min Tr(C V)`` subject to rows ``Tr(A_r V) = v_r``.

    Rows are stored compactly as ``(kind, vec, rhs)``: ``pin`` is
    ``V[0,0]``, ``linear`` is ``sum_i vec_i V[0,i]``, ``squared`` is
    ``vec' V vec``.

    Attributes:
        p: lifted dimension (homogenizing coordinate, model variables, slacks).
        n_orig: number of model variables (coordinates ``1..n_orig``).
        C: symmetric cost matrix.
        rows: constraint rows.
        A_eq, b_eq: equalities over the ``p - 1`` binary coordinates.
        model: the source model (used for feasibility and reference values).
    """

    p: int
    n_orig: int
    C: np.ndarray
    rows: list
    A_eq: np.ndarray
    b_eq: np.ndarray
    model: QcboModel = None

    def apply(self, V: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.rows))
        for k, (kind, vec, rhs) in enumerate(self.rows):
            if kind == "pin":
                val = V[0, 0]
            elif kind == "linear":
                val = V[0] @ vec
            else:
                val = vec @ V @ vec
            out[k] = val - rhs
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        M = np.zeros((self.p, self.p))
        for yk, (kind, vec, _) in zip(y, self.rows):
            if yk == 0.0:
                continue
            if kind == "pin":
                M[0, 0] += yk
            elif kind == "linear":
                M[0] += 0.5 * yk * vec
                M[:, 0] += 0.5 * yk * vec
            else:
                M += yk * np.outer(vec, vec)
        return M

    def objective(self, V: np.ndarray) -> float:
        return float(np.sum(self.C * V))

    def is_feasible_bits(self, w: np.ndarray) -> bool:
        return bool(np.all(np.abs(self.A_eq @ w - self.b_eq) <= 1e-9))

    def lift_point(self, w) -> np.ndarray:
        u = np.concatenate([[1.0], np.asarray(w, dtype=float)])
        return np.outer(u, u)


def lift(model: QcboModel) -> CopositiveProgram:
    """Copositive lift of a linearized model.

    Inequalities ``a.x <= b`` with integer data become ``a.x + s = b`` with a
    bounded-binary slack ``s`` over ``0 .. b - min(a.x)``.
    """
    if not model.is_linearized:
        raise InvalidInputError("lift needs a linearized model")
    n = model.n_vars
    eqs = [(dict(c.expr.lin), c.rhs) for c in model.eq_constraints]
    nxt = n
    for con in model.ineq_constraints:
        lo, hi = con.expr.bounds()
        if hi <= con.rhs + 1e-9:
            continue
        vals = list(con.expr.lin.values()) + [con.rhs]
        if any(abs(v - round(v)) > 1e-9 for v in vals):
            raise InvalidInputError(f"inequality {con.tag} has non-integer data")
        K = int(round(con.rhs - lo))
        row = dict(con.expr.lin)
        for c in bounded_coefficients(K):
            row[nxt] = float(c)
            nxt += 1
        eqs.append((row, con.rhs))
    p = nxt + 1
    C = np.zeros((p, p))
    C[0, 0] = model.objective.const
    for i, c in model.objective.lin.items():
        C[i + 1, i + 1] += c
    for (i, j), c in model.objective.quad.items():
        C[i + 1, j + 1] += c / 2
        C[j + 1, i + 1] += c / 2
    A_eq = np.zeros((len(eqs), p - 1))
    b_eq = np.zeros(len(eqs))
    e0 = np.zeros(p)
    e0[0] = 1.0
    rows = [("pin", e0, 1.0)]
    for k, (row, rhs) in enumerate(eqs):
        for i, c in row.items():
            A_eq[k, i] = c
        b_eq[k] = rhs
        lin = np.concatenate([[0.0], A_eq[k]])
        sq = np.concatenate([[-rhs], A_eq[k]])
        rows.append(("linear", lin, rhs))
        rows.append(("squared", sq, 0.0))
    return CopositiveProgram(p, n, C, rows, A_eq, b_eq, model)


def schedules(t: int, delta: float = 1.0, alpha0: float = 1.0):
    """Step size ``2 / (delta (t + 1))`` and penalty ``alpha0 sqrt(delta t + 1)``."""
    return 2.0 / (delta * (t + 1)), alpha0 * math.sqrt(delta * t + 1)


@dataclass
class QcgdState:
    V: np.ndarray
    z: np.ndarray
    t: int = 1
    alpha0: float = 1.0
    delta: float = 1.0
    trace: list = field(default_factory=list)
    last_w: np.ndarray = None

    @classmethod
    def initial(cls, prog: CopositiveProgram, alpha0: float = 1.0, delta: float = 1.0) -> "QcgdState":
        V = np.zeros((prog.p, prog.p))
        V[0, 0] = 1.0
        return cls(V, np.zeros(len(prog.rows)), 1, alpha0, delta)


def gradient_matrix(state: QcgdState, prog: CopositiveProgram) -> np.ndarray:
    """``G = C + L*(z + alpha_t (L V - v))``."""
    _, alpha = schedules(state.t, state.delta, state.alpha0)
    return prog.C + prog.adjoint(state.z + alpha * prog.apply(state.V))


def gradient_qubo(state: QcgdState, prog: CopositiveProgram) -> QuboInstance:
    """``[1;w]' G [1;w]`` as a QUBO over the ``p - 1`` non-homogenizing bits."""
    G = gradient_matrix(state, prog)
    Q = 2.0 * np.triu(G[1:, 1:], 1)
    Q[np.diag_indices_from(Q)] = np.diag(G)[1:] + 2.0 * G[0, 1:]
    return QuboInstance(Q, G[0, 0])


def qubo_on_lift(q: QuboInstance, V: np.ndarray) -> float:
    """Linear extension of a QUBO to the lift: equals ``q(w)`` at ``V = [1;w][1;w]'``."""
    X = V[1:, 1:]
    return float(q.offset + np.sum(np.triu(q.Q, 1) * X) + np.diag(q.Q) @ V[0, 1:])


def spectral_gap(q: QuboInstance) -> float:
    """Second-lowest minus lowest distinct objective value (``inf`` if constant)."""
    r = brute_force_solve(q)
    return r.second_value - r.value


def lazy_gate(q_prev: QuboInstance, q_new: QuboInstance, gap: float) -> bool:
    """Skip the oracle when the coefficient change is smaller than the gap."""
    diff = np.linalg.norm(q_new.Q - q_prev.Q)
    return bool(diff < gap)


@dataclass
class QcgdConfig:
    T: int = 1000
    delta: float = 1.0
    alpha0: float = 1.0
    p0: float = 0.5
    digits: int | None = None
    lazy: bool = False
    tol: float = 1e-4
    seed: int = 0
    dual_step: str = "gamma_alpha"
    reference: float | None = None

    def validate(self):
        if self.T < 1:
            raise InvalidInputError("T must be >= 1")
        if not (self.delta > 0 and self.alpha0 > 0):
            raise InvalidInputError("delta and alpha0 must be positive")
        if not 0 < self.p0 < 1:
            raise InvalidInputError("p0 must lie in (0, 1)")
        if self.digits is not None and self.digits < 1:
            raise InvalidInputError("digits must be >= 1")
        if self.dual_step not in DUAL_STEPS:
            raise InvalidInputError(f"dual_step must be one of {DUAL_STEPS}")


def _step_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(t)]).generate_state(1, dtype=np.uint32)[0])


def step(state: QcgdState, prog: CopositiveProgram, oracle, m_t: int, *, seed: int = 0,
         digits: int | None = None, dual_step: str = "gamma_alpha", reference: float | None = None,
         gate=None) -> QcgdState:
    """One iteration; returns a new state (the input is not modified).

    ``gate`` is an optional callable ``q -> w or None`` that may return a
    previous direction instead of calling the oracle.
    """
    if m_t < 1:
        raise InvalidInputError("m_t must be >= 1")
    gamma, alpha = schedules(state.t, state.delta, state.alpha0)
    q = gradient_qubo(state, prog)
    if digits is not None:
        q = truncate(q, digits)
    w = gate(q) if gate is not None else None
    skipped = w is not None
    if skipped:
        oracle_best, calls = q.evaluate(w), 0
    else:
        ctx = OracleContext(t=state.t, incumbent=qubo_on_lift(q, state.V))
        smp = best_of(oracle, q, m_t, _step_seed(seed, state.t), ctx)
        w, oracle_best, calls = smp.assignment, smp.objective, smp.meta.get("calls", m_t)
    H = prog.lift_point(w)
    V = (1.0 - gamma) * state.V + gamma * H
    r = prog.apply(V)
    z = state.z + (gamma * alpha if dual_step == "gamma_alpha" else gamma) * r
    obj = prog.objective(V)
    rec = {"t": state.t, "gamma": gamma, "alpha": alpha, "obj_surrogate": obj,
           "obj_gap": abs(obj - reference) if reference is not None else float("nan"),
           "infeasibility": float(np.linalg.norm(r)), "oracle_best": float(oracle_best),
           "samples": int(calls), "skipped": bool(skipped)}
    return QcgdState(V, z, state.t + 1, state.alpha0, state.delta, state.trace + [rec], np.asarray(w))


@dataclass
class Extraction:
    bits: np.ndarray       # original model variables
    lifted: np.ndarray     # all p - 1 coordinates
    feasible: bool
    rule: str


def extract(V: np.ndarray, prog: CopositiveProgram) -> Extraction:
    """Threshold the homogenizing column at 1/2; fall back to the top eigenvector."""
    w = (V[0, 1:] >= 0.5).astype(np.int8)
    if prog.is_feasible_bits(w):
        return Extraction(w[: prog.n_orig], w, True, "column")
    X = V[1:, 1:]
    vals, vecs = np.linalg.eigh((X + X.T) / 2)
    u = vecs[:, -1] * math.sqrt(max(vals[-1], 0.0))
    if u @ V[0, 1:] < 0:
        u = -u
    w2 = (u >= 0.5).astype(np.int8)
    if prog.is_feasible_bits(w2):
        return Extraction(w2[: prog.n_orig], w2, True, "eigen")
    return Extraction(w[: prog.n_orig], w, False, "column")


@dataclass
class QcgdResult:
    solution: np.ndarray
    feasible: bool
    objective: float
    trace: list
    state: QcgdState
    iterations: int
    m_t: int
    reference: float | None


def reference_value(prog: CopositiveProgram, cap: int = 20):
    """Exact optimum of the source model when it is small enough to enumerate."""
    if prog.model is None or prog.model.n_vars > cap:
        return None
    x, v = brute_force_model(prog.model)
    return None if x is None else v


def run(prog: CopositiveProgram, oracle, config: QcgdConfig = QcgdConfig()) -> QcgdResult:
    """Run up to ``T`` iterations, stopping early once both residuals drop below ``tol``.

    ``m_t = ceil(c ln T) + 1`` oracle calls per step. Lazy gating needs an
    exact oracle and an instance small enough for the spectral gap.
    """
    config.validate()
    m_t = samples_per_step(config.p0, config.T)
    ref = config.reference if config.reference is not None else reference_value(prog)
    state = QcgdState.initial(prog, config.alpha0, config.delta)
    lazy = config.lazy
    if lazy and not getattr(oracle, "deterministic", False):
        log.warning("lazy gating needs an exact oracle; disabled")
        lazy = False
    if lazy and prog.p - 1 > BRUTE_FORCE_CAP:
        log.warning("lazy gating disabled: %d variables exceed the brute-force cap", prog.p - 1)
        lazy = False
    memo = {}

    def gate(q):
        if "q" in memo and lazy_gate(memo["q"], q, memo["gap"]):
            return memo["w"]
        memo.update(q=q, gap=spectral_gap(q), w=brute_force_solve(q).assignment)
        return None

    for _ in range(config.T):
        state = step(state, prog, oracle, m_t, seed=config.seed, digits=config.digits,
                     dual_step=config.dual_step, reference=ref, gate=gate if lazy else None)
        rec = state.trace[-1]
        gap_ok = ref is None or rec["obj_gap"] < config.tol
        if config.tol > 0 and rec["infeasibility"] < config.tol and gap_ok:
            break
    ex = extract(state.V, prog)
    obj = prog.model.objective.evaluate(ex.bits) if prog.model is not None else float("nan")
    return QcgdResult(ex.bits, ex.feasible, obj, state.trace, state, len(state.trace), m_t, ref)


def tts_estimate(tau: float, T: int, p0: float) -> float:
    """Total oracle time ``tau * T * m`` with ``m = ceil(c ln T) + 1``."""
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    return tau * T * samples_per_step(p0, T)


def loglog_slope(trace, t_lo: int = 100, t_hi: int = 10_000, window: int = 50) -> float:
    """Least-squares slope of log infeasibility against log t on ``[t_lo, t_hi]``.

    Infeasibility is smoothed with a trailing moving average of ``window``.
    """
    t = np.array([r["t"] for r in trace], dtype=float)
    inf = np.array([r["infeasibility"] for r in trace])
    if window > 1 and len(inf) >= window:
        kern = np.ones(window) / window
        sm = np.convolve(inf, kern, mode="full")[: len(inf)]
        sm[: window - 1] = np.cumsum(inf[: window - 1]) / np.arange(1, window)
        inf = sm
    sel = (t >= t_lo) & (t <= t_hi) & (inf > 0)
    if sel.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(t[sel]), np.log(inf[sel]), 1)[0])


TRACE_COLUMNS = ("t", "gamma", "alpha", "obj_surrogate", "obj_gap", "infeasibility",
                 "oracle_best", "samples", "skipped")


def trace_csv(trace) -> str:
    """Trace as CSV text; floats use ``repr`` so values round-trip exactly."""
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, lineterminator="\n")
    wr.writeheader()
    for rec in trace:
        wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
    return buf.getvalue()


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        fh.write(trace_csv(trace))


def toy_model() -> QcboModel:
    """``min x1 + x2`` subject to ``x1 + x2 == 1`` (optimum 1)."""
    m = QcboModel()
    a = m.add_var(("var", "x1"))
    b = m.add_var(("var", "x2"))
    m.objective = Expr({a: 1.0, b: 1.0})
    m.add_constraint(Expr({a: 1.0, b: 1.0}), "==", 1.0, ("toy",))
    m.meta = {"kind": "toy"}
    return m
