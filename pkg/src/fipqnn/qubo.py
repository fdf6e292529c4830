"""QUBO and Ising instances, exact and annealing oracles, noisy oracle wrapper.

Objective convention: ``f(x) = sum_i Q_ii x_i + sum_{i<j} Q_ij x_i x_j + offset``
with ``Q`` stored upper triangular.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import InvalidInputError, SizeLimitError

BRUTE_FORCE_CAP = 26
ENUMERATE_CAP = 22


@dataclass
class QuboInstance:
    Q: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InvalidInputError("Q must be square")
        # fold any lower-triangular mass into the upper triangle
        self.Q = np.triu(Q) + np.triu(Q.T, 1)
        self.offset = float(self.offset)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "QuboInstance":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_expr(cls, expr, n: int | None = None) -> "QuboInstance":
        """Instance from a :class:`fipqnn.qcbo.Expr` of degree <= 2."""
        n = expr.max_var() + 1 if n is None else n
        Q = np.zeros((n, n))
        for i, c in expr.lin.items():
            Q[i, i] += c
        for (i, j), c in expr.quad.items():
            Q[i, j] += c
        return cls(Q, expr.const)

    def coupling(self) -> np.ndarray:
        """Symmetric pair coefficients with zero diagonal."""
        U = np.triu(self.Q, 1)
        return U + U.T

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x + self.offset)

    def evaluate_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("ij,jk,ik->i", X, self.Q, X) + self.offset

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.Q))) if self.Q.size else 0.0

    def to_json(self) -> dict:
        iu = np.nonzero(self.Q)
        return {"n": self.n, "offset": self.offset,
                "terms": [[int(i), int(j), float(self.Q[i, j])] for i, j in zip(*iu)]}

    @classmethod
    def from_json(cls, d: dict) -> "QuboInstance":
        Q = np.zeros((d["n"], d["n"]))
        for i, j, c in d["terms"]:
            Q[i, j] = c
        return cls(Q, d["offset"])

    def to_text(self) -> str:
        lines = [f"p qubo {self.n} {self.offset!r}"]
        for i, j in zip(*np.nonzero(self.Q)):
            lines.append(f"{i} {j} {float(self.Q[i, j])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QuboInstance":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("c")]
        head = rows[0]
        if head[:2] != ["p", "qubo"]:
            raise InvalidInputError("missing 'p qubo' header")
        n, offset = int(head[2]), float(head[3])
        Q = np.zeros((n, n))
        for i, j, c in rows[1:]:
            i, j = int(i), int(j)
            if i > j:
                raise InvalidInputError("terms must satisfy i <= j")
            Q[i, j] = float(c)
        return cls(Q, offset)

    def write(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path) -> "QuboInstance":
        return cls.from_text(Path(path).read_text())


@dataclass
class IsingInstance:
    """``E(s) = -sum_{i<j} J_ij s_i s_j - sum_i h_i s_i + constant``, ``s`` in {-1,+1}.

    ``J`` may be given as a matrix or a ``{(i, j): value}`` map; it is stored
    as a strictly upper-triangular matrix.
    """

    J: np.ndarray
    h: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if isinstance(self.J, dict):
            # pair map {(i, j): J_ij}
            J = np.zeros((len(self.h), len(self.h)))
            for (i, j), c in self.J.items():
                if i == j:
                    raise InvalidInputError("couplings need distinct spins")
                J[min(i, j), max(i, j)] += c
        else:
            J = np.asarray(self.J, dtype=float)
        if J.shape != (len(self.h), len(self.h)):
            raise InvalidInputError(f"J has shape {J.shape} for {len(self.h)} spins")
        self.J = np.triu(J, 1) + np.triu(J.T, 1)
        self.constant = float(self.constant)

    @property
    def n(self) -> int:
        return len(self.h)

    def energy(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return float(-s @ self.J @ s - self.h @ s + self.constant)

    def energy_many(self, S) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        return -np.einsum("ij,jk,ik->i", S, self.J, S) - S @ self.h + self.constant


def qubo_to_ising(q: QuboInstance) -> IsingInstance:
    """Substitute ``x = (1 + s) / 2``."""
    d = np.diag(q.Q).copy()
    U = np.triu(q.Q, 1)
    J = -U / 4.0
    h = -(d / 2.0 + (U.sum(axis=1) + U.sum(axis=0)) / 4.0)
    const = q.offset + d.sum() / 2.0 + U.sum() / 4.0
    return IsingInstance(J, h, const)


def ising_to_qubo(m: IsingInstance) -> QuboInstance:
    """Substitute ``s = 2x - 1``."""
    J = np.triu(m.J, 1)
    Q = -4.0 * J
    rowsum = J.sum(axis=1) + J.sum(axis=0)
    Q[np.diag_indices_from(Q)] = 2.0 * rowsum - 2.0 * m.h
    offset = m.constant - J.sum() + m.h.sum()
    return QuboInstance(Q, offset)


# exhaustive search -------------------------------------------------------

@numba.njit(cache=True)
def _exact_value(diag, U, offset, x):
    v = offset
    n = x.shape[0]
    for i in range(n):
        if x[i]:
            v += diag[i]
            for j in range(i + 1, n):
                if x[j]:
                    v += U[i, j]
    return v


@numba.njit(cache=True)
def _gray_enumerate(diag, U, offset, tol, store):
    """Walk all assignments in Gray order.

    Bit position ``p`` of the integer code holds variable ``n-1-p`` so that
    smaller codes are lexicographically smaller vectors. Returns best and
    second-best (distinct value) codes; fills ``store[code]`` when
    ``store`` is non-empty.
    """
    n = diag.shape[0]
    x = np.zeros(n, dtype=np.int8)
    fld = diag.copy()
    val = offset
    code = 0
    best, best_code = val, 0
    second, second_code = np.inf, -1
    keep = store.shape[0] > 0
    if keep:
        store[0] = val
    total = 1 << n
    for k in range(1, total):
        tz = 0
        while not (k >> tz) & 1:
            tz += 1
        i = n - 1 - tz
        if x[i]:
            val -= fld[i]
            x[i] = 0
            for j in range(n):
                fld[j] -= U[j, i]
        else:
            val += fld[i]
            x[i] = 1
            for j in range(n):
                fld[j] += U[j, i]
        code ^= 1 << tz
        if (k & 4095) == 0:
            val = _exact_value(diag, U, offset, x)
        if keep:
            store[code] = val
        if val < best - tol:
            second, second_code = best, best_code
            best, best_code = val, code
        elif val <= best + tol:
            if code < best_code:
                best_code = code
        elif val < second - tol:
            second, second_code = val, code
        elif val <= second + tol and code < second_code:
            second_code = code
    return best_code, second_code


def _code_to_bits(code: int, n: int) -> np.ndarray:
    return np.array([(code >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.int8)


def _tol(q: QuboInstance) -> float:
    return 1e-9 * (1.0 + float(np.abs(q.Q).sum()) + abs(q.offset))


@dataclass
class BruteForceResult:
    assignment: np.ndarray
    value: float
    second_value: float


def brute_force_solve(q: QuboInstance, cap: int = BRUTE_FORCE_CAP) -> BruteForceResult:
    """Global minimum with lexicographic tie-break and the second-best distinct value.

    The second-best value is ``inf`` when every assignment has the same value.
    """
    if q.n > cap:
        raise SizeLimitError(f"n={q.n} exceeds brute-force cap {cap}")
    if q.n == 0:
        return BruteForceResult(np.zeros(0, dtype=np.int8), q.offset, math.inf)
    diag = np.ascontiguousarray(np.diag(q.Q))
    U = np.ascontiguousarray(q.coupling())
    bc, sc = _gray_enumerate(diag, U, q.offset, _tol(q), np.zeros(0))
    x = _code_to_bits(bc, q.n)
    second = math.inf if sc < 0 else q.evaluate(_code_to_bits(sc, q.n))
    return BruteForceResult(x, q.evaluate(x), second)


def enumerate_values(q: QuboInstance, cap: int = ENUMERATE_CAP) -> np.ndarray:
    """Objective of every assignment, indexed by code (x_0 most significant)."""
    if q.n > cap:
        raise SizeLimitError(f"n={q.n} exceeds enumeration cap {cap}")
    store = np.empty(1 << q.n)
    diag = np.ascontiguousarray(np.diag(q.Q))
    _gray_enumerate(diag, np.ascontiguousarray(q.coupling()), q.offset, _tol(q), store)
    return store


# oracles -----------------------------------------------------------------

@dataclass
class OracleSample:
    assignment: np.ndarray
    objective: float
    meta: dict = field(default_factory=dict)


@dataclass
class OracleContext:
    """Information a QCGD step passes to an oracle (used by inexact oracles)."""

    t: int = 1
    incumbent: float | None = None


class ExactOracle:
    deterministic = True
    name = "exact"

    def __init__(self, cap: int = BRUTE_FORCE_CAP):
        self.cap = cap

    def __call__(self, q: QuboInstance, seed: int = 0, ctx: OracleContext | None = None) -> OracleSample:
        r = brute_force_solve(q, self.cap)
        return OracleSample(r.assignment, r.value, {"oracle": self.name, "seed": int(seed)})


@dataclass(frozen=True)
class SASchedule:
    """Geometric cooling schedule; ``None`` fields take instance-dependent defaults."""

    T_init: float | None = None
    T_final: float = 1e-3
    sweeps: int | None = None

    def resolve(self, q: QuboInstance):
        T0 = self.T_init if self.T_init is not None else max(q.max_abs(), 2 * self.T_final)
        sweeps = self.sweeps if self.sweeps is not None else 100 * max(q.n, 1)
        if not (T0 > self.T_final > 0) or sweeps < 1:
            raise InvalidInputError(f"invalid schedule T_init={T0}, T_final={self.T_final}, sweeps={sweeps}")
        return float(T0), float(self.T_final), int(sweeps)


def _csr(U: np.ndarray):
    nz = U != 0
    indptr = np.concatenate([[0], np.cumsum(nz.sum(axis=1))]).astype(np.int64)
    cols = np.nonzero(nz)
    return indptr, cols[1].astype(np.int64), U[cols].astype(np.float64)


@numba.njit(cache=True)
def _sa_kernel(diag, indptr, indices, data, T0, T1, sweeps, seed):
    np.random.seed(seed)
    n = diag.shape[0]
    x = np.zeros(n, dtype=np.int8)
    for i in range(n):
        x[i] = 1 if np.random.random() < 0.5 else 0
    fld = diag.copy()
    for i in range(n):
        if x[i]:
            for p in range(indptr[i], indptr[i + 1]):
                fld[indices[p]] += data[p]
    e = 0.0
    for i in range(n):
        if x[i]:
            e += diag[i] + 0.5 * (fld[i] - diag[i])
    best_e = e
    best_x = x.copy()
    ratio = (T1 / T0) ** (1.0 / (sweeps - 1)) if sweeps > 1 else 1.0
    T = T0
    for s in range(sweeps):
        for i in range(n):
            d = fld[i] if x[i] == 0 else -fld[i]
            if d <= 0.0 or np.random.random() < math.exp(-d / T):
                sgn = 1.0 if x[i] == 0 else -1.0
                x[i] = 1 - x[i]
                e += d
                for p in range(indptr[i], indptr[i + 1]):
                    fld[indices[p]] += sgn * data[p]
        if e < best_e:
            best_e = e
            best_x[:] = x
        T *= ratio
    # zero-temperature polish of the final state
    improved = True
    while improved:
        improved = False
        for i in range(n):
            d = fld[i] if x[i] == 0 else -fld[i]
            if d < 0.0:
                sgn = 1.0 if x[i] == 0 else -1.0
                x[i] = 1 - x[i]
                e += d
                improved = True
                for p in range(indptr[i], indptr[i + 1]):
                    fld[indices[p]] += sgn * data[p]
    if e < best_e:
        best_x[:] = x
    return best_x


def sa_solve(q: QuboInstance, schedule: SASchedule = SASchedule(), seed: int = 0) -> OracleSample:
    """Single-flip Metropolis annealing; returns the best state seen, re-evaluated exactly."""
    T0, T1, sweeps = schedule.resolve(q)
    if q.n == 0:
        return OracleSample(np.zeros(0, dtype=np.int8), q.offset, {"oracle": "sa", "seed": int(seed)})
    indptr, indices, data = _csr(q.coupling())
    x = _sa_kernel(np.ascontiguousarray(np.diag(q.Q)), indptr, indices, data,
                   T0, T1, sweeps, int(seed) % (2 ** 32))
    return OracleSample(x, q.evaluate(x), {"oracle": "sa", "seed": int(seed), "sweeps": sweeps,
                                           "T_init": T0, "T_final": T1})


class SAOracle:
    deterministic = False
    name = "sa"

    def __init__(self, schedule: SASchedule = SASchedule()):
        self.schedule = schedule

    def __call__(self, q: QuboInstance, seed: int = 0, ctx: OracleContext | None = None) -> OracleSample:
        return sa_solve(q, self.schedule, seed)


def derive_seeds(seed: int, m: int) -> list[int]:
    """``[seed]`` followed by ``m-1`` seeds drawn from a SeedSequence of ``seed``."""
    extra = np.random.SeedSequence(int(seed)).generate_state(max(m - 1, 0), dtype=np.uint32)
    return [int(seed)] + [int(s) for s in extra]


def best_of(oracle, q: QuboInstance, m: int, seed: int = 0, ctx: OracleContext | None = None) -> OracleSample:
    """Best of ``m`` oracle calls by (objective, lexicographic assignment).

    Deterministic oracles are called once since repeated calls agree.
    """
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    calls = 1 if getattr(oracle, "deterministic", False) else m
    best = None
    for s in derive_seeds(seed, calls):
        smp = oracle(q, s, ctx)
        if best is None or (smp.objective, tuple(smp.assignment)) < (best.objective, tuple(best.assignment)):
            best = smp
    best.meta = dict(best.meta, calls=calls)
    return best


def samples_per_step(p0: float, T: int) -> int:
    """``ceil(c ln T) + 1`` with ``c = 2 / (-ln(1 - p0))``."""
    if not 0 < p0 < 1:
        raise InvalidInputError("p0 must lie in (0, 1)")
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    c = 2.0 / (-math.log1p(-p0))
    return math.ceil(c * math.log(T)) + 1


class NoisyOracle:
    """Exact oracle degraded to a (delta, eps)-inexact one.

    Each call draws ``xi ~ Exponential(mean eps)`` and returns an assignment
    chosen uniformly among those whose objective is within
    ``(1 - delta) * max(incumbent - f*, 0) + xi / sqrt(t)`` of the optimum
    ``f*``. With ``delta = 1`` and ``eps = 0`` this is the exact oracle and
    consumes no randomness.
    """

    deterministic = False
    name = "noisy"

    def __init__(self, delta: float, eps: float, seed: int = 0, cap: int = ENUMERATE_CAP):
        if not 0 < delta <= 1:
            raise InvalidInputError("delta must lie in (0, 1]")
        if eps < 0:
            raise InvalidInputError("eps must be >= 0")
        self.delta, self.eps, self.cap = float(delta), float(eps), cap
        self.rng = np.random.default_rng(seed)
        self.deterministic = self.delta == 1.0 and self.eps == 0.0

    def allowed_gap(self, f_star: float, ctx: OracleContext | None):
        t = 1 if ctx is None else max(int(ctx.t), 1)
        inc = f_star if ctx is None or ctx.incumbent is None else ctx.incumbent
        xi = self.rng.exponential(self.eps) if self.eps > 0 else 0.0
        return (1.0 - self.delta) * max(inc - f_star, 0.0) + xi / math.sqrt(t)

    def __call__(self, q: QuboInstance, seed: int = 0, ctx: OracleContext | None = None) -> OracleSample:
        if self.deterministic:
            r = brute_force_solve(q, self.cap)
            return OracleSample(r.assignment, r.value, {"oracle": self.name, "seed": int(seed)})
        vals = enumerate_values(q, self.cap)
        f_star = float(vals.min())
        gap = self.allowed_gap(f_star, ctx)
        tol = _tol(q)
        if gap <= tol:
            code = int(np.flatnonzero(vals <= f_star + tol)[0])
        else:
            cand = np.flatnonzero(vals <= f_star + gap)
            code = int(cand[self.rng.integers(len(cand))])
        x = _code_to_bits(code, q.n)
        return OracleSample(x, q.evaluate(x), {"oracle": self.name, "seed": int(seed), "allowed_gap": gap})


def noisy_wrap(oracle, delta: float, eps: float, seed: int = 0) -> NoisyOracle:
    """Inexact oracle built on exhaustive enumeration.

    ``oracle`` must be exact (its answers are recomputed by enumeration).
    """
    if not getattr(oracle, "deterministic", False):
        raise InvalidInputError("noisy_wrap needs an exact oracle")
    return NoisyOracle(delta, eps, seed, getattr(oracle, "cap", ENUMERATE_CAP))


# truncation --------------------------------------------------------------

def round_half_away(a, d: int):
    a = np.asarray(a, dtype=float)
    s = 10.0 ** d
    return np.sign(a) * np.floor(np.abs(a) * s + 0.5) / s


def truncate(q: QuboInstance, d: int) -> QuboInstance:
    """Round every coefficient and the offset to ``d`` decimals, half away from zero."""
    if d < 1:
        raise InvalidInputError("d must be >= 1")
    return QuboInstance(round_half_away(q.Q, d), float(round_half_away(q.offset, d)))


def truncation_bound(n: int, d: int) -> float:
    """Worst-case ``|f(x) - f_d(x)|``: (number of coefficients + offset) * 10**-d / 2."""
    return ((n * n + n) / 2 + 1) * 10.0 ** (-d) / 2
