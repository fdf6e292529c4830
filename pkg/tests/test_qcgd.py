import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_qcbo
from fipqnn import qcgd
from fipqnn.errors import InvalidInputError
from fipqnn.qcbo import Expr, QcboModel, all_assignments, linearize_all
from fipqnn.qubo import ExactOracle, QuboInstance, SAOracle, noisy_wrap


@pytest.fixture
def toy():
    return qcgd.lift(qcgd.toy_model())


def single_var_model():
    m = QcboModel()
    a = m.add_var(("var", "x"))
    m.objective = Expr({a: 1.0})
    m.add_constraint(Expr({a: 1.0}), "==", 1.0)
    return m


def ineq_model():
    # min -x0 - 2 x1 + x2 s.t. x0 + x1 + x2 <= 2, x0 - x2 == 0
    m = QcboModel()
    ids = [m.add_var(("var", i)) for i in range(3)]
    m.objective = Expr({0: -1.0, 1: -2.0, 2: 1.0}, {(0, 1): 0.5})
    m.add_constraint(Expr.sum_of(ids), "<=", 2.0)
    m.add_constraint(Expr({0: 1.0, 2: -1.0}), "==", 0.0)
    return m


def slack_completion(prog, x):
    """Slack bits turning every inequality into an equality at ``x``."""
    n = prog.n_orig
    free = prog.p - 1 - n
    for s in itertools.product((0, 1), repeat=free):
        w = np.r_[x, s]
        if prog.is_feasible_bits(w):
            return w
    return None


# lift ------------------------------------------------------------------------------

def test_lift_single_variable():
    prog = qcgd.lift(single_var_model())
    V = prog.lift_point([1])
    assert prog.objective(V) == 1
    assert np.allclose(prog.apply(V), 0)


def test_lift_requires_linearized():
    m = QcboModel()
    a, b = m.add_var(("var", 0)), m.add_var(("var", 1))
    m.add_constraint(Expr({}, {(a, b): 1.0}), "==", 1.0)
    with pytest.raises(InvalidInputError):
        qcgd.lift(m)


def test_lift_feasible_points_satisfy_rows(rng):
    m = ineq_model()
    prog = qcgd.lift(m)
    feas = [x for x in all_assignments(3) if m.is_feasible(x)]
    for _ in range(100):
        x = feas[rng.integers(len(feas))]
        w = slack_completion(prog, x)
        V = prog.lift_point(w)
        assert np.allclose(prog.apply(V), 0, atol=1e-12)
        assert prog.objective(V) == pytest.approx(m.objective.evaluate(x))


def test_lift_objective_identity(rng):
    m = ineq_model()
    prog = qcgd.lift(m)
    for _ in range(50):
        w = rng.integers(0, 2, prog.p - 1)
        assert prog.objective(prog.lift_point(w)) == pytest.approx(m.objective.evaluate(w[:3]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6))
def test_lift_objective_exhaustive(seed, n):
    m = linearize_all(random_qcbo(np.random.default_rng(seed), n), "constraints")
    if m.n_vars > 12:
        return
    prog = qcgd.lift(m)
    X = all_assignments(m.n_vars)
    pad = np.zeros(prog.p - 1 - m.n_vars, dtype=int)
    for x in X:
        assert prog.objective(prog.lift_point(np.r_[x, pad])) == pytest.approx(m.objective.evaluate(x))
        if m.is_feasible(x):
            w = slack_completion(prog, x) if len(pad) <= 10 else None
            if w is not None:
                assert np.allclose(prog.apply(prog.lift_point(w)), 0, atol=1e-9)


def test_infeasible_mixture_is_detected(toy):
    # averaging the two infeasible points satisfies the linear row but not the squared one
    V = 0.5 * toy.lift_point([0, 0]) + 0.5 * toy.lift_point([1, 1])
    r = toy.apply(V)
    kinds = [k for k, _, _ in toy.rows]
    assert abs(r[kinds.index("linear")]) < 1e-12
    assert r[kinds.index("squared")] > 0.5


# schedules and gradient ---------------------------------------------------------------

def test_schedules_examples():
    assert qcgd.schedules(1, 1.0, 1.0) == pytest.approx((1.0, math.sqrt(2)))
    assert qcgd.schedules(3, 1.0, 1.0)[0] == pytest.approx(0.5)
    assert qcgd.schedules(1, 2.0, 1.0) == pytest.approx((0.5, math.sqrt(3)))


def test_gradient_equals_cost_on_feasible_point(toy):
    st_ = qcgd.QcgdState.initial(toy)
    st_.V = toy.lift_point([0, 1])
    assert np.allclose(qcgd.gradient_matrix(st_, toy), toy.C)


def test_gradient_shift_by_hand(toy):
    # V = e0 e0': linear residual -1, squared residual (-1)^2 = 1, alpha_1 = sqrt 2
    st_ = qcgd.QcgdState.initial(toy)
    shift = math.sqrt(2) * np.array([[1.0, -1.5, -1.5], [-1.5, 1.0, 1.0], [-1.5, 1.0, 1.0]])
    G = qcgd.gradient_matrix(st_, toy)
    assert np.allclose(G - toy.C, shift)
    assert np.allclose(G, G.T)


def test_gradient_qubo_matches_quadratic_form(toy, rng):
    st_ = qcgd.QcgdState.initial(toy)
    st_.z = rng.normal(size=len(toy.rows))
    G = qcgd.gradient_matrix(st_, toy)
    q = qcgd.gradient_qubo(st_, toy)
    for w in all_assignments(toy.p - 1):
        u = np.r_[1.0, w]
        assert q.evaluate(w) == pytest.approx(u @ G @ u)
        assert qcgd.qubo_on_lift(q, toy.lift_point(w)) == pytest.approx(q.evaluate(w))


# step ------------------------------------------------------------------------------------

def test_first_step_is_full(toy):
    s1 = qcgd.step(qcgd.QcgdState.initial(toy), toy, ExactOracle(), 1)
    assert np.allclose(s1.V, toy.lift_point(s1.last_w))
    assert s1.t == 2 and len(s1.trace) == 1


def test_step_keeps_entries_in_unit_box(toy):
    s = qcgd.QcgdState.initial(toy)
    o = noisy_wrap(ExactOracle(), 0.5, 1.0, seed=1)
    for _ in range(50):
        s = qcgd.step(s, toy, o, 2)
        assert s.V.min() >= -1e-12 and s.V.max() <= 1 + 1e-12
        assert np.allclose(s.V, s.V.T)


def test_step_leaves_input_state_untouched(toy):
    s0 = qcgd.QcgdState.initial(toy)
    V0 = s0.V.copy()
    qcgd.step(s0, toy, ExactOracle(), 1)
    assert np.array_equal(s0.V, V0) and s0.t == 1 and not s0.trace


def test_step_rejects_zero_samples(toy):
    with pytest.raises(InvalidInputError):
        qcgd.step(qcgd.QcgdState.initial(toy), toy, ExactOracle(), 0)


def test_toy_infeasibility_within_budget(toy):
    res = qcgd.run(toy, ExactOracle(), qcgd.QcgdConfig(T=1000, tol=0))
    inf = [r["infeasibility"] for r in res.trace]
    assert min(inf[1:]) < 1e-2
    assert inf[-1] < 1e-2


# lazy gating -----------------------------------------------------------------------------

def test_lazy_gate_examples():
    q = QuboInstance(np.array([[-1.0, 2.0], [0.0, -1.0]]))
    assert qcgd.lazy_gate(q, q, 0.5)
    assert not qcgd.lazy_gate(q, q, 0.0)
    gap = 1.0
    Q = q.Q.copy()
    Q[0, 1] += gap / math.sqrt(2)
    assert qcgd.lazy_gate(q, QuboInstance(Q), gap)


def test_spectral_gap_examples():
    assert qcgd.spectral_gap(QuboInstance(np.array([[1.0]]))) == 1
    assert qcgd.spectral_gap(QuboInstance(np.array([[-1.0, 2.0], [0.0, -1.0]]))) == 1
    assert math.isinf(qcgd.spectral_gap(QuboInstance.zeros(2)))


def test_lazy_run_matches_plain_run(toy):
    plain = qcgd.run(toy, ExactOracle(), qcgd.QcgdConfig(T=300, tol=0))
    lazy = qcgd.run(toy, ExactOracle(), qcgd.QcgdConfig(T=300, tol=0, lazy=True))
    assert list(lazy.solution) == list(plain.solution)
    assert lazy.trace[-1]["infeasibility"] < 1e-2


def test_lazy_disabled_for_heuristic_oracle(toy, caplog):
    res = qcgd.run(toy, SAOracle(), qcgd.QcgdConfig(T=5, tol=0, lazy=True))
    assert not any(r["skipped"] for r in res.trace)
    assert "disabled" in caplog.text


# run and extraction ----------------------------------------------------------------------

def test_run_toy_reaches_tolerance(toy):
    res = qcgd.run(toy, ExactOracle(), qcgd.QcgdConfig(T=1000, tol=1e-3))
    assert res.feasible and res.objective == 1 and res.reference == 1
    assert res.trace[-1]["infeasibility"] < 1e-3 and res.trace[-1]["obj_gap"] < 1e-3
    assert res.m_t == 21


def test_run_is_seed_deterministic(toy):
    o1 = noisy_wrap(ExactOracle(), 0.8, 0.5, seed=4)
    o2 = noisy_wrap(ExactOracle(), 0.8, 0.5, seed=4)
    a = qcgd.run(toy, o1, qcgd.QcgdConfig(T=200, tol=0, seed=9))
    b = qcgd.run(toy, o2, qcgd.QcgdConfig(T=200, tol=0, seed=9))
    assert qcgd.trace_csv(a.trace) == qcgd.trace_csv(b.trace)


def test_run_with_truncation(toy):
    for d in (1, 3):
        res = qcgd.run(toy, ExactOracle(), qcgd.QcgdConfig(T=1000, digits=d))
        assert res.feasible and res.objective == 1


def test_smoothed_infeasibility_trends_down(toy):
    res = qcgd.run(toy, ExactOracle(), qcgd.QcgdConfig(T=2000, tol=0))
    inf = np.array([r["infeasibility"] for r in res.trace])
    sm = np.convolve(inf, np.ones(50) / 50, mode="valid")
    half = sm[len(sm) // 2:]
    assert np.all(np.diff(half) <= 1e-12)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        qcgd.QcgdConfig(T=0).validate()
    with pytest.raises(InvalidInputError):
        qcgd.QcgdConfig(p0=1.0).validate()
    with pytest.raises(InvalidInputError):
        qcgd.QcgdConfig(dual_step="newton").validate()


def test_extract_examples(toy):
    x = np.array([0, 1])
    assert list(qcgd.extract(toy.lift_point(x), toy).bits) == [0, 1]
    m = ineq_model()
    prog = qcgd.lift(m)
    w = slack_completion(prog, np.array([1, 0, 1]))
    w2 = w.copy()
    w2[1] = 1 - w2[1]
    V = 0.6 * prog.lift_point(w) + 0.4 * prog.lift_point(w2)
    assert list(qcgd.extract(V, prog).bits) == [1, 0, 1]
    free = QcboModel()
    for i in range(2):
        free.add_var(("var", i))
    fprog = qcgd.lift(free)
    half = np.full((3, 3), 0.5)
    half[0, 0] = 1.0
    ex = qcgd.extract(half, fprog)
    assert list(ex.bits) == [1, 1] and ex.rule == "column"


def test_tts_examples():
    assert qcgd.tts_estimate(1e-3, 100, 0.5) == pytest.approx(1.5)
    assert qcgd.tts_estimate(1e-3, 1, 0.5) == pytest.approx(1e-3)
    assert qcgd.tts_estimate(2e-3, 100, 0.5) == pytest.approx(2 * qcgd.tts_estimate(1e-3, 100, 0.5))


def test_trace_csv_schema(toy, tmp_path):
    res = qcgd.run(toy, ExactOracle(), qcgd.QcgdConfig(T=20, tol=0))
    path = tmp_path / "trace.csv"
    qcgd.write_trace_csv(res.trace, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(qcgd.TRACE_COLUMNS)
    assert len(lines) == 21
    first = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert float(first["infeasibility"]) == res.trace[0]["infeasibility"]
