import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fipqnn.errors import InvalidInputError, SizeLimitError
from fipqnn.qcbo import all_assignments
from fipqnn.qubo import (ExactOracle, IsingInstance, OracleContext, QuboInstance, SAOracle, SASchedule,
                         best_of, brute_force_solve, enumerate_values, ising_to_qubo, noisy_wrap,
                         qubo_to_ising, sa_solve, samples_per_step, truncate, truncation_bound)


def random_qubo(rng, n, scale=1.0):
    return QuboInstance(np.triu(rng.normal(0, scale, (n, n))), float(rng.normal()))


def spins(n):
    return 2 * all_assignments(n).astype(float) - 1


# representations --------------------------------------------------------------

def test_ising_single_field_example():
    m = IsingInstance({}, np.array([1.0]), 0.0)
    assert m.energy([1]) == -1
    assert m.energy([-1]) == 1
    q = ising_to_qubo(m)
    assert q.evaluate([1]) == -1
    assert q.evaluate([0]) == 1


def test_zero_instance_maps_to_zero():
    m = qubo_to_ising(QuboInstance.zeros(3))
    assert not m.J.any() and not m.h.any() and m.constant == 0
    q = ising_to_qubo(m)
    assert not q.Q.any() and q.offset == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 10))
def test_ising_qubo_pointwise(seed, n):
    q = random_qubo(np.random.default_rng(seed), n)
    m = qubo_to_ising(q)
    X = all_assignments(n)
    assert np.allclose(m.energy_many(2 * X.astype(float) - 1), q.evaluate_many(X))
    q2 = ising_to_qubo(m)
    assert np.allclose(q2.evaluate_many(X), q.evaluate_many(X))


def test_qubo_text_round_trip_is_exact(rng):
    q = random_qubo(rng, 7)
    q2 = QuboInstance.from_text(q.to_text())
    assert np.array_equal(q.Q, q2.Q) and q.offset == q2.offset
    assert q2.to_text() == q.to_text()
    q3 = QuboInstance.from_json(q.to_json())
    assert np.array_equal(q.Q, q3.Q)


def test_qubo_text_rejects_lower_triangle():
    with pytest.raises(InvalidInputError):
        QuboInstance.from_text("p qubo 2 0.0\n1 0 1.0\n")


# exact oracle -------------------------------------------------------------------

def test_brute_force_examples():
    r = brute_force_solve(QuboInstance(np.array([[-1.0, 2.0], [0.0, -1.0]])))
    assert list(r.assignment) == [0, 1] and r.value == -1 and r.second_value == 0
    r = brute_force_solve(QuboInstance.zeros(3))
    assert list(r.assignment) == [0, 0, 0] and r.value == 0 and math.isinf(r.second_value)
    r = brute_force_solve(QuboInstance(np.eye(3)))
    assert list(r.assignment) == [0, 0, 0] and r.value == 0 and r.second_value == 1


def test_brute_force_cap():
    with pytest.raises(SizeLimitError):
        brute_force_solve(QuboInstance.zeros(5), cap=4)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 10))
def test_brute_force_matches_enumeration(seed, n):
    rng = np.random.default_rng(seed)
    q = QuboInstance(np.triu(rng.integers(-3, 4, (n, n))).astype(float))
    X = all_assignments(n)
    v = q.evaluate_many(X)
    r = brute_force_solve(q)
    assert r.value == v.min()
    assert list(r.assignment) == list(X[np.flatnonzero(v == v.min())[0]])
    distinct = np.unique(v)
    assert r.second_value == (distinct[1] if len(distinct) > 1 else math.inf)
    assert r.second_value > r.value
    assert np.allclose(enumerate_values(q), v)


# annealing ------------------------------------------------------------------------

def test_sa_single_variable():
    q = QuboInstance(np.array([[-1.0]]))
    for s in range(5):
        assert list(sa_solve(q, SASchedule(sweeps=10), s).assignment) == [1]


def test_sa_is_deterministic(rng):
    q = random_qubo(rng, 12)
    a, b = sa_solve(q, seed=7), sa_solve(q, seed=7)
    assert np.array_equal(a.assignment, b.assignment) and a.objective == b.objective
    assert a.objective == q.evaluate(a.assignment)


def test_sa_invalid_schedule():
    q = QuboInstance(np.eye(2))
    with pytest.raises(InvalidInputError):
        sa_solve(q, SASchedule(1.0, 2.0, 10))
    with pytest.raises(InvalidInputError):
        sa_solve(q, SASchedule(1.0, 1e-3, 0))


def test_sa_default_schedule_calibration():
    rng = np.random.default_rng(0)
    hits = total = 0
    for _ in range(10):
        q = random_qubo(rng, 10)
        opt = brute_force_solve(q).value
        for s in range(10):
            smp = sa_solve(q, seed=s)
            assert smp.objective >= opt - 1e-9
            hits += abs(smp.objective - opt) < 1e-9
            total += 1
    assert hits / total >= 0.9


def test_best_of_examples(rng):
    q = random_qubo(rng, 10)
    o = SAOracle(SASchedule(sweeps=5))
    one = best_of(o, q, 1, seed=3)
    assert np.array_equal(one.assignment, o(q, 3).assignment)
    assert best_of(o, q, 8, seed=3).objective <= one.objective
    with pytest.raises(InvalidInputError):
        best_of(o, q, 0)


def test_best_of_miss_rate_matches_geometric_law():
    # a weak schedule gives a per-call success rate p0 well inside (0, 1)
    rng = np.random.default_rng(5)
    q = random_qubo(rng, 16)
    opt = brute_force_solve(q).value
    o = SAOracle(SASchedule(sweeps=2))
    single = np.mean([abs(o(q, s).objective - opt) < 1e-9 for s in range(400)])
    assert 0.05 < single < 0.95
    m = 3
    miss = np.mean([abs(best_of(o, q, m, seed=1000 + s).objective - opt) > 1e-9 for s in range(300)])
    expect = (1 - single) ** m
    se = math.sqrt(expect * (1 - expect) / 300) + 0.03
    assert abs(miss - expect) < 3 * se


def test_samples_per_step_example():
    assert samples_per_step(0.5, 100) == 15
    assert samples_per_step(0.5, 1) == 1
    with pytest.raises(InvalidInputError):
        samples_per_step(1.0, 10)


# noisy oracle ---------------------------------------------------------------------

def test_noisy_exact_limit(rng):
    q = random_qubo(rng, 8)
    o = noisy_wrap(ExactOracle(), 1.0, 0.0)
    assert o.deterministic
    assert np.array_equal(o(q).assignment, brute_force_solve(q).assignment)


def test_noisy_requires_exact_base():
    with pytest.raises(InvalidInputError):
        noisy_wrap(SAOracle(), 0.5, 0.1)
    with pytest.raises(InvalidInputError):
        noisy_wrap(ExactOracle(), 0.0, 0.1)


def test_noisy_additive_term_decays():
    o = noisy_wrap(ExactOracle(), 1.0, 0.5, seed=0)
    early = np.mean([o.allowed_gap(0.0, OracleContext(t=1)) for _ in range(2000)])
    late = np.mean([o.allowed_gap(0.0, OracleContext(t=10_000)) for _ in range(2000)])
    assert late < early / 50


def test_noisy_gap_contract_monte_carlo():
    rng = np.random.default_rng(11)
    q = random_qubo(rng, 8)
    vals = enumerate_values(q)
    f_star = vals.min()
    delta, eps, t, inc = 0.8, 0.5, 4, f_star + 1.0
    o = noisy_wrap(ExactOracle(), delta, eps, seed=2)
    gaps = np.array([o(q, ctx=OracleContext(t=t, incumbent=inc)).objective - f_star for _ in range(1000)])
    bound = (1 - delta) * (inc - f_star) + eps / math.sqrt(t)
    assert gaps.min() >= -1e-9
    assert gaps.mean() <= bound + 2 * gaps.std(ddof=1) / math.sqrt(len(gaps))


# truncation -------------------------------------------------------------------------

def test_truncate_examples():
    q = truncate(QuboInstance(np.array([[0.123456, -0.125], [0.0, 0.5]])), 2)
    assert q.Q[0, 0] == 0.12
    assert q.Q[0, 1] == -0.13
    with pytest.raises(InvalidInputError):
        truncate(q, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 10), st.integers(1, 6))
def test_truncation_bound_exhaustive(seed, n, d):
    q = random_qubo(np.random.default_rng(seed), n, scale=3.0)
    X = all_assignments(n)
    err = np.abs(q.evaluate_many(X) - truncate(q, d).evaluate_many(X)).max()
    assert err <= truncation_bound(n, d) + 1e-12
