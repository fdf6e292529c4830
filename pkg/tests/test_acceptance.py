"""End-to-end acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line (echoed in the terminal summary)
before asserting, so a failing criterion still reports what it measured.
"""
import copy
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, BPS, DATA_DIR, reference_spec, random_qcbo
from fipqnn import cli, dataio, qcgd
from fipqnn.pwl import build_midpoint_constant, segment_count_for_error, sigmoid, sup_error
from fipqnn.qcbo import (QcboModel, all_assignments, brute_force_model, build_fip_model, feasible_completion,
                         interval_ineq_to_penalty, linearize_all, linearize_product, parameters_from_bits,
                         rosenberg_reduce)
from fipqnn.qnet import QuantNet, TrainConfig, accuracy, binaryconnect_train, resource_report, ste_train
from fipqnn.qubo import (ExactOracle, QuboInstance, SASchedule, derive_seeds, noisy_wrap, qubo_to_ising,
                         sa_solve, truncate, truncation_bound)


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# 1 ------------------------------------------------------------------------------

def test_criterion_01_linearization_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    bad = 0
    for k in range(200):
        n = int(rng.integers(2, 13))
        m = random_qcbo(rng, n)
        x, v = brute_force_model(m)
        for strategy in ("constraints", "rosenberg"):
            xl, vl = brute_force_model(linearize_all(m, strategy))
            if x is None:
                bad += xl is not None
            else:
                bad += not (xl is not None and vl == v and np.array_equal(xl[:n], x))
    dt = time.perf_counter() - t0
    record(1, bad == 0 and dt < 60, f"200 instances x 2 strategies, {bad} mismatches, {dt:.1f}s")


# 2 ------------------------------------------------------------------------------

def test_criterion_02_product_gadgets():
    m = QcboModel()
    a, b = m.add_var(("var", 0)), m.add_var(("var", 1))
    _, pen = rosenberg_reduce(m, a, b)
    zero_set = {x for x in itertools.product((0, 1), repeat=3) if pen.evaluate(x) == 0}
    m2 = QcboModel()
    a, b = m2.add_var(("var", 0)), m2.add_var(("var", 1))
    _, cons = linearize_product(m2, a, b)
    feas = {x for x in itertools.product((0, 1), repeat=3) if all(c.satisfied(x) for c in cons)}
    target = {(x1, x2, x1 * x2) for x1, x2 in itertools.product((0, 1), repeat=2)}
    record(2, zero_set == target and feas == target, f"penalty zero set {sorted(zero_set)}, feasible {sorted(feas)}")


# 3 ------------------------------------------------------------------------------

def classical_forward(spec, X, W, B):
    act = spec.effective_activation()
    a = np.asarray(X, dtype=float)
    for w, b in zip(W, B):
        a = act(a @ np.asarray(w, dtype=float).T + b)
    return a


def test_criterion_03_fip_consistency():
    t0 = time.perf_counter()
    spec = reference_spec()
    rng = np.random.default_rng(7)
    X = np.array([[1, 0, -1], [-1, -1, 1], [0, 1, 1], [1, 1, 0]])
    y = np.array([1, 0, 1, 0])
    models = [linearize_all(build_fip_model(spec, X, y, encoding=e), s)
              for e in ("inequality", "compact") for s in ("constraints", "rosenberg")]
    act = spec.effective_activation()
    bad = 0
    for _ in range(50):
        W = [rng.choice([-1, 1], (2, 3)), rng.choice([-1, 1], (1, 2))]
        B = [rng.choice([-1, 1], 2), rng.choice([-1, 1], 1)]
        ref = classical_forward(spec, X, W, B)[:, 0]
        for m in models:
            x = feasible_completion(m, X, W, B)
            W2, B2 = parameters_from_bits(m, x)
            tags = m.registry.tags
            beta = {tags[i][1:-1]: tags[i][-1] for i in np.flatnonzero(x) if tags[i][0] == "beta_output"}
            out = np.array([act.values[beta[(s, 0)] - 1] for s in range(len(X))])
            ok = (m.is_feasible(x) and all(np.array_equal(p, q) for p, q in zip(W + B, W2 + B2))
                  and np.array_equal(out, ref))
            bad += not ok
    dt = time.perf_counter() - t0
    record(3, bad == 0 and dt < 60, f"50 weight draws x 4 model variants, {bad} mismatches, {dt:.1f}s")


# 4 ------------------------------------------------------------------------------

def test_criterion_04_midpoint_penalty():
    m = QcboModel()
    beta = [m.add_var(("beta_output", 0, 0, i)) for i in range(4)]
    onehot = np.eye(4, dtype=int)
    rng = np.random.default_rng(4)
    wrong = 0
    for h in rng.uniform(-8, 8, 100):
        pen = interval_ineq_to_penalty(m, beta, BPS, float(h), mode="midpoint", slack_bits=0)
        vals = [pen.evaluate(r) for r in onehot]
        want = int(np.searchsorted(BPS, h, side="right"))     # 1-based interval holding h
        wrong += int(np.argmin(vals)) + 1 != want
    ties = []
    for k, h in enumerate(BPS[1:-1], start=1):
        pen = interval_ineq_to_penalty(m, beta, BPS, float(h), mode="midpoint", slack_bits=0)
        vals = [pen.evaluate(r) for r in onehot]
        ties.append(vals[k - 1] == vals[k] == 0.25 == min(vals))
    record(4, wrong == 0 and all(ties), f"{wrong}/100 wrong intervals, boundary ties at 1/4: {ties}")


# 5 ------------------------------------------------------------------------------

def test_criterion_05_approximation_bounds():
    err = sup_error(sigmoid, build_midpoint_constant(sigmoid, BPS))
    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(100):
        R, M2, eps = rng.uniform(0.1, 20), rng.uniform(0, 1), 10 ** rng.uniform(-4, 0)
        n = segment_count_for_error(R, M2, eps)
        ok = R * R * M2 / (2 * n * n) <= eps and (n == 1 or R * R * M2 / (2 * (n - 1) ** 2) > eps)
        bad += not ok
    record(5, err <= 0.5 and bad == 0, f"sup error {err:.4f} (bound 0.5), {bad}/100 segment-count violations")


# 6-8 ------------------------------------------------------------------------------

def toy_run(oracle, **kw):
    cfg = qcgd.QcgdConfig(**{"T": 10_000, "tol": 0.0, **kw})
    return qcgd.run(qcgd.lift(qcgd.toy_model()), oracle, cfg)


def test_criterion_06_qcgd_convergence():
    t0 = time.perf_counter()
    res = toy_run(ExactOracle())
    last = res.trace[-1]
    slope = qcgd.loglog_slope(res.trace, 100, 10_000)
    first_ok = next((r["t"] for r in res.trace if r["infeasibility"] < 1e-3 and abs(r["obj_gap"]) < 1e-3), None)
    dt = time.perf_counter() - t0
    ok = last["infeasibility"] < 1e-3 and abs(last["obj_gap"]) < 1e-3 and -0.8 <= slope <= -0.3 and dt < 300
    record(6, ok, f"final infeasibility {last['infeasibility']:.2e}, objective gap {abs(last['obj_gap']):.2e}, "
                  f"log-log slope {slope:.2f} (target [-0.8, -0.3]), both below 1e-3 from t={first_ok}, {dt:.1f}s")


def test_criterion_07_truncation_robustness():
    t0 = time.perf_counter()
    sols, iters = [], []
    for d in range(1, 11):
        res = qcgd.run(qcgd.lift(qcgd.toy_model()), ExactOracle(), qcgd.QcgdConfig(T=1000, digits=d))
        sols.append(tuple(int(v) for v in res.solution))
        iters.append(res.iterations)
    dt = time.perf_counter() - t0
    ok = len(set(sols)) == 1 and dt < 1800
    record(7, ok, f"solutions {sorted(set(sols))}, iterations for d=1..10: {iters}, {dt:.1f}s")


def test_criterion_08_inexact_oracle():
    t0 = time.perf_counter()
    noisy = toy_run(noisy_wrap(ExactOracle(), 0.8, 0.5, seed=0), T=2000)
    exact = toy_run(ExactOracle(), T=2000)
    limit = toy_run(noisy_wrap(ExactOracle(), 1.0, 0.0, seed=0), T=2000)
    same = qcgd.trace_csv(limit.trace) == qcgd.trace_csv(exact.trace)
    inf = noisy.trace[-1]["infeasibility"]
    dt = time.perf_counter() - t0
    record(8, inf < 1e-2 and same and dt < 600,
           f"noisy final infeasibility {inf:.2e}, exact-limit trace identical: {same}, {dt:.1f}s")


# 9 ------------------------------------------------------------------------------

def test_criterion_09_ising_equivalence():
    rng = np.random.default_rng(9)
    bad_e = bad_t = 0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        q = QuboInstance(np.triu(rng.normal(0, 2, (n, n))), float(rng.normal()))
        X = all_assignments(n)
        e = qubo_to_ising(q).energy_many(2 * X.astype(float) - 1)
        bad_e += not np.allclose(e, q.evaluate_many(X), rtol=0, atol=1e-9)
        err = np.abs(q.evaluate_many(X) - truncate(q, 3).evaluate_many(X)).max()
        bad_t += err > truncation_bound(n, 3) + 1e-12
    record(9, bad_e == 0 and bad_t == 0, f"100 instances, {bad_e} energy mismatches, {bad_t} truncation-bound violations")


# 10-12 (real data) ------------------------------------------------------------------

@pytest.fixture(scope="module")
def fashion():
    try:
        dataio.find_split(DATA_DIR, "train")
        dataio.find_split(DATA_DIR, "test")
    except FileNotFoundError:
        pytest.skip(f"IDX files not found in {DATA_DIR} (set FASHION_MNIST_DIR)")
    cfg = copy.deepcopy(cli.DEFAULT_CONFIG)
    train, test, _, _ = cli.prepare_data(cfg, DATA_DIR)
    protos = dataio.prototype_arrays(dataio.prototypes(*train))
    return cfg, train, test, protos


@pytest.fixture(scope="module")
def e2e(fashion):
    cfg, train, test, protos = fashion
    t0 = time.perf_counter()
    r = cli.pipeline(cfg, train, test, protos, cfg["seed"])
    return r, time.perf_counter() - t0


def test_criterion_10_end_to_end(fashion, e2e):
    cfg, train, test, protos = fashion
    r, dt_main = e2e
    t0 = time.perf_counter()
    sweep = {}
    for c in range(1, 8):
        pc = copy.deepcopy(cfg)
        pc["net"]["breakpoints"] = [-8, -c, 0, c, 8]
        seed = int(np.random.SeedSequence([cfg["seed"], c - 1]).generate_state(1, dtype=np.uint32)[0])
        sweep[c] = cli.pipeline(pc, train, test, protos, seed)["best_restart_test_acc"]
    dt = dt_main + time.perf_counter() - t0
    best_c = max(sweep, key=sweep.get)
    ok = r["test_acc"] >= 0.90 and sweep[best_c] >= 0.95 and dt < 900
    record(10, ok, f"{len(train[1])}/{len(test[1])} samples, {len(protos[1])} prototypes, {r['n_vars']} QUBO vars, "
                   f"test accuracy {r['test_acc']:.4f}; c-sweep best {sweep[best_c]:.4f} at c={best_c} "
                   f"({', '.join(f'{c}:{a:.3f}' for c, a in sweep.items())}), {dt:.0f}s")


def test_criterion_11_resource_report(e2e):
    r, _ = e2e
    net = QuantNet.from_json(r["net"])
    rep = resource_report(net, bits_per_param=2, n_latency=1000)
    record(11, net.n_params == 11 and rep.bytes == Fraction(11, 4),
           f"{net.n_params} parameters at 2 bits = {rep.bytes} bytes ({float(rep.bytes)}), "
           f"median latency {rep.latency_s * 1e6:.1f} us")


def best_of_seeds(train_fn, spec, X, y, w, seed, k=5):
    """Best of ``k`` seeds by weighted training accuracy, and the mean time per run."""
    runs, t0 = [], time.perf_counter()
    for sd in derive_seeds(seed, k):
        net = train_fn(spec, X, y, TrainConfig(seed=sd), weights=w)
        runs.append((accuracy(net, X, y, weights=w), net))
    return max(runs, key=lambda r: r[0])[1], (time.perf_counter() - t0) / k


def test_criterion_12_baselines(fashion):
    cfg, train, test, protos = fashion
    spec = cli.net_spec(cfg)
    # same restart budget as the direct solve, selected on training data only
    ste, t_ste = best_of_seeds(ste_train, spec, *protos, cfg["seed"], cfg["solver"]["restarts"])
    bc, t_bc = best_of_seeds(binaryconnect_train, spec, *protos, cfg["seed"], cfg["solver"]["restarts"])
    _, q, _ = cli.build_model(cfg, *cli.training_set(cfg, *protos))
    s = cfg["solver"]
    t0 = time.perf_counter()
    sa_solve(q, SASchedule(s["T_init"], s["T_final"], s["sweeps"]), cfg["seed"])
    t_sa = time.perf_counter() - t0
    a_ste, a_bc = accuracy(ste, *test), accuracy(bc, *test)
    ratio = min(t_ste, t_bc) / t_sa
    ok = a_ste >= 0.85 and a_bc >= 0.85 and ratio >= 100
    record(12, ok, f"STE test {a_ste:.4f} ({t_ste:.2f}s per run), BinaryConnect test {a_bc:.4f} "
                   f"({t_bc:.2f}s per run), one SA solve {t_sa:.2f}s, baseline/SA time ratio {ratio:.3g} "
                   f"(target >= 100)")
