import os
from pathlib import Path

import numpy as np
import pytest

from fipqnn.pwl import build_midpoint_constant, sigmoid
from fipqnn.qcbo import Expr, NetSpec, QcboModel

BPS = (-8, -4, 0, 4, 8)
DATA_DIR = Path(os.environ.get("FASHION_MNIST_DIR", "/root/data/fashion-mnist"))


def reference_spec(decimals: int = 3, breakpoints=BPS) -> NetSpec:
    """``(3, 2, 1)`` network, +-1 weights and biases, sigmoid surrogate activation."""
    return NetSpec((3, 2, 1), build_midpoint_constant(sigmoid, breakpoints), activation_decimals=decimals)


def random_qcbo(rng, n: int, n_cons: int = 2, n_quad: int = 2) -> QcboModel:
    """Random model over ``n`` plain variables with integer data.

    Constraints are built around a random point so at least one feasible
    assignment exists. Each constraint carries up to ``n_quad`` products.
    """
    m = QcboModel()
    ids = [m.add_var(("var", i)) for i in range(n)]
    x0 = rng.integers(0, 2, n)
    obj = Expr()
    for i in ids:
        obj.add_lin(i, float(rng.integers(-4, 5)))
    for _ in range(rng.integers(0, 3)):
        i, j = rng.choice(n, 2, replace=False)
        obj.add_quad(int(i), int(j), float(rng.integers(-3, 4)))
    m.objective = obj
    for _ in range(n_cons):
        e = Expr()
        for i in rng.choice(n, min(n, 3), replace=False):
            e.add_lin(int(i), float(rng.integers(-2, 3)))
        pivot = int(rng.integers(n))
        for _ in range(n_quad):
            other = int(rng.integers(n))
            if other != pivot:
                e.add_quad(pivot, other, float(rng.choice([-2, -1, 1, 2])))
        lhs = e.evaluate(x0)
        if rng.random() < 0.5:
            m.add_constraint(e, "==", lhs)
        else:
            m.add_constraint(e, "<=", lhs + float(rng.integers(0, 2)))
    return m


@pytest.fixture
def spec():
    return reference_spec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
