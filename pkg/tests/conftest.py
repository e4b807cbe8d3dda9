import numpy as np
import pytest

from mpqc import ControlSystem
from mpqc.pauli import SX, SY, SZ


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qubit3():
    """H = -0.5 Z + u1 X + u2 Y + u3 Z, |u_j| <= 1, dt = 0.05."""
    return ControlSystem.from_hamiltonians(-0.5 * SZ, [SX, SY, SZ], 0.05, -1.0, 1.0)


@pytest.fixture
def qubit_x():
    """H = Z + u X, |u| <= 1, dt = 0.1 (no constant input holds |+> or |->)."""
    return ControlSystem.from_hamiltonians(SZ, [SX], 0.1, -1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT
    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(REPORT):
        passed, detail = REPORT[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {key}: {detail}")
