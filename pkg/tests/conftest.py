import numpy as np
import pytest
from hypothesis import settings

from qrfgauss.core import make_state, new_system

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def sys3():
    return new_system("ABC", [1.0, 1.0, 1.0])


@pytest.fixture
def e1(sys3):
    """N=3, frame A, identity covariance in blocked ordering."""
    return make_state(sys3, "A", None, np.eye(4))


@pytest.fixture
def pure_half(sys3):
    return make_state(sys3, "A", None, 0.5 * np.eye(4))


def two_mode_squeezed(r: float) -> np.ndarray:
    """Blocked covariance of two modes with var(x1 - x2) = var(p1 + p2) = exp(-2r)."""
    ch, sh = 0.5 * np.cosh(2 * r), 0.5 * np.sinh(2 * r)
    x = np.array([[ch, sh], [sh, ch]])
    p = np.array([[ch, -sh], [-sh, ch]])
    return np.block([[x, np.zeros((2, 2))], [np.zeros((2, 2)), p]])


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Print and remember one PASS/FAIL line for an acceptance criterion."""

    def emit(number: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
