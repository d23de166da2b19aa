import mpmath
import numpy as np
import pytest


def mp_normal_pdf(x, mean=0.0, sd=1.0):
    """Normal density at 50 significant digits, as a float."""
    with mpmath.workdps(50):
        z = (mpmath.mpf(x) - mean) / sd
        return float(mpmath.exp(-z * z / 2) / (sd * mpmath.sqrt(2 * mpmath.pi)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def builtin_summary():
    """Run a built-in study once per session and hand back its summary."""
    from wfdr.sim import get_builtin, run_experiment

    cache = {}

    def run(name):
        if name not in cache:
            cache[name] = run_experiment(get_builtin(name))
        return cache[name]

    return run


_CRITERIA = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion.

    Lines are printed at the end of the session whatever the capture mode.
    """

    def record(label, ok, detail=""):
        _CRITERIA.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
