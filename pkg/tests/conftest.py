import numpy as np
import pytest

from impulsegame import REFERENCE_THRESHOLDS, table1_config


@pytest.fixture(scope="session")
def cfg():
    return table1_config()


@pytest.fixture(scope="session")
def th():
    return REFERENCE_THRESHOLDS


@pytest.fixture(scope="session")
def solved(cfg, th):
    from impulsegame import solve
    return solve(cfg, th).thresholds


def fd(f, x, h=1e-6, order=1):
    """Central difference of f at x with relative step h."""
    s = h * max(abs(x), 1.0)
    if order == 1:
        return (f(x + s) - f(x - s)) / (2 * s)
    return (f(x + s) - 2 * f(x) + f(x - s)) / (s * s)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
