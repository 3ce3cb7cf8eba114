import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "distcurv", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("distcurv")


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


# acceptance outcomes, one line per criterion, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""

    def record(number: int, passed: bool, detail: str = "") -> bool:
        ok, prev = ACCEPTANCE.get(number, (True, ""))
        ACCEPTANCE[number] = (ok and bool(passed), "; ".join(x for x in (prev, detail) if x))
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
