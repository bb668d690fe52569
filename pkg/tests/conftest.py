import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one acceptance sub-check: ``acceptance(criterion, label, ok, detail)``."""
    def record(criterion: int, label: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE.append((criterion, label, bool(ok), detail))
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted({c for c, *_ in ACCEPTANCE}):
        checks = [c for c in ACCEPTANCE if c[0] == crit]
        verdict = "PASS" if all(ok for _, _, ok, _ in checks) else "FAIL"
        tr.write_line(f"{verdict} criterion {crit}")
        for _, label, ok, detail in checks:
            tr.write_line(f"    {'PASS' if ok else 'FAIL'} {crit}.{label}: {detail}")
