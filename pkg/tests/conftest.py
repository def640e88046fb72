import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "kklab", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("kklab")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=12345))


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one line per acceptance criterion for the terminal summary."""
    def record(number, name, rows):
        bad = [r for r in rows if not r.passed]
        status = "PASS" if not bad else "FAIL"
        worst = max(rows, key=lambda r: r.measured - r.bound)
        line = (f"criterion {number:>2} {status} {name}: {len(rows)} checks, {len(bad)} failed; "
                f"worst {worst.tag} [{worst.instance}] {worst.measured:.3g} vs {worst.bound:.3g}")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return bad
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
