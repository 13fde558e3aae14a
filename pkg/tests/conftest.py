import numpy as np
import pytest

from rhosi.scenario import default_scenario


def tiny_config(seed=0, **kw):
    """Single user, two antennas, two surface elements, one slot."""
    base = dict(num_antennas=2, num_users=1, num_elements=2, horizon_slots=1, total_time=1.0)
    base.update(kw)
    return default_scenario(seed, **base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny():
    return tiny_config()


# one line per acceptance criterion, echoed live and repeated in the terminal summary
_CRITERIA: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
    _CRITERIA.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
