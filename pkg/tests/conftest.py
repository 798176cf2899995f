import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


_CRITERIA = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(id, passed, measured)``."""

    def _record(cid, passed, measured):
        _CRITERIA.append(f"criterion {cid}: {'PASS' if passed else 'FAIL'} ({measured})")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
