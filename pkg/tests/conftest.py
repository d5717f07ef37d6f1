import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("lab", max_examples=25, deadline=None)
settings.register_profile("stress", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "lab"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record the one-line verdict of an acceptance criterion."""
    def record(n: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[n] = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[n])
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
