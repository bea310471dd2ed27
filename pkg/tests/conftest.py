import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from martrep.models import M2_JOINT, m2  # noqa: E402


@pytest.fixture
def m2_model():
    return m2(exact=True)


@pytest.fixture
def m2_float():
    return m2(exact=False)


@pytest.fixture
def m2_joint():
    return dict(M2_JOINT)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
