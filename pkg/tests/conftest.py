import sys

import numpy as np
import pytest

from mtrl_lines import medium

CM = 1e-2
MM = 1e-3


@pytest.fixture
def fr4():
    return medium.constant(2.6)


@pytest.fixture
def lossy():
    return medium.constant(2.6, 2.6*0.06)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
