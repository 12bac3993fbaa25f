import math

import pytest

from wavetrace import SimConfig, SingleGaussian, run

EPS = 1.65e-4

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def gaussian_record():
    """Default single-Gaussian run out to the width-doubling distance."""
    cfg = SimConfig(epsilon=EPS, z_final=math.sqrt(3.0) * math.pi / EPS)
    return run(cfg, SingleGaussian())


@pytest.fixture
def verdict(pytestconfig):
    """Record one acceptance line, ``verdict(number, title, passed, detail)``."""
    store = pytestconfig.stash.setdefault(_VERDICTS, {})

    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        store[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_VERDICTS, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
