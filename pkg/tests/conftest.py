import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hcflab.lattice import Lattice
from hcflab.metrics import flat, hermitian_perturbation, kahler_potential

settings.register_profile("hcflab", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("hcflab")

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lat8():
    return Lattice(2, 8)


@pytest.fixture(scope="session")
def lat16():
    return Lattice(2, 16)


@pytest.fixture(scope="session")
def g8(lat8):
    return hermitian_perturbation(lat8, 1, 0.05, 1)


@pytest.fixture(scope="session")
def g16(lat16):
    return hermitian_perturbation(lat16, 1, 0.05, 1)


@pytest.fixture(scope="session")
def kahler8(lat8):
    return kahler_potential(lat8, 3, 0.05, 1)


@pytest.fixture(scope="session")
def flat8(lat8):
    return flat(lat8)


def sup(a):
    return float(np.max(np.abs(a)))
