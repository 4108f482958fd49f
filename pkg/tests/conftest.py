import numpy as np
import pytest

from barymap import generate_split


def random_spd(rng, d, low=0.2):
    G = rng.standard_normal((d, d))
    return G @ G.T / d + low * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def moons():
    return generate_split("moons", seed=0, n_train=600, n_test=300)


# criterion number -> (passed, title, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line("criterion %2d %s  %s: %s"
                                    % (n, "PASS" if ok else "FAIL", title, detail))
