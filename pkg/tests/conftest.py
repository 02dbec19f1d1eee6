import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("mixfam", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mixfam")


def random_channel(rng, nx, ny, floor=0.0):
    W = rng.dirichlet(np.ones(ny), size=nx) + floor
    return W / W.sum(axis=1, keepdims=True)


def random_dist(rng, n):
    p = rng.dirichlet(np.ones(n))
    p = np.clip(p, 1e-6, None)
    return p / p.sum()


def kl(p, q):
    return float(np.sum(p * np.log(p / q)))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
