import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def random_ball(rng, n, m, rmax=0.9):
    """Points uniform in direction with norms uniform in [0, rmax)."""
    u = rng.normal(size=(n, m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * (rmax * rng.random(n))[:, None]


@pytest.fixture(scope="session")
def karate():
    from hypcomm.datasets import karate

    return karate()


@pytest.fixture(scope="session")
def karate_runs(karate):
    """Five default-config 2-D trainings on Karate (seeds 0..4), shared across modules."""
    from hypcomm.trainer import TrainConfig, train

    g, _, _ = karate
    return [train(g, TrainConfig(seed=s)) for s in range(5)]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
