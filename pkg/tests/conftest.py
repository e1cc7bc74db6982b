from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hsigma.graph import build_pinned_graph

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# lines appended by test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pinned_graph(seed: int, max_interior: int = 6):
    r = np.random.default_rng(seed)
    nv = int(r.integers(1, max_interior + 1)) + 1
    edges = {}
    for v in range(1, nv):
        edges[(int(r.integers(0, v)), v)] = float(r.uniform(0.2, 3.0))
    for _ in range(int(r.integers(0, nv))):
        a, b = sorted(int(x) for x in r.choice(nv, 2, replace=False))
        edges[(a, b)] = float(r.uniform(0.2, 3.0))
    return build_pinned_graph(range(nv), 0, [(a, b, w) for (a, b), w in edges.items()])
