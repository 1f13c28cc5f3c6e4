import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from swhf.graph import Graph

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_graph(rng, n, p=0.5, weighted=True):
    """Connected graph on ``n`` nodes: a random spanning tree plus extra edges with probability ``p``."""
    perm = rng.permutation(n)
    edges = {tuple(sorted((int(perm[k]), int(perm[rng.integers(0, k)])))) for k in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    if weighted:
        w = rng.uniform(0.5, 2.0, len(edges))
        wt = rng.uniform(0.5, 2.0, len(edges))
    else:
        w = np.ones(len(edges))
        wt = np.ones(len(edges))
    return Graph(n, edges, w, wt)


def random_interior(rng, n, floor=0.05):
    x = rng.dirichlet(np.ones(n)) + floor
    return x / x.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 16):
        terminalreporter.write_line(module.RESULTS.get(number, f"criterion {number:2d}: FAIL  no result (not run, or raised before reporting)"))
