"""Shared helpers for the test suite."""

import numpy as np
import pytest

from dpbayes import BayesNetGraph, Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_dataset(rng: np.random.Generator, n: int, k: int) -> Dataset:
    return Dataset(rng.integers(0, 2, size=(n, k)).astype(np.int8))


def random_dag(rng: np.random.Generator, k: int, max_indegree: int = 3) -> BayesNetGraph:
    """Random DAG on an ancestral order: parents only among earlier nodes."""
    parents = []
    for i in range(k):
        pool = list(range(i))
        take = int(rng.integers(0, min(max_indegree, len(pool)) + 1))
        chosen = sorted(rng.choice(pool, size=take, replace=False).tolist()) if take else []
        parents.append(tuple(int(p) for p in chosen))
    return BayesNetGraph(node_count=k, parents=tuple(parents))


CHAIN3 = BayesNetGraph(node_count=3, parents=((), (0,), (1,)))
SINGLE = BayesNetGraph(node_count=1, parents=((),))
