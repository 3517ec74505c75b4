"""Shared builders for randomized test instances."""
import numpy as np
import pytest

import crowdbp as cb


def random_atom_prior(rng: np.random.Generator, max_atoms: int = 3,
                      lo: float = 0.05, hi: float = 0.95) -> cb.ReliabilityPrior:
    k = int(rng.integers(1, max_atoms + 1))
    p = rng.uniform(lo, hi, size=k)
    w = rng.dirichlet(np.ones(k))
    return cb.ReliabilityPrior.from_atoms(p, w)


def random_prior(rng: np.random.Generator) -> cb.ReliabilityPrior:
    """Either a small atom mixture or a Beta prior, both well conditioned."""
    if rng.random() < 0.5:
        return random_atom_prior(rng)
    return cb.ReliabilityPrior.from_beta(rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0))


def random_bipartite_tree(rng: np.random.Generator, max_tasks: int = 8,
                          max_extra: int = 12) -> cb.AssignmentGraph:
    """Random tree grown by attaching each new node to the opposite side."""
    tasks, workers = 1, 0
    edges: list[tuple[int, int]] = []
    for _ in range(int(rng.integers(1, max_extra + 1))):
        if workers and rng.random() < 0.5 and tasks < max_tasks:
            edges.append((tasks, int(rng.integers(workers))))
            tasks += 1
        else:
            edges.append((int(rng.integers(tasks)), workers))
            workers += 1
    return cb.AssignmentGraph(tasks, workers, np.array(edges))


def random_small_graph(rng: np.random.Generator, max_tasks: int = 5,
                       max_workers: int = 3, max_edges: int = 9) -> cb.AssignmentGraph:
    """Small (possibly loopy, possibly disconnected) graph for enumeration."""
    nt = int(rng.integers(2, max_tasks + 1))
    nw = int(rng.integers(1, max_workers + 1))
    edges = set()
    for u in range(nw):
        for t in rng.choice(nt, size=int(rng.integers(1, nt + 1)), replace=False):
            edges.add((int(t), u))
    edges = sorted(edges)[:max_edges]
    return cb.AssignmentGraph(nt, nw, np.array(edges))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260815)
