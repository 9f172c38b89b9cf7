"""
Shared fixtures: small graphs, clouds, hypergraphs and filter banks.
"""
import os
from pathlib import Path

import numpy as np
import pytest

from pinvgcn.filters import FilterBank
from pinvgcn.graphs import GaussianCloud, sparse_graph_from_edges
from pinvgcn.hypergraph import Hypergraph
from pinvgcn.oracle_check import dense_laplacian_of, oracle_basis, random_connected_graph

DATA_DIR = Path(os.getenv("PINVGCN_DATA_DIR", Path(__file__).resolve().parent.parent / "data"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: benchmark-scale reproduction (needs data files)")


def two_clique_edges(size: int = 20):
    """Two unit-weight cliques on 0..size-1 and size..2size-1 joined by one edge."""
    edges = []
    for offset in (0, size):
        for i in range(size):
            for j in range(i + 1, size):
                edges.append((offset + i, offset + j, 1.0))
    edges.append((size - 1, size, 1.0))
    return edges


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def triangle():
    return sparse_graph_from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


@pytest.fixture
def random_graph(rng):
    return random_connected_graph(40, rng)


@pytest.fixture
def two_clique_graph():
    return sparse_graph_from_edges(40, two_clique_edges(20))


@pytest.fixture
def small_cloud(rng):
    return GaussianCloud(rng.normal(size=(50, 3)), sigma=1.5)


@pytest.fixture
def small_hypergraph():
    return Hypergraph(n=6, edges=([0, 1, 2], [2, 3], [3, 4, 5], [0, 5], [1, 4]),
                      weights=np.ones(5))


@pytest.fixture
def dense_bank(rng):
    """Filter bank of a random 30-node graph built from the Jacobi oracle, r = 6."""
    L = dense_laplacian_of(random_connected_graph(30, rng))
    basis, _, _ = oracle_basis(L, 6)
    return FilterBank(basis), L


def require_data(name: str) -> Path:
    path = DATA_DIR / name
    if not path.exists():
        pytest.skip(f"benchmark file {path} not available")
    return path


def dense_parts(bank: FilterBank):
    """Explicit K1, K2, K3 assembled from the basis factors."""
    basis = bank.basis
    n, lam1 = bank.n, bank.eigengap
    K1 = np.outer(basis.u0, basis.u0)
    K2 = lam1 * (basis.U / basis.lambdas) @ basis.U.T
    K3 = lam1 * (np.eye(n) - K1 - basis.U @ basis.U.T)
    return K1, K2, K3
