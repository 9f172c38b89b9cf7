"""
Graph representations and matrix-free normalized adjacency products.

Two kinds of graphs are supported: explicit sparse graphs stored as CSR
adjacency matrices, and implicit fully connected Gaussian-kernel graphs over
3D point clouds whose adjacency is recomputed block by block and never stored.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from pinvgcn.errors import (
    ConfigError,
    DimensionMismatch,
    DisconnectedGraph,
    IsolatedNode,
    ScaleGuardError,
)

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 256
DENSE_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Undirected weighted graph with symmetric CSR adjacency and no loops."""
    adjacency: sp.csr_matrix

    def __post_init__(self):
        A = sp.csr_matrix(self.adjacency, dtype=np.float64)
        A.sum_duplicates()
        A.eliminate_zeros()
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {A.shape}")
        if A.diagonal().any():
            raise ConfigError("adjacency has loops (nonzero diagonal)")
        if A.nnz and A.data.min() <= 0:
            raise ConfigError("edge weights must be strictly positive")
        if A.nnz and abs(A - A.T).max() > 1e-12 * A.data.max():
            raise ConfigError("adjacency is not symmetric")
        if not connectivity_check(A):
            raise DisconnectedGraph("graph has more than one connected component")
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True, eq=False)
class GaussianCloud:
    """Fully connected graph with weights exp(-|x_i - x_j|^2 / sigma^2), i != j."""
    points: np.ndarray
    sigma: float

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64, order="C")
        if points.ndim != 2 or points.shape[1] != 3:
            raise DimensionMismatch(f"points must be n x 3, got {points.shape}")
        if points.shape[0] < 2:
            raise ConfigError("a point cloud needs at least 2 points")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if np.unique(points, axis=0).shape[0] != points.shape[0]:
            raise ConfigError("point cloud contains duplicate coordinates")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def kernel_rows(self, start: int, stop: int) -> np.ndarray:
        """Adjacency rows start..stop-1 as a (stop-start) x n block."""
        diff = self.points[start:stop, None, :] - self.points[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        block = np.exp(-sq / self.sigma ** 2)
        rows = np.arange(stop - start)
        block[rows, rows + start] = 0.0
        return block


Graph = Union[SparseGraph, GaussianCloud]


def sparse_graph_from_edges(n: int, edges: Iterable[Tuple[int, int, float]]) -> SparseGraph:
    """
    Build a graph from undirected weighted edges.

    Args:
        n: Number of nodes
        edges: (i, j, w) triples with 0-based indices, each undirected edge once

    Returns:
        Symmetrized SparseGraph

    Raises:
        ConfigError: on loops, duplicate edges, bad indices or weights
        DisconnectedGraph: if the result is not connected
    """
    seen = set()
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    for i, j, w in edges:
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise ConfigError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise ConfigError(f"loop at node {i}")
        if not w > 0:
            raise ConfigError(f"edge ({i}, {j}) has non-positive weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ConfigError(f"duplicate edge {key}")
        seen.add(key)
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.float64)
    return SparseGraph(A)


def connectivity_check(graph: Union[SparseGraph, sp.spmatrix, np.ndarray]) -> bool:
    """True iff the graph has exactly one connected component (breadth-first)."""
    if isinstance(graph, GaussianCloud):
        return True
    A = graph.adjacency if isinstance(graph, SparseGraph) else sp.csr_matrix(graph)
    if A.shape[0] == 0:
        return False
    count, _ = connected_components(A, directed=False)
    return count == 1


def _row_blocks(n: int, block_size: int) -> List[Tuple[int, int]]:
    return [(s, min(s + block_size, n)) for s in range(0, n, block_size)]


def degrees(graph: Graph, block_size: int = DEFAULT_BLOCK_SIZE) -> np.ndarray:
    """
    Node degrees d_i = sum_{j != i} A_ij.

    Raises:
        IsolatedNode: if any degree is zero (for clouds, after kernel underflow)
    """
    if isinstance(graph, SparseGraph):
        d = np.asarray(graph.adjacency.sum(axis=1)).ravel()
    else:
        d = np.empty(graph.n)
        for start, stop in _row_blocks(graph.n, block_size):
            d[start:stop] = graph.kernel_rows(start, stop).sum(axis=1)
    zero = np.flatnonzero(d <= 0)
    if zero.size:
        raise IsolatedNode(int(zero[0]))
    return d


def unit_degree_vector(d: np.ndarray) -> np.ndarray:
    """Trivial Laplacian eigenvector sqrt(d) / |sqrt(d)|."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise IsolatedNode(int(np.flatnonzero(d <= 0)[0]))
    root = np.sqrt(d)
    return root / np.linalg.norm(root)


@dataclass(frozen=True, eq=False)
class LaplacianOperator:
    """
    Matrix-free normalized adjacency D^{-1/2} A D^{-1/2} of a graph.

    For point clouds the product is evaluated in row blocks of `block_size`,
    recomputing kernel rows on the fly; blocks can be spread over `threads`
    worker threads. Each output row depends only on its own block, so results
    do not depend on the thread count.
    """
    graph: Graph
    degrees: np.ndarray
    block_size: int = DEFAULT_BLOCK_SIZE
    threads: int = 1
    _dinv_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.block_size < 1 or self.threads < 1:
            raise ConfigError("block_size and threads must be positive")
        object.__setattr__(self, "_dinv_sqrt", 1.0 / np.sqrt(self.degrees))

    @classmethod
    def from_graph(cls, graph: Graph, block_size: Optional[int] = None,
                   threads: int = 1) -> "LaplacianOperator":
        block_size = block_size or DEFAULT_BLOCK_SIZE
        d = degrees(graph, block_size)
        logger.debug("Laplacian operator: n=%d, degree range [%.3e, %.3e]",
                     graph.n, d.min(), d.max())
        return cls(graph=graph, degrees=d, block_size=block_size, threads=threads)

    @property
    def n(self) -> int:
        return self.graph.n

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Normalized adjacency times a vector or n x c block."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] != self.n:
            raise DimensionMismatch(f"operand has {X.shape[0]} rows, operator has {self.n}")
        vector = X.ndim == 1
        Z = (X[:, None] if vector else X) * self._dinv_sqrt[:, None]
        if isinstance(self.graph, SparseGraph):
            Y = self.graph.adjacency @ Z
        else:
            Y = self._blocked_kernel_product(Z)
        Y = Y * self._dinv_sqrt[:, None]
        return Y[:, 0] if vector else Y

    def _blocked_kernel_product(self, Z: np.ndarray) -> np.ndarray:
        cloud: GaussianCloud = self.graph
        Y = np.empty_like(Z)

        def run(bounds: Tuple[int, int]) -> None:
            start, stop = bounds
            Y[start:stop] = cloud.kernel_rows(start, stop) @ Z

        blocks = _row_blocks(self.n, self.block_size)
        if self.threads == 1 or len(blocks) == 1:
            for bounds in blocks:
                run(bounds)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(run, blocks))
        return Y


def normalized_adjacency_apply(op: LaplacianOperator, X: np.ndarray) -> np.ndarray:
    """Â X with Â = D^{-1/2} A D^{-1/2}."""
    return op.apply(X)


def deflated_signless_apply(op: LaplacianOperator, u0: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(I + Â - 2 u0 u0ᵀ) x, the signless Laplacian with the trivial pair removed."""
    x = np.asarray(x, dtype=np.float64)
    if u0.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"u0 has length {u0.shape[0]}, operand has {x.shape[0]} rows")
    return x + op.apply(x) - 2.0 * np.outer(u0, u0 @ x).reshape(x.shape)


def signless_operator(op: LaplacianOperator, u0: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Closure over deflated_signless_apply for the eigensolver."""
    return lambda x: deflated_signless_apply(op, u0, x)


def dense_adjacency(graph: Graph) -> np.ndarray:
    """Explicit n x n adjacency; test and oracle use only."""
    if graph.n > DENSE_LIMIT:
        raise ScaleGuardError(f"dense adjacency limited to n <= {DENSE_LIMIT}, got {graph.n}")
    if isinstance(graph, SparseGraph):
        return graph.adjacency.toarray()
    return graph.kernel_rows(0, graph.n)


def cloud_diameter(cloud: GaussianCloud, block_size: int = DEFAULT_BLOCK_SIZE) -> float:
    """Maximum pairwise Euclidean distance, evaluated blockwise."""
    best = 0.0
    for start, stop in _row_blocks(cloud.n, block_size):
        diff = cloud.points[start:stop, None, :] - cloud.points[None, :, :]
        best = max(best, float(np.einsum("ijk,ijk->ij", diff, diff).max()))
    return float(np.sqrt(best))
