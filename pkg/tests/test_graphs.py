"""
Graph representations and matrix-free normalized adjacency products.

Ground truth:
- Triangle K3: degrees 2, L_sym spectrum {0, 3/2, 3/2}
- Single edge: Â is the swap permutation
- Gaussian clouds: dense kernel assembly
"""
import numpy as np
import pytest
import scipy.sparse as sp

from pinvgcn.errors import ConfigError, DimensionMismatch, DisconnectedGraph, IsolatedNode, ScaleGuardError
from pinvgcn.graphs import (
    GaussianCloud,
    LaplacianOperator,
    SparseGraph,
    cloud_diameter,
    connectivity_check,
    deflated_signless_apply,
    degrees,
    dense_adjacency,
    normalized_adjacency_apply,
    sparse_graph_from_edges,
    unit_degree_vector,
)


def dense_kernel(points, sigma):
    diff = points[:, None, :] - points[None, :, :]
    K = np.exp(-np.sum(diff ** 2, axis=2) / sigma ** 2)
    np.fill_diagonal(K, 0.0)
    return K


class TestSparseGraph:
    """Construction invariants."""

    def test_from_edges_symmetrizes(self, triangle):
        A = triangle.adjacency.toarray()
        np.testing.assert_array_equal(A, A.T)
        assert triangle.n == 3
        assert A.sum() == 6.0

    def test_rejects_loops(self):
        with pytest.raises(ConfigError):
            sparse_graph_from_edges(2, [(0, 0, 1.0), (0, 1, 1.0)])

    def test_rejects_duplicate_edges(self):
        with pytest.raises(ConfigError):
            sparse_graph_from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ConfigError):
            sparse_graph_from_edges(2, [(0, 1, 0.0)])

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigError):
            sparse_graph_from_edges(2, [(0, 2, 1.0)])

    def test_rejects_asymmetric_matrix(self):
        A = sp.csr_matrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(ConfigError):
            SparseGraph(A)

    def test_disconnected_is_an_error(self):
        with pytest.raises(DisconnectedGraph):
            sparse_graph_from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])


class TestConnectivity:
    def test_triangle_connected(self, triangle):
        assert connectivity_check(triangle)

    def test_two_disjoint_edges(self):
        A = sp.csr_matrix(([1.0] * 4, ([0, 1, 2, 3], [1, 0, 3, 2])), shape=(4, 4))
        assert not connectivity_check(A)

    def test_random_graph_connected(self, random_graph):
        assert connectivity_check(random_graph)

    def test_cloud_always_connected(self, small_cloud):
        assert connectivity_check(small_cloud)


class TestGaussianCloud:
    def test_needs_two_points(self):
        with pytest.raises(ConfigError):
            GaussianCloud(np.zeros((1, 3)), sigma=1.0)

    def test_rejects_duplicates(self):
        with pytest.raises(ConfigError):
            GaussianCloud(np.array([[0.0, 0, 0], [1, 1, 1], [0, 0, 0]]), sigma=1.0)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ConfigError):
            GaussianCloud(np.eye(3), sigma=0.0)

    def test_rejects_wrong_dimension(self):
        with pytest.raises(DimensionMismatch):
            GaussianCloud(np.zeros((4, 2)), sigma=1.0)

    def test_caller_array_stays_writable(self):
        points = np.eye(3)
        GaussianCloud(points, sigma=1.0)
        points[0, 0] = 5.0

    def test_kernel_rows_match_dense(self, small_cloud):
        expected = dense_kernel(small_cloud.points, small_cloud.sigma)
        np.testing.assert_allclose(small_cloud.kernel_rows(10, 20), expected[10:20], rtol=1e-14)
        assert np.all(np.diag(small_cloud.kernel_rows(0, small_cloud.n)) == 0.0)


class TestDegrees:
    def test_triangle(self, triangle):
        np.testing.assert_array_equal(degrees(triangle), [2.0, 2.0, 2.0])

    def test_two_point_cloud(self):
        cloud = GaussianCloud(np.array([[0.0, 0, 0], [1, 1, 1]]), sigma=1.0)
        np.testing.assert_allclose(degrees(cloud), [np.exp(-3.0)] * 2, rtol=1e-15)

    def test_cloud_matches_dense_row_sums(self, small_cloud):
        expected = dense_kernel(small_cloud.points, small_cloud.sigma).sum(axis=1)
        np.testing.assert_allclose(degrees(small_cloud, block_size=7), expected, rtol=1e-12)

    def test_underflow_gives_isolated_node(self):
        cloud = GaussianCloud(np.array([[0.0, 0, 0], [100.0, 0, 0]]), sigma=0.1)
        with pytest.raises(IsolatedNode):
            degrees(cloud)


class TestUnitDegreeVector:
    def test_equal_degrees(self):
        np.testing.assert_allclose(unit_degree_vector(np.array([2.0, 2, 2])), np.ones(3) / np.sqrt(3))

    def test_direct_formula(self):
        np.testing.assert_allclose(unit_degree_vector(np.array([1.0, 4.0])), np.array([1.0, 2.0]) / np.sqrt(5))

    def test_stationary_for_random_graph(self, random_graph):
        op = LaplacianOperator.from_graph(random_graph)
        u0 = unit_degree_vector(op.degrees)
        assert np.linalg.norm(op.apply(u0) - u0) <= 1e-10
        assert np.all(u0 > 0)


class TestNormalizedAdjacency:
    def test_single_edge_swaps(self):
        op = LaplacianOperator.from_graph(sparse_graph_from_edges(2, [(0, 1, 1.0)]))
        np.testing.assert_allclose(normalized_adjacency_apply(op, np.array([1.0, 0.0])), [0.0, 1.0])

    def test_symmetry(self, random_graph, rng):
        op = LaplacianOperator.from_graph(random_graph)
        x, y = rng.normal(size=random_graph.n), rng.normal(size=random_graph.n)
        assert abs(op.apply(x) @ y - x @ op.apply(y)) <= 1e-12 * np.linalg.norm(x) * np.linalg.norm(y)

    def test_cloud_matches_dense_product(self, rng):
        cloud = GaussianCloud(rng.normal(size=(100, 3)), sigma=1.0)
        A = dense_kernel(cloud.points, cloud.sigma)
        root = 1.0 / np.sqrt(A.sum(axis=1))
        X = rng.normal(size=(100, 4))
        expected = (root[:, None] * A * root[None, :]) @ X
        got = LaplacianOperator.from_graph(cloud, block_size=16).apply(X)
        assert np.linalg.norm(got - expected) <= 1e-11 * np.linalg.norm(expected)

    @pytest.mark.parametrize("block_size", [1, 7, 64, 50])
    def test_block_size_independent(self, small_cloud, rng, block_size):
        X = rng.normal(size=(small_cloud.n, 3))
        reference = LaplacianOperator.from_graph(small_cloud, block_size=small_cloud.n).apply(X)
        got = LaplacianOperator.from_graph(small_cloud, block_size=block_size).apply(X)
        assert np.linalg.norm(got - reference) <= 1e-12 * np.linalg.norm(reference)

    def test_threads_agree(self, small_cloud, rng):
        X = rng.normal(size=(small_cloud.n, 2))
        single = LaplacianOperator.from_graph(small_cloud, block_size=8).apply(X)
        pooled = LaplacianOperator.from_graph(small_cloud, block_size=8, threads=3).apply(X)
        assert np.linalg.norm(pooled - single) <= 1e-10 * np.linalg.norm(single)

    def test_dimension_mismatch(self, triangle):
        with pytest.raises(DimensionMismatch):
            LaplacianOperator.from_graph(triangle).apply(np.ones(4))


class TestDeflatedSignless:
    def test_u0_is_removed(self, random_graph):
        op = LaplacianOperator.from_graph(random_graph)
        u0 = unit_degree_vector(op.degrees)
        assert np.linalg.norm(deflated_signless_apply(op, u0, u0)) <= 1e-12

    def test_triangle_eigenvector(self, triangle):
        op = LaplacianOperator.from_graph(triangle)
        u0 = unit_degree_vector(op.degrees)
        y = deflated_signless_apply(op, u0, np.array([1.0, -1.0, 0.0]))
        np.testing.assert_allclose(y, [0.5, -0.5, 0.0], atol=1e-15)

    def test_matches_dense_operator(self, random_graph, rng):
        op = LaplacianOperator.from_graph(random_graph)
        u0 = unit_degree_vector(op.degrees)
        A = dense_adjacency(random_graph)
        root = 1.0 / np.sqrt(A.sum(axis=1))
        M = np.eye(random_graph.n) + root[:, None] * A * root[None, :] - 2.0 * np.outer(u0, u0)
        x = rng.normal(size=random_graph.n)
        np.testing.assert_allclose(deflated_signless_apply(op, u0, x), M @ x, atol=1e-12)


class TestHelpers:
    def test_cloud_diameter(self):
        cloud = GaussianCloud(np.array([[0.0, 0, 0], [3, 4, 0], [1, 0, 0]]), sigma=1.0)
        assert cloud_diameter(cloud, block_size=2) == pytest.approx(5.0)

    def test_dense_adjacency_guard(self, rng):
        cloud = GaussianCloud(rng.normal(size=(2001, 3)), sigma=1.0)
        with pytest.raises(ScaleGuardError):
            dense_adjacency(cloud)
