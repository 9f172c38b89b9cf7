"""
Hypergraphs from categorical tables and the Gram-matrix spectrum.

Ground truth:
- Hand-computed incidences and degrees on a six-node hypergraph
- numpy.linalg.eigvalsh on the dense hypergraph Laplacian
"""
import numpy as np
import pytest

from pinvgcn.errors import (
    ConfigError,
    EmptyHypergraph,
    IsolatedNode,
    NumericallyDisconnected,
    ParseError,
    RankDeficient,
    RankTooLarge,
)
from pinvgcn.graphs import unit_degree_vector
from pinvgcn.hypergraph import (
    Hypergraph,
    clique_expansion_dense,
    dense_laplacian,
    edge_degrees,
    from_categorical_table,
    hypergraph_spectral_basis,
    incidence_matrix,
    load_hypergraph,
    node_degrees,
    save_hypergraph,
)
from pinvgcn.models import CategoricalSchema

TOY_ROWS = [
    ["a", "red", "1.0", "1", "x1"],
    ["a", "red", "2.0", "0", "x2"],
    ["b", "blue", "3.0", "1", "x3"],
    ["b", "blue", "4.0", "yes", "x4"],
    ["?", "red", "1.5", "1", "x5"],
]


def toy_schema(**kwargs) -> CategoricalSchema:
    return CategoricalSchema(
        columns=[
            {"name": "class", "role": "label"},
            {"name": "color", "role": "categorical"},
            {"name": "size", "role": "continuous", "bins": 2},
            {"name": "flag", "role": "binary"},
            {"name": "id", "role": "ignore"},
        ],
        **kwargs,
    )


class TestHypergraph:
    def test_incidence(self, small_hypergraph):
        H = incidence_matrix(small_hypergraph).toarray()
        assert H.shape == (6, 5)
        np.testing.assert_array_equal(H[:, 0], [1, 1, 1, 0, 0, 0])
        np.testing.assert_array_equal(H.sum(axis=0), [3, 2, 3, 2, 2])

    def test_degrees(self, small_hypergraph):
        np.testing.assert_array_equal(node_degrees(small_hypergraph), np.full(6, 2.0))
        np.testing.assert_array_equal(edge_degrees(small_hypergraph), [3, 2, 3, 2, 2])

    def test_weighted_degrees(self):
        hg = Hypergraph(n=3, edges=([0, 1], [1, 2]), weights=[2.0, 0.5])
        np.testing.assert_array_equal(node_degrees(hg), [2.0, 2.5, 0.5])

    def test_members_are_sorted_and_unique(self):
        hg = Hypergraph(n=3, edges=([2, 0, 2], [1, 0]), weights=[1.0, 1.0])
        np.testing.assert_array_equal(hg.edges[0], [0, 2])
        assert hg.names == ("e0", "e1")

    def test_uncovered_node(self):
        with pytest.raises(IsolatedNode) as info:
            Hypergraph(n=4, edges=([0, 1, 2],), weights=[1.0])
        assert info.value.node == 3

    def test_singleton_edge_rejected(self):
        with pytest.raises(ConfigError):
            Hypergraph(n=2, edges=([0, 1], [1]), weights=[1.0, 1.0])

    def test_no_edges(self):
        with pytest.raises(EmptyHypergraph):
            Hypergraph(n=2, edges=(), weights=[])

    def test_clique_expansion_row_sums(self, small_hypergraph):
        A = clique_expansion_dense(small_hypergraph)
        np.testing.assert_allclose(A, A.T)
        np.testing.assert_allclose(A.sum(axis=1), node_degrees(small_hypergraph))


class TestFromCategoricalTable:
    def test_toy_table(self):
        hg, labels = from_categorical_table(TOY_ROWS, toy_schema())
        assert hg.n == 4
        assert labels == ["a", "a", "b", "b"]
        assert hg.names == ("color=red", "color=blue", "size[0]", "size[1]", "flag")
        members = {name: list(e) for name, e in zip(hg.names, hg.edges)}
        assert members["size[0]"] == [0, 1]
        assert members["size[1]"] == [2, 3]
        assert members["flag"] == [0, 2, 3]

    def test_one_value_per_categorical_attribute(self):
        hg, _ = from_categorical_table(TOY_ROWS, toy_schema())
        H = incidence_matrix(hg).toarray()
        color = [i for i, name in enumerate(hg.names) if name.startswith("color=")]
        np.testing.assert_array_equal(H[:, color].sum(axis=1), np.ones(hg.n))

    def test_missing_value_skips_column(self):
        rows = [list(r) for r in TOY_ROWS[:4]]
        rows[1][1] = "?"
        hg, _ = from_categorical_table(rows, toy_schema())
        assert not any(name.startswith("color=") for name in hg.names)

    def test_missing_value_kept_column(self):
        rows = [list(r) for r in TOY_ROWS[:4]]
        rows[1][1] = "?"
        hg, _ = from_categorical_table(rows, toy_schema(skip_missing_columns=False))
        assert "color=red" not in hg.names
        assert list(hg.edges[hg.names.index("color=blue")]) == [2, 3]

    def test_keep_labels(self):
        hg, labels = from_categorical_table(TOY_ROWS, toy_schema(keep_labels=["a"]))
        assert labels == ["a", "a"]
        assert hg.names == ("color=red",)

    def test_width_mismatch(self):
        with pytest.raises(ConfigError):
            from_categorical_table([["a", "red"]], toy_schema())

    def test_everything_pruned(self):
        rows = [["a", "red", "1", "0", "x"], ["b", "blue", "9", "0", "y"]]
        with pytest.raises(EmptyHypergraph):
            from_categorical_table(rows, toy_schema())


class TestHypergraphSpectralBasis:
    def test_matches_dense_laplacian(self, small_hypergraph):
        basis = hypergraph_spectral_basis(small_hypergraph, 3)
        expected = np.linalg.eigvalsh(dense_laplacian(small_hypergraph))
        np.testing.assert_allclose(basis.lambdas, expected[1:4], atol=1e-10)
        assert basis.residuals.max() <= 1e-12

    def test_u0_is_degree_vector(self, small_hypergraph):
        basis = hypergraph_spectral_basis(small_hypergraph, 2)
        np.testing.assert_allclose(basis.u0, unit_degree_vector(node_degrees(small_hypergraph)),
                                   atol=1e-12)

    def test_orthonormal(self, small_hypergraph):
        basis = hypergraph_spectral_basis(small_hypergraph, 3)
        np.testing.assert_allclose(basis.U.T @ basis.U, np.eye(3), atol=1e-12)
        assert np.abs(basis.U.T @ basis.u0).max() <= 1e-12

    def test_rank_deficient_incidence_fills_unit_eigenspace(self, small_hypergraph):
        # the five columns of H satisfy e0 - e1 + e2 - e3 - e4 = 0
        basis = hypergraph_spectral_basis(small_hypergraph, 4)
        expected = np.linalg.eigvalsh(dense_laplacian(small_hypergraph))
        np.testing.assert_allclose(basis.lambdas, expected[1:5], atol=1e-10)
        assert basis.lambdas[-1] == 1.0
        np.testing.assert_allclose(basis.U.T @ basis.U, np.eye(4), atol=1e-12)
        assert np.abs(basis.U.T @ basis.u0).max() <= 1e-12
        assert basis.residuals.max() <= 1e-10

    def test_strict_rank_check(self, small_hypergraph):
        with pytest.raises(RankDeficient):
            hypergraph_spectral_basis(small_hypergraph, 4, strict=True)

    def test_more_hyperedges_than_nodes(self):
        hg = Hypergraph(n=3, edges=([0, 1], [1, 2], [0, 2], [0, 1, 2]), weights=np.ones(4))
        with pytest.raises(RankDeficient):
            hypergraph_spectral_basis(hg, 3)

    def test_attributes_partitioning_every_row(self):
        # each attribute's columns sum to the all-ones pattern, so rank(H) = 9 - 2
        rows = [[str(i % 2), f"a{i % 3}", f"b{i % 2}", f"c{(i // 3) % 4}"] for i in range(12)]
        schema = CategoricalSchema(columns=[
            {"name": "class", "role": "label"},
            {"name": "a", "role": "categorical"},
            {"name": "b", "role": "categorical"},
            {"name": "c", "role": "categorical"},
        ])
        hg, _ = from_categorical_table(rows, schema)
        assert hg.m_e == 9
        basis = hypergraph_spectral_basis(hg, hg.m_e - 1)
        expected = np.linalg.eigvalsh(dense_laplacian(hg))
        np.testing.assert_allclose(basis.lambdas, expected[1:hg.m_e], atol=1e-10)
        np.testing.assert_allclose(basis.lambdas[-2:], 1.0, atol=1e-12)
        np.testing.assert_allclose(basis.U.T @ basis.U, np.eye(hg.m_e - 1), atol=1e-10)
        assert np.abs(basis.U.T @ basis.u0).max() <= 1e-10
        L = dense_laplacian(hg)
        np.testing.assert_allclose(L @ basis.U, basis.U * basis.lambdas, atol=1e-10)

    def test_single_hyperedge(self):
        hg = Hypergraph(n=3, edges=([0, 1, 2],), weights=[1.0])
        with pytest.raises(RankTooLarge):
            hypergraph_spectral_basis(hg, 1)

    def test_disconnected(self):
        hg = Hypergraph(n=4, edges=([0, 1], [2, 3]), weights=[1.0, 1.0])
        with pytest.raises(NumericallyDisconnected):
            hypergraph_spectral_basis(hg, 1)

    def test_toy_table_spectrum(self):
        hg, _ = from_categorical_table(TOY_ROWS, toy_schema())
        basis = hypergraph_spectral_basis(hg, 2)
        expected = np.linalg.eigvalsh(dense_laplacian(hg))
        np.testing.assert_allclose(basis.lambdas, expected[1:3], atol=1e-10)


class TestHypergraphFile:
    def test_round_trip(self, small_hypergraph, tmp_path):
        path = tmp_path / "toy.hg"
        save_hypergraph(small_hypergraph, str(path))
        loaded = load_hypergraph(str(path))
        assert loaded.n == small_hypergraph.n
        for got, want in zip(loaded.edges, small_hypergraph.edges):
            np.testing.assert_array_equal(got, want)
        np.testing.assert_array_equal(loaded.weights, small_hypergraph.weights)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.hg"
        path.write_text("6\n")
        with pytest.raises(ParseError):
            load_hypergraph(str(path))

    def test_member_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.hg"
        path.write_text("3 1\n1.0 3 0 1\n")
        with pytest.raises(ParseError) as info:
            load_hypergraph(str(path))
        assert info.value.line == 2
