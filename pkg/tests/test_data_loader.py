"""
Dataset readers, label remapping and split sampling.
"""
import numpy as np
import pytest

from pinvgcn.data_loader import (
    DataLoader,
    dataset_info,
    load_categorical,
    load_point_cloud,
    load_schema,
    load_sparse_graph,
    make_splits,
    make_two_cluster_cloud,
    remap_labels,
    run_generator,
    sample_split,
    write_point_cloud,
)
from pinvgcn.errors import ClassTooSmall, ConfigError, ParseError
from pinvgcn.graphs import GaussianCloud
from pinvgcn.hypergraph import Hypergraph
from pinvgcn.models import DatasetSpec, SplitSpec

SCHEMA = """\
# toy mushroom-like table
header no
missing ?
class label
color categorical
size continuous 2
flag binary
"""

TABLE = """\
a,red,1.0,1
a,red,2.0,0
b,blue,3.0,1
b,blue,4.0,1
c,red,1.5,0
"""


@pytest.fixture
def cloud_file(tmp_path):
    path = tmp_path / "cloud.xyz"
    path.write_text("# x y z label\n0 0 0 0\n\n1 0 0 0\n5 5 5 1\n6 5 5 1\n")
    return path


@pytest.fixture
def table_files(tmp_path):
    table, schema = tmp_path / "toy.data", tmp_path / "toy.schema"
    table.write_text(TABLE)
    schema.write_text(SCHEMA)
    return table, schema


@pytest.fixture
def graph_files(tmp_path):
    edges, labels = tmp_path / "ring.edges", tmp_path / "ring.labels"
    edges.write_text("0 1 1.0\n1 2 1.0\n2 3 2.0\n3 0 1.0\n")
    labels.write_text("1\n1\n0\n0\n")
    return edges, labels


class TestRemapLabels:
    def test_numeric_order(self):
        labels, classes = remap_labels(["10", "2", "2"])
        assert classes == ("2", "10")
        np.testing.assert_array_equal(labels, [1, 0, 0])

    def test_lexicographic_order(self):
        labels, classes = remap_labels(["p", "e", "p"])
        assert classes == ("e", "p")
        np.testing.assert_array_equal(labels, [1, 0, 1])


class TestPointCloud:
    def test_load(self, cloud_file):
        dataset = load_point_cloud(str(cloud_file), sigma=2.0)
        assert isinstance(dataset.source, GaussianCloud)
        assert dataset.name == "cloud"
        assert dataset.n == 4
        assert dataset.m == 2
        np.testing.assert_array_equal(dataset.labels, [0, 0, 1, 1])
        np.testing.assert_array_equal(dataset.features[2], [5.0, 5.0, 5.0])
        assert not dataset.features.flags.writeable

    def test_bad_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("0 0 0 0\n1 1 1 1\n2 2 2\n")
        with pytest.raises(ParseError) as info:
            load_point_cloud(str(path), sigma=1.0)
        assert info.value.line == 3

    def test_non_integer_label(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("0 0 0 0\n1 1 1 x\n")
        with pytest.raises(ParseError):
            load_point_cloud(str(path), sigma=1.0)

    def test_single_point(self, tmp_path):
        path = tmp_path / "one.xyz"
        path.write_text("0 0 0 0\n")
        with pytest.raises(ConfigError):
            load_point_cloud(str(path), sigma=1.0)

    def test_duplicate_points(self, tmp_path):
        path = tmp_path / "dup.xyz"
        path.write_text("0 0 0 0\n1 1 1 1\n0 0 0 1\n")
        with pytest.raises(ConfigError):
            load_point_cloud(str(path), sigma=1.0)

    def test_written_cloud_reads_back_exactly(self, tmp_path):
        points, labels = make_two_cluster_cloud(30, seed=4)
        path = tmp_path / "two.xyz"
        write_point_cloud(str(path), points, labels)
        dataset = load_point_cloud(str(path), sigma=1.0)
        np.testing.assert_array_equal(dataset.features, points)
        np.testing.assert_array_equal(dataset.labels, labels)

    def test_written_lines_are_plain_numbers(self, tmp_path):
        path = tmp_path / "scalars.xyz"
        points = np.array([[np.float64(0.1), -2.5, 3.0], [1e-300, 4.0, -0.0]])
        write_point_cloud(str(path), points, [np.int64(1), np.int64(2)])
        lines = path.read_text().splitlines()
        assert lines[0] == "0.1 -2.5 3.0 1"
        assert all("np." not in line and "(" not in line for line in lines)


class TestTwoClusterCloud:
    def test_layout(self):
        points, labels = make_two_cluster_cloud(200, separation=10.0, spread=1.0, seed=0)
        assert points.shape == (200, 3)
        np.testing.assert_array_equal(labels[:100], 0)
        np.testing.assert_array_equal(labels[100:], 1)
        assert abs(points[:100, 0].mean()) < 0.5
        assert abs(points[100:, 0].mean() - 10.0) < 0.5

    def test_seeded(self):
        first, _ = make_two_cluster_cloud(20, seed=3)
        second, _ = make_two_cluster_cloud(20, seed=3)
        np.testing.assert_array_equal(first, second)

    def test_too_small(self):
        with pytest.raises(ConfigError):
            make_two_cluster_cloud(1)


class TestSchema:
    def test_directives(self, table_files):
        _, schema_path = table_files
        schema = load_schema(str(schema_path))
        assert [c.role for c in schema.columns] == ["label", "categorical", "continuous", "binary"]
        assert schema.columns[2].bins == 2
        assert schema.has_header is False
        assert set(schema.missing_values) == {"?", ""}
        assert schema.keep_labels is None

    def test_keep_labels_and_delimiter(self, tmp_path):
        path = tmp_path / "s.schema"
        path.write_text("delimiter tab\nkeep_labels 4 5\nskip_missing no\nclass label\nx categorical\n")
        schema = load_schema(str(path))
        assert schema.delimiter == "\t"
        assert schema.keep_labels == ["4", "5"]
        assert schema.skip_missing_columns is False

    def test_unknown_role(self, tmp_path):
        path = tmp_path / "s.schema"
        path.write_text("class label\nx nominal\n")
        with pytest.raises(ParseError) as info:
            load_schema(str(path))
        assert info.value.line == 2

    def test_needs_label(self, tmp_path):
        path = tmp_path / "s.schema"
        path.write_text("x categorical\n")
        with pytest.raises(ConfigError):
            load_schema(str(path))


class TestCategorical:
    def test_load(self, table_files):
        table, schema = table_files
        dataset = load_categorical(str(table), str(schema))
        assert isinstance(dataset.source, Hypergraph)
        assert dataset.n == 5
        assert dataset.classes == ("a", "b", "c")
        np.testing.assert_array_equal(dataset.labels, [0, 0, 1, 1, 2])
        assert dataset.features.shape == (5, dataset.source.m_e)
        color = [i for i, name in enumerate(dataset.source.names) if name.startswith("color=")]
        np.testing.assert_array_equal(dataset.features[:, color].sum(axis=1), np.ones(5))

    def test_keep_labels_override(self, table_files):
        table, schema = table_files
        dataset = load_categorical(str(table), str(schema), keep_labels=["a", "b"])
        assert dataset.n == 4
        assert dataset.classes == ("a", "b")

    def test_header_width_mismatch(self, tmp_path):
        table, schema = tmp_path / "t.csv", tmp_path / "t.schema"
        table.write_text("class,color\na,red\nb,red\n")
        schema.write_text("class label\ncolor categorical\nsize continuous\n")
        with pytest.raises(ConfigError):
            load_categorical(str(table), str(schema))


class TestSparseGraph:
    def test_identity_features(self, graph_files):
        edges, labels = graph_files
        dataset = load_sparse_graph(str(edges), str(labels))
        assert dataset.n == 4
        np.testing.assert_array_equal(dataset.features, np.eye(4))
        np.testing.assert_array_equal(dataset.labels, [1, 1, 0, 0])

    def test_feature_file(self, graph_files, tmp_path):
        edges, labels = graph_files
        features = tmp_path / "ring.features"
        features.write_text("1 0\n0 1\n1 1\n0 0\n")
        dataset = load_sparse_graph(str(edges), str(labels), str(features))
        assert dataset.features.shape == (4, 2)

    def test_duplicate_edge(self, graph_files):
        edges, labels = graph_files
        edges.write_text("0 1 1.0\n1 2 1.0\n2 3 1.0\n1 0 1.0\n")
        with pytest.raises(ParseError) as info:
            load_sparse_graph(str(edges), str(labels))
        assert info.value.line == 4

    def test_index_out_of_range(self, graph_files):
        edges, labels = graph_files
        edges.write_text("0 1 1.0\n1 4 1.0\n")
        with pytest.raises(ParseError) as info:
            load_sparse_graph(str(edges), str(labels))
        assert info.value.line == 2

    def test_bad_label(self, graph_files):
        edges, labels = graph_files
        labels.write_text("1\nx\n0\n0\n")
        with pytest.raises(ParseError):
            load_sparse_graph(str(edges), str(labels))


class TestSplits:
    def test_per_class_counts(self):
        labels = np.repeat([0, 1, 2], 10)
        split = sample_split(labels, 3, 4, run_generator(0, 0))
        assert split.train_idx.size == 12
        assert np.all(np.diff(split.train_idx) > 0)
        np.testing.assert_array_equal(np.bincount(labels[split.train_idx]), [4, 4, 4])

    def test_class_too_small(self):
        with pytest.raises(ClassTooSmall):
            sample_split(np.array([0, 0, 0, 1]), 2, 2, run_generator(0, 0))

    def test_make_splits_uses_one_generator_per_run(self, cloud_file):
        dataset = load_point_cloud(str(cloud_file), sigma=2.0)
        splits = make_splits(dataset, SplitSpec(per_class=1, seed=5, run_count=3))
        assert len(splits) == 3
        for j, split in enumerate(splits):
            expected = sample_split(dataset.labels, dataset.m, 1, run_generator(5, j))
            np.testing.assert_array_equal(split.train_idx, expected.train_idx)


class TestDatasetInfo:
    def test_point_cloud(self, cloud_file):
        dataset = load_point_cloud(str(cloud_file), sigma=2.0)
        info = dataset_info(dataset, per_class=1, eigengap=0.25)
        assert info.n == 4
        assert info.classes == 2
        assert info.label_rate == pytest.approx(0.5)
        assert info.diameter == pytest.approx(np.sqrt(86.0))
        assert info.hyperedges is None
        assert info.eigengap == 0.25

    def test_hypergraph(self, table_files):
        table, schema = table_files
        info = dataset_info(load_categorical(str(table), str(schema)))
        assert info.hyperedges is not None and info.hyperedges > 0
        assert info.diameter is None


class TestDataLoader:
    def test_loads_once(self, cloud_file):
        loader = DataLoader(DatasetSpec(path=str(cloud_file), kind="point-cloud", sigma=2.0))
        assert not loader.loaded
        first = loader.load_data()
        assert loader.loaded
        assert loader.load_data() is first
