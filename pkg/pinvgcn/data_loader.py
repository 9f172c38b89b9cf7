"""
Data loader utilities for point clouds, categorical tables and edge lists
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from pinvgcn.csv_handler import CSVHandler
from pinvgcn.errors import ClassTooSmall, ConfigError, DimensionMismatch, ParseError, ScaleGuardError
from pinvgcn.graphs import GaussianCloud, SparseGraph, cloud_diameter, sparse_graph_from_edges
from pinvgcn.hypergraph import Hypergraph, from_categorical_table, incidence_matrix
from pinvgcn.models import CategoricalSchema, ColumnSpec, DatasetInfo, DatasetSpec, SplitSpec
from pinvgcn.network import Split

logger = logging.getLogger(__name__)

IDENTITY_FEATURE_LIMIT = 4096
ROLES = ("categorical", "continuous", "binary", "label", "ignore")

Source = Union[GaussianCloud, Hypergraph, SparseGraph]


@dataclass(frozen=True, eq=False)
class Dataset:
    """A graph-like source with node features and class labels."""
    name: str
    kind: str
    source: Source
    features: np.ndarray
    labels: np.ndarray
    m: int
    classes: Tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.source.n:
            raise DimensionMismatch(
                f"features {self.features.shape} do not match {self.source.n} nodes"
            )
        if self.labels.shape != (self.source.n,):
            raise DimensionMismatch(f"expected {self.source.n} labels, got {self.labels.shape}")
        if self.labels.min() < 0 or self.labels.max() >= self.m:
            raise ConfigError(f"labels must lie in [0, {self.m})")
        for array in (self.features, self.labels):
            array.setflags(write=False)

    @property
    def n(self) -> int:
        return self.source.n


def remap_labels(raw: Sequence[str]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    Map observed labels to 0..m-1 in sorted order.

    Integer-valued labels sort numerically, anything else lexicographically.
    """
    values = sorted(set(raw))
    try:
        values = sorted(values, key=int)
    except ValueError:
        pass
    index = {v: i for i, v in enumerate(values)}
    return np.array([index[v] for v in raw], dtype=np.int64), tuple(values)


def _data_lines(path: str):
    """(line number, tokens) of non-blank, non-comment lines."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                yield lineno, stripped.split()


def load_point_cloud(path: str, sigma: float) -> Dataset:
    """
    Read a point cloud of `x y z label` lines.

    Args:
        path: Point-cloud file
        sigma: Gaussian localization parameter

    Returns:
        Dataset over a GaussianCloud with the coordinates as features

    Raises:
        ParseError: on malformed lines (with line number)
        ConfigError: for fewer than 2 points or duplicate coordinates
    """
    points: List[List[float]] = []
    raw: List[str] = []
    for lineno, tokens in _data_lines(path):
        if len(tokens) != 4:
            raise ParseError(path, lineno, f"expected `x y z label`, found {len(tokens)} fields")
        try:
            xyz = [float(t) for t in tokens[:3]]
            label = int(tokens[3])
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from exc
        if label < 0:
            raise ParseError(path, lineno, f"negative label {label}")
        if not np.all(np.isfinite(xyz)):
            raise ParseError(path, lineno, "non-finite coordinate")
        points.append(xyz)
        raw.append(str(label))
    if len(points) < 2:
        raise ConfigError(f"{path}: a point cloud needs at least 2 points, found {len(points)}")

    cloud = GaussianCloud(np.array(points), sigma)
    labels, classes = remap_labels(raw)
    logger.info("Loaded point cloud %s: n=%d, classes=%d", path, cloud.n, len(classes))
    return Dataset(name=Path(path).stem, kind="point-cloud", source=cloud,
                   features=cloud.points.copy(), labels=labels, m=len(classes), classes=classes)


def write_point_cloud(path: str, points: np.ndarray, labels: Sequence[int]) -> None:
    """Write `x y z label` lines that load_point_cloud reads back exactly."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] != len(labels):
        raise DimensionMismatch(f"points {points.shape} and {len(labels)} labels do not conform")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for (x, y, z), label in zip(points, labels):
            f.write(" ".join(repr(float(v)) for v in (x, y, z)) + f" {int(label)}\n")


def make_two_cluster_cloud(n: int, separation: float = 10.0, spread: float = 1.0,
                           seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Two isotropic Gaussian blobs in 3D.

    The first n // 2 points are centred at the origin (label 0), the rest at
    (separation, 0, 0) (label 1).
    """
    if n < 2:
        raise ConfigError("a two-cluster cloud needs n >= 2")
    rng = np.random.default_rng(seed)
    half = n // 2
    points = rng.normal(0.0, spread, size=(n, 3))
    points[half:, 0] += separation
    labels = np.zeros(n, dtype=np.int64)
    labels[half:] = 1
    return points, labels


def load_schema(path: str) -> CategoricalSchema:
    """
    Read a schema file.

    One `name role [bins]` line per table column, in table order. Optional
    directive lines: `missing <tokens...>` (the empty field always counts as
    missing), `keep_labels <labels...>`, `header yes|no`, `skip_missing yes|no`
    and `delimiter <char>`.
    """
    columns: List[ColumnSpec] = []
    options = {}
    for lineno, tokens in _data_lines(path):
        head, rest = tokens[0], tokens[1:]
        if head == "missing":
            options["missing_values"] = rest + [""]
        elif head == "keep_labels":
            options["keep_labels"] = rest
        elif head in ("header", "skip_missing") and len(rest) == 1 and rest[0] in ("yes", "no"):
            key = "has_header" if head == "header" else "skip_missing_columns"
            options[key] = rest[0] == "yes"
        elif head == "delimiter" and len(rest) == 1:
            options["delimiter"] = "\t" if rest[0] == "tab" else rest[0]
        else:
            if len(tokens) not in (2, 3) or tokens[1] not in ROLES:
                raise ParseError(path, lineno, "expected `name role [bins]`")
            try:
                bins = int(tokens[2]) if len(tokens) == 3 else 10
                columns.append(ColumnSpec(name=tokens[0], role=tokens[1], bins=bins))
            except (ValueError, ValidationError) as exc:
                raise ParseError(path, lineno, str(exc)) from exc
    try:
        return CategoricalSchema(columns=columns, **options)
    except ValidationError as exc:
        raise ConfigError(f"{path}: invalid schema: {exc}") from exc


def load_categorical(path: str, schema_path: str,
                     keep_labels: Optional[Sequence[str]] = None) -> Dataset:
    """
    Build a hypergraph dataset from a categorical table.

    The incidence matrix H serves as the 0/1 feature matrix.

    Args:
        path: Delimited table
        schema_path: Schema file (see load_schema)
        keep_labels: Optional class subset, overriding the schema's

    Returns:
        Dataset over the resulting Hypergraph
    """
    schema = load_schema(schema_path)
    if keep_labels is not None:
        schema = schema.model_copy(update={"keep_labels": list(keep_labels)})

    label_col = schema.label_index
    row_filter = None
    if schema.keep_labels is not None:
        wanted = set(schema.keep_labels)
        row_filter = lambda row: len(row) > label_col and row[label_col] in wanted

    headers, rows = CSVHandler.read_table(path, schema.delimiter, schema.has_header, row_filter)
    if headers and len(headers) != len(schema.columns):
        raise ConfigError(
            f"{path} has {len(headers)} columns, schema {schema_path} lists {len(schema.columns)}"
        )
    hg, raw = from_categorical_table(rows, schema)
    labels, classes = remap_labels(raw)
    features = incidence_matrix(hg).toarray()
    logger.info("Loaded categorical table %s: n=%d, |E|=%d, classes=%d",
                path, hg.n, hg.m_e, len(classes))
    return Dataset(name=Path(path).stem, kind="hypergraph", source=hg,
                   features=features, labels=labels, m=len(classes), classes=classes)


def load_sparse_graph(path: str, labels_path: str, features_path: Optional[str] = None) -> Dataset:
    """
    Read an `i j w` edge list with a one-label-per-line file.

    Without a feature file the identity matrix is used, which is only
    allowed up to IDENTITY_FEATURE_LIMIT nodes.
    """
    raw = [tokens[0] for _, tokens in _data_lines(labels_path)]
    n = len(raw)
    for lineno, tokens in _data_lines(labels_path):
        if len(tokens) != 1 or not tokens[0].lstrip("-").isdigit() or int(tokens[0]) < 0:
            raise ParseError(labels_path, lineno, "expected one non-negative integer label")

    edges: List[Tuple[int, int, float]] = []
    seen = set()
    for lineno, tokens in _data_lines(path):
        if len(tokens) != 3:
            raise ParseError(path, lineno, "expected `i j w`")
        try:
            i, j, w = int(tokens[0]), int(tokens[1]), float(tokens[2])
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from exc
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(path, lineno, f"node index out of range 0..{n - 1}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ParseError(path, lineno, f"duplicate edge {key}")
        seen.add(key)
        edges.append((i, j, w))
    graph = sparse_graph_from_edges(n, edges)

    if features_path is not None:
        features = np.loadtxt(features_path, dtype=np.float64, ndmin=2)
    elif n <= IDENTITY_FEATURE_LIMIT:
        features = np.eye(n)
    else:
        raise ScaleGuardError(
            f"identity features limited to n <= {IDENTITY_FEATURE_LIMIT}; pass a feature file"
        )
    labels, classes = remap_labels(raw)
    logger.info("Loaded sparse graph %s: n=%d, edges=%d", path, n, len(edges))
    return Dataset(name=Path(path).stem, kind="sparse-graph", source=graph,
                   features=features, labels=labels, m=len(classes), classes=classes)


def run_generator(seed: int, run: int) -> np.random.Generator:
    """Generator for run j; draws the split, then the weights, then dropout masks."""
    return np.random.default_rng(seed + run)


def sample_split(labels: np.ndarray, m: int, per_class: int, rng: np.random.Generator) -> Split:
    """per_class training nodes per class, uniformly without replacement."""
    chosen = []
    for c in range(m):
        members = np.flatnonzero(labels == c)
        if members.size < per_class:
            raise ClassTooSmall(f"class {c} has {members.size} samples, {per_class} requested")
        chosen.append(rng.choice(members, size=per_class, replace=False))
    return Split(train_idx=np.sort(np.concatenate(chosen)), labels=labels, m=m)


def make_splits(dataset: Dataset, spec: SplitSpec) -> List[Split]:
    """One split per run; run j samples from run_generator(spec.seed, j)."""
    return [
        sample_split(dataset.labels, dataset.m, spec.per_class, run_generator(spec.seed, j))
        for j in range(spec.run_count)
    ]


def dataset_info(dataset: Dataset, per_class: Optional[int] = None,
                 eigengap: Optional[float] = None) -> DatasetInfo:
    """Size, class count and shape statistics of a dataset."""
    source = dataset.source
    return DatasetInfo(
        name=dataset.name,
        kind=dataset.kind,
        n=dataset.n,
        classes=dataset.m,
        hyperedges=source.m_e if isinstance(source, Hypergraph) else None,
        label_rate=per_class * dataset.m / dataset.n if per_class else None,
        diameter=cloud_diameter(source) if isinstance(source, GaussianCloud) else None,
        eigengap=eigengap,
    )


class DataLoader:
    """Loads the dataset a DatasetSpec points at"""

    def __init__(self, spec: DatasetSpec):
        self.spec = spec
        self.dataset: Optional[Dataset] = None
        self.loaded = False

    def load_data(self) -> Dataset:
        """Load (once) and return the dataset"""
        if self.dataset is None:
            spec = self.spec
            if spec.kind == "point-cloud":
                self.dataset = load_point_cloud(spec.path, spec.sigma)
            elif spec.kind == "hypergraph":
                self.dataset = load_categorical(spec.path, spec.schema_path, spec.keep_labels)
            else:
                self.dataset = load_sparse_graph(spec.path, spec.labels_path, spec.features_path)
            self.loaded = True
        return self.dataset
