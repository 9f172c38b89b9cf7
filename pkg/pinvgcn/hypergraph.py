"""
Hypergraphs built from categorical tables and their exact low-rank spectrum.

The hypergraph Laplacian I - H̃H̃ᵀ differs from the identity by a matrix of
rank |E|, so its informative eigenpairs follow from the |E| x |E| Gram matrix
H̃ᵀH̃ instead of an iterative solve over n nodes.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from pinvgcn.eigensolver import SpectralBasis
from pinvgcn.errors import (
    ConfigError,
    EmptyHypergraph,
    IsolatedNode,
    NumericallyDisconnected,
    ParseError,
    RankDeficient,
    RankTooLarge,
    ScaleGuardError,
)
from pinvgcn.models import CategoricalSchema

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
GRAM_TOL = 1e-12
TRUE_TOKENS = {"1", "true", "t", "yes", "y"}


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """Nodes 0..n-1 and weighted hyperedges given as sorted member lists."""
    n: int
    edges: Tuple[np.ndarray, ...]
    weights: np.ndarray
    names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        edges = tuple(np.unique(np.asarray(e, dtype=np.int64)) for e in self.edges)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not edges:
            raise EmptyHypergraph("hypergraph has no hyperedges")
        if weights.shape != (len(edges),):
            raise ConfigError(f"expected {len(edges)} weights, got {weights.shape}")
        if np.any(weights <= 0):
            raise ConfigError("hyperedge weights must be positive")
        for idx, members in enumerate(edges):
            if members.size < 2:
                raise ConfigError(f"hyperedge {idx} has fewer than two members")
            if members[0] < 0 or members[-1] >= self.n:
                raise ConfigError(f"hyperedge {idx} references nodes outside 0..{self.n - 1}")
        covered = np.zeros(self.n, dtype=bool)
        for members in edges:
            covered[members] = True
        if not covered.all():
            raise IsolatedNode(int(np.flatnonzero(~covered)[0]),
                               f"node {int(np.flatnonzero(~covered)[0])} is in no hyperedge")
        names = tuple(self.names) if self.names else tuple(f"e{i}" for i in range(len(edges)))
        if len(names) != len(edges):
            raise ConfigError("one name per hyperedge required")
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "names", names)

    @property
    def m_e(self) -> int:
        return len(self.edges)


def incidence_matrix(hg: Hypergraph) -> sp.csr_matrix:
    """0/1 node-by-hyperedge incidence H."""
    rows = np.concatenate(hg.edges)
    cols = np.repeat(np.arange(hg.m_e), [e.size for e in hg.edges])
    data = np.ones(rows.size)
    return sp.csr_matrix((data, (rows, cols)), shape=(hg.n, hg.m_e))


def node_degrees(hg: Hypergraph) -> np.ndarray:
    """D_ii = sum_e H_ie w_e."""
    return incidence_matrix(hg) @ hg.weights


def edge_degrees(hg: Hypergraph) -> np.ndarray:
    """B_ee = number of members of e."""
    return np.array([e.size for e in hg.edges], dtype=np.float64)


def _is_missing(value: str, schema: CategoricalSchema) -> bool:
    return value.strip() in schema.missing_values


def from_categorical_table(rows: Sequence[Sequence[str]],
                           schema: CategoricalSchema) -> Tuple[Hypergraph, List[str]]:
    """
    Build a hypergraph with one hyperedge per observed attribute value.

    Categorical columns give one hyperedge per distinct value, continuous
    columns one per non-empty equal-width bin over the observed range, binary
    columns one hyperedge of the rows holding a true value. Rows with a
    missing label are dropped, `schema.keep_labels` filters rows next, and
    hyperedges with fewer than two members are pruned last.

    Args:
        rows: Table rows (strings), without header
        schema: Column roles, one per table column

    Returns:
        (hypergraph, raw label per kept row)

    Raises:
        ConfigError: if the schema does not match the table width
        EmptyHypergraph: if every hyperedge was pruned
        IsolatedNode: if a row ends up in no hyperedge
    """
    if not rows:
        raise ConfigError("empty table")
    width = len(schema.columns)
    for lineno, row in enumerate(rows):
        if len(row) != width:
            raise ConfigError(f"row {lineno} has {len(row)} fields, schema has {width}")

    label_col = schema.label_index
    kept = [row for row in rows if not _is_missing(row[label_col], schema)]
    if len(kept) < len(rows):
        logger.warning("Dropped %d rows with missing labels", len(rows) - len(kept))
    if schema.keep_labels is not None:
        wanted = set(schema.keep_labels)
        kept = [row for row in kept if row[label_col].strip() in wanted]
    if not kept:
        raise ConfigError("no rows left after label filtering")

    n = len(kept)
    edges: List[np.ndarray] = []
    names: List[str] = []
    for col, spec in enumerate(schema.columns):
        values = [row[col].strip() for row in kept]
        if spec.role in ("label", "ignore"):
            continue
        missing = [_is_missing(v, schema) for v in values]
        if any(missing) and schema.skip_missing_columns and spec.role != "binary":
            logger.info("Skipping column %s: contains missing values", spec.name)
            continue

        groups: Dict[str, List[int]] = {}
        if spec.role == "categorical":
            for i, v in enumerate(values):
                if not missing[i]:
                    groups.setdefault(f"{spec.name}={v}", []).append(i)
        elif spec.role == "binary":
            members = [i for i, v in enumerate(values) if v.lower() in TRUE_TOKENS]
            groups[spec.name] = members
        else:
            present = [i for i in range(n) if not missing[i]]
            try:
                numbers = np.array([float(values[i]) for i in present])
            except ValueError as exc:
                raise ConfigError(f"column {spec.name} is not numeric: {exc}") from exc
            if numbers.size:
                lo, hi = numbers.min(), numbers.max()
                if hi > lo:
                    bins = np.floor((numbers - lo) / (hi - lo) * spec.bins).astype(np.int64)
                else:
                    bins = np.zeros(numbers.size, dtype=np.int64)
                bins = np.minimum(bins, spec.bins - 1)
                for b in range(spec.bins):
                    members = [present[k] for k in np.flatnonzero(bins == b)]
                    if members:
                        groups[f"{spec.name}[{b}]"] = members

        for name, members in groups.items():
            if len(members) >= 2:
                edges.append(np.array(members, dtype=np.int64))
                names.append(name)

    if not edges:
        raise EmptyHypergraph("every hyperedge has fewer than two members")
    hg = Hypergraph(n=n, edges=tuple(edges), weights=np.ones(len(edges)), names=tuple(names))
    logger.info("Built hypergraph: n=%d, |E|=%d", hg.n, hg.m_e)
    return hg, [row[label_col].strip() for row in kept]


def normalized_incidence(hg: Hypergraph) -> np.ndarray:
    """Dense H̃ = D^{-1/2} H W^{1/2} B^{-1/2}."""
    H = incidence_matrix(hg)
    d = H @ hg.weights
    scale = np.sqrt(hg.weights / edge_degrees(hg))
    return (H.multiply(scale[None, :]).multiply(1.0 / np.sqrt(d)[:, None])).toarray()


def clique_expansion_dense(hg: Hypergraph) -> np.ndarray:
    """Dense clique-expansion adjacency H W B^{-1} Hᵀ, loops included."""
    if hg.n > DENSE_LIMIT:
        raise ScaleGuardError(f"clique expansion limited to n <= {DENSE_LIMIT}, got {hg.n}")
    H = incidence_matrix(hg).toarray()
    return (H * (hg.weights / edge_degrees(hg))) @ H.T


def _unit_eigenspace(Q: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """k orthonormal vectors orthogonal to the orthonormal columns of Q."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((Q.shape[0], k))
    for _ in range(2):
        Z = Z - Q @ (Q.T @ Z)
    Z, _ = np.linalg.qr(Z)
    for _ in range(2):
        Z = Z - Q @ (Q.T @ Z)
    Z, _ = np.linalg.qr(Z)
    return Z


def hypergraph_spectral_basis(hg: Hypergraph, r: int, disconnect_tol: float = 1e-10,
                              strict: bool = False) -> SpectralBasis:
    """
    Informative Laplacian eigenpairs from the Gram matrix of H̃.

    The eigenvalues s of G = H̃ᵀH̃ give Laplacian eigenvalues 1 - s with node
    space eigenvectors H̃ v / sqrt(s); the leading pair (s = 1) is u0. When H̃
    has rank q < r + 1 (every attribute that splits all rows makes its columns
    sum to the same vector), the remaining r + 1 - q columns are taken from the
    orthogonal complement of range(H̃), where the Laplacian is the identity
    (eigenvalue 1).

    Raises:
        RankTooLarge: if r > |E| - 1
        RankDeficient: if r + 1 > n, or with strict=True whenever fewer than
            r + 1 Gram eigenvalues exceed GRAM_TOL
        NumericallyDisconnected: if the hypergraph splits into components
    """
    if r < 1 or r > hg.m_e - 1:
        raise RankTooLarge(f"rank {r} must satisfy 1 <= r <= |E| - 1 = {hg.m_e - 1}")
    Ht = normalized_incidence(hg)
    G = Ht.T @ Ht
    s, V = np.linalg.eigh(0.5 * (G + G.T))
    s, V = s[::-1], V[:, ::-1]
    q = min(int(np.count_nonzero(s > GRAM_TOL)), r + 1)
    if q < r + 1:
        message = f"normalized incidence has rank {q} < r + 1 = {r + 1}"
        if strict or r + 1 > hg.n:
            raise RankDeficient(message)
        logger.warning("%s; filling %d columns from the eigenvalue-1 eigenspace",
                       message, r + 1 - q)

    Q = Ht @ (V[:, :q] / np.sqrt(s[:q]))
    u0 = Q[:, 0] / np.linalg.norm(Q[:, 0])
    if u0.sum() < 0:
        u0 = -u0
    lambdas = np.concatenate([1.0 - s[1:q], np.ones(r + 1 - q)])
    if lambdas[0] <= disconnect_tol:
        raise NumericallyDisconnected(f"hypergraph eigengap {lambdas[0]:.3e} is zero")
    U = Q[:, 1:]
    if q < r + 1:
        U = np.hstack([U, _unit_eigenspace(Q, r + 1 - q)])
    U = np.asfortranarray(U)

    LU = U - Ht @ (Ht.T @ U)
    residuals = np.linalg.norm(LU - U * lambdas, axis=0)
    logger.info("Hypergraph basis: n=%d, |E|=%d, r=%d, eigengap %.4f",
                hg.n, hg.m_e, r, lambdas[0])
    return SpectralBasis(u0=u0, lambdas=lambdas, U=U, tol=GRAM_TOL, residuals=residuals)


def save_hypergraph(hg: Hypergraph, path: str) -> None:
    """Text format: `n |E|`, then one `w_e k i1 ... ik` line per hyperedge."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{hg.n} {hg.m_e}\n")
        for w, members in zip(hg.weights, hg.edges):
            f.write(" ".join([repr(float(w)), str(members.size)] + [str(i) for i in members]))
            f.write("\n")


def load_hypergraph(path: str) -> Hypergraph:
    """Read the format written by save_hypergraph."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.split() for line in f]
    if not lines or len(lines[0]) != 2:
        raise ParseError(path, 1, "expected header `n |E|`")
    try:
        n, m_e = int(lines[0][0]), int(lines[0][1])
    except ValueError as exc:
        raise ParseError(path, 1, str(exc)) from exc
    body = [(lineno, tokens) for lineno, tokens in enumerate(lines[1:], start=2) if tokens]
    if len(body) != m_e:
        raise ParseError(path, 1, f"header announces {m_e} hyperedges, found {len(body)}")
    edges, weights = [], []
    for lineno, tokens in body:
        try:
            w, k = float(tokens[0]), int(tokens[1])
            members = [int(t) for t in tokens[2:]]
        except (ValueError, IndexError) as exc:
            raise ParseError(path, lineno, str(exc)) from exc
        if len(members) != k:
            raise ParseError(path, lineno, f"expected {k} members, found {len(members)}")
        edges.append(members)
        weights.append(w)
    return Hypergraph(n=n, edges=tuple(edges), weights=np.array(weights))


def dense_laplacian(hg: Hypergraph) -> np.ndarray:
    """I - H̃H̃ᵀ as a dense matrix (oracle use)."""
    if hg.n > DENSE_LIMIT:
        raise ScaleGuardError(f"dense Laplacian limited to n <= {DENSE_LIMIT}, got {hg.n}")
    Ht = normalized_incidence(hg)
    return np.eye(hg.n) - Ht @ Ht.T
