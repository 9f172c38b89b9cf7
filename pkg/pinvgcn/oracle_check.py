"""
Oracle-equivalence suites.

Each suite compares a fast code path against an independent dense
computation on a random instance whose size is capped by `scale`:

    eigensolver-values    restarted Lanczos vs cyclic Jacobi eigenvalues
    eigensolver-subspace  principal angles between the two invariant subspaces
    filters               factored feature map vs dense three-term sum
    pseudoinverse         |L+ - K2 / lambda_1|_2 vs 1 / lambda_{r+1}
    gradients             backward pass vs central finite differences
    hypergraph            Gram-matrix spectrum vs dense hypergraph Laplacian

A nonzero `perturb` is added to every fast result; it must make every suite
fail and serves as a self-test of the checker.
"""
import logging
from typing import Callable, List, Tuple

import numpy as np

from pinvgcn.eigensolver import SpectralBasis, dense_eig_oracle, spectral_basis
from pinvgcn.filters import FilterBank, feature_map
from pinvgcn.graphs import LaplacianOperator, SparseGraph, dense_adjacency, sparse_graph_from_edges
from pinvgcn.hypergraph import Hypergraph, dense_laplacian, hypergraph_spectral_basis
from pinvgcn.models import EigSolveConfig, SuiteReport
from pinvgcn.network import (
    ModelParams,
    Split,
    backward,
    forward_cache,
    init_params,
    loss,
    precompute,
)

logger = logging.getLogger(__name__)

DEFAULT_SCALE = 200
FD_STEP = 1e-5


def random_connected_graph(n: int, rng: np.random.Generator, extra: int = 2) -> SparseGraph:
    """A weighted path plus about extra * n random chords."""
    edges = {(i, i + 1): rng.uniform(0.5, 2.0) for i in range(n - 1)}
    for _ in range(extra * n):
        i, j = sorted(int(x) for x in rng.choice(n, size=2, replace=False))
        edges.setdefault((i, j), rng.uniform(0.5, 2.0))
    return sparse_graph_from_edges(n, [(i, j, w) for (i, j), w in edges.items()])


def random_hypergraph(n: int, m_e: int, rng: np.random.Generator) -> Hypergraph:
    """Random hyperedges that all contain node 0, so the hypergraph is connected."""
    members = [{0} for _ in range(m_e)]
    for node in range(1, n):
        members[int(rng.integers(m_e))].add(node)
    for edge in members:
        edge.update(int(x) for x in rng.choice(n, size=max(2, n // 6), replace=False))
    return Hypergraph(n=n, edges=tuple(sorted(e) for e in members), weights=rng.uniform(0.5, 2.0, m_e))


def dense_laplacian_of(graph: SparseGraph) -> np.ndarray:
    A = dense_adjacency(graph)
    root = 1.0 / np.sqrt(A.sum(axis=1))
    return np.eye(graph.n) - root[:, None] * A * root[None, :]


def oracle_basis(L: np.ndarray, r: int) -> Tuple[SpectralBasis, np.ndarray, np.ndarray]:
    """Spectral basis from the Jacobi oracle, plus all eigenvalues and vectors."""
    w, V = dense_eig_oracle(L)
    u0 = V[:, 0] if V[:, 0].sum() >= 0 else -V[:, 0]
    basis = SpectralBasis(u0=u0.copy(), lambdas=w[1:r + 1].copy(), U=V[:, 1:r + 1].copy(),
                          tol=1e-13, residuals=np.zeros(r))
    return basis, w, V


def _report(name: str, error: float, tolerance: float, detail: str) -> SuiteReport:
    status = "pass" if error <= tolerance else "fail"
    return SuiteReport(name=name, status=status, max_error=error, tolerance=tolerance, detail=detail)


def eigensolver_suites(scale: int, rng: np.random.Generator, perturb: float) -> List[SuiteReport]:
    n = min(scale, 120)
    r = min(6, n // 3)
    graph = random_connected_graph(n, rng)
    basis = spectral_basis(LaplacianOperator.from_graph(graph), r,
                           EigSolveConfig(tol=1e-11, seed=int(rng.integers(1 << 31))))
    w, V = dense_eig_oracle(dense_laplacian_of(graph))
    lambdas = basis.lambdas + perturb
    value_error = float(np.abs(lambdas - w[1:r + 1]).max())

    U = basis.U + perturb
    cosines = np.linalg.svd(V[:, 1:r + 1].T @ (U / np.linalg.norm(U, axis=0)), compute_uv=False)
    angle_error = float(np.sqrt(max(0.0, 1.0 - cosines.min() ** 2)))
    detail = f"n={n}, r={r}"
    return [
        _report("eigensolver-values", value_error, 1e-8, detail),
        _report("eigensolver-subspace", angle_error, 1e-6, detail),
    ]


def filter_suites(scale: int, rng: np.random.Generator, perturb: float) -> List[SuiteReport]:
    n = min(scale, 40)
    r = max(1, n // 4)
    L = dense_laplacian_of(random_connected_graph(n, rng))
    basis, w, V = oracle_basis(L, r)
    bank = FilterBank(basis)

    lam1 = basis.eigengap
    u0, U = basis.u0, basis.U
    K1 = np.outer(u0, u0)
    K2 = lam1 * (U / basis.lambdas) @ U.T
    K3 = lam1 * (np.eye(n) - K1 - U @ U.T)
    X = rng.normal(size=(n, 5))
    W = [rng.normal(size=(5, 3)) for _ in range(3)]
    dense = K1 @ X @ W[0] + K2 @ X @ W[1] + K3 @ X @ W[2]
    fast = feature_map(bank, X, *W) + perturb
    filter_error = float(np.linalg.norm(fast - dense) / np.linalg.norm(dense))

    pinv = (V[:, 1:] / w[1:]) @ V[:, 1:].T
    gap = np.linalg.norm(pinv - (K2 + perturb) / lam1, 2)
    pinv_error = float(abs(gap - 1.0 / w[r + 1]))
    detail = f"n={n}, r={r}"
    return [
        _report("filters", filter_error, 1e-10, detail),
        _report("pseudoinverse", pinv_error, 1e-8, detail),
    ]


def _finite_difference(f: Callable[[], float], array: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(array)
    flat, out = array.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + FD_STEP
        up = f()
        flat[i] = old - FD_STEP
        down = f()
        flat[i] = old
        out[i] = (up - down) / (2.0 * FD_STEP)
    return grad


def gradient_suite(scale: int, rng: np.random.Generator, perturb: float) -> SuiteReport:
    n = min(scale, 30)
    d, h, m = 4, 5, 3
    r = max(1, n // 5)
    L = dense_laplacian_of(random_connected_graph(n, rng))
    bank = FilterBank(oracle_basis(L, r)[0])
    X0 = rng.normal(size=(n, d))
    labels = rng.integers(m, size=n)
    labels[:m] = np.arange(m)
    split = Split(train_idx=np.arange(n // 2), labels=labels, m=m)
    params = init_params(d, h, m, rng)
    params.b1[:] = rng.normal(scale=0.1, size=h)
    params.b2[:] = rng.normal(scale=0.1, size=m)
    P = precompute(bank, X0)

    def objective() -> float:
        return loss(forward_cache(bank, X0, params, None, P).logits, split)

    grads: ModelParams = backward(bank, P, params, split, forward_cache(bank, X0, params, None, P))
    worst = 0.0
    for array, grad in zip(params.arrays(), grads.arrays()):
        numeric = _finite_difference(objective, array)
        analytic = grad + perturb
        scale_ = max(np.linalg.norm(numeric), 1e-8)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale_))
    return _report("gradients", worst, 1e-4, f"n={n}, d={d}, h={h}, m={m}")


def hypergraph_suite(scale: int, rng: np.random.Generator, perturb: float) -> SuiteReport:
    n = min(scale, 60)
    m_e = min(8, n // 3)
    hg = random_hypergraph(n, m_e, rng)
    r = hg.m_e - 1
    basis = hypergraph_spectral_basis(hg, r)
    w, _ = dense_eig_oracle(dense_laplacian(hg))
    ones = int(np.sum(np.abs(w - 1.0) <= 1e-10))
    spectrum_error = float(np.abs(basis.lambdas + perturb - w[1:r + 1]).max())
    if ones != n - hg.m_e:
        spectrum_error = max(spectrum_error, 1.0)
    detail = f"n={n}, |E|={hg.m_e}, unit eigenvalues {ones} (expected {n - hg.m_e})"
    return _report("hypergraph", spectrum_error, 1e-10, detail)


# name, runner, minimum scale
SUITES = (
    ("eigensolver", eigensolver_suites, 10),
    ("filters", filter_suites, 6),
    ("gradients", gradient_suite, 6),
    ("hypergraph", hypergraph_suite, 9),
)


def run_oracle_suites(scale: int = DEFAULT_SCALE, seed: int = 0,
                      perturb: float = 0.0) -> List[SuiteReport]:
    """Run every suite at sizes up to `scale`; too-small scales skip suites."""
    rng = np.random.default_rng(seed)
    reports: List[SuiteReport] = []
    for name, suite, minimum in SUITES:
        if scale < minimum:
            logger.warning("Skipping %s suite: scale %d below minimum %d", name, scale, minimum)
            reports.append(SuiteReport(name=name, status="skipped",
                                       detail=f"scale {scale} < {minimum}"))
            continue
        outcome = suite(scale, rng, perturb)
        for report in outcome if isinstance(outcome, list) else [outcome]:
            logger.info("%s: %s (error %.3e, tolerance %.1e)", report.name, report.status,
                        report.max_error, report.tolerance)
            reports.append(report)
    return reports


def all_passed(reports: List[SuiteReport]) -> bool:
    """No suite failed (skipped suites do not count as failures)."""
    return all(r.status != "fail" for r in reports)
