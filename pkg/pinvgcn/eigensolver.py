"""
Eigensolvers for the informative part of the Laplacian spectrum.

The r smallest nonzero eigenpairs of L_sym are obtained as the r largest
eigenpairs of the deflated signless operator I + Â - 2 u0 u0ᵀ, computed with
a Lanczos process using full reorthogonalization and Krylov-Schur (thick)
restarts. A cyclic Jacobi solver provides an independent dense oracle.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from pinvgcn.errors import (
    ConfigError,
    DimensionMismatch,
    NoConvergence,
    NumericallyDisconnected,
    RankTooLarge,
    ScaleGuardError,
)
from pinvgcn.graphs import LaplacianOperator, signless_operator, unit_degree_vector
from pinvgcn.models import EigSolveConfig

logger = logging.getLogger(__name__)

ORACLE_LIMIT = 500
BASIS_FORMAT_VERSION = 1

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Trivial eigenvector u0 plus the r smallest nonzero eigenpairs of L_sym."""
    u0: np.ndarray
    lambdas: np.ndarray
    U: np.ndarray
    tol: float
    residuals: np.ndarray

    def __post_init__(self):
        n, r = self.U.shape
        if self.u0.shape != (n,) or self.lambdas.shape != (r,) or self.residuals.shape != (r,):
            raise DimensionMismatch("inconsistent spectral basis shapes")
        if r < 1:
            raise ConfigError("spectral basis needs rank >= 1")
        for array in (self.u0, self.lambdas, self.U, self.residuals):
            array.setflags(write=False)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def r(self) -> int:
        return self.U.shape[1]

    @property
    def eigengap(self) -> float:
        return float(self.lambdas[0])


def _as_block(n: int, lock: Optional[np.ndarray]) -> np.ndarray:
    if lock is None:
        return np.zeros((n, 0))
    return np.asarray(lock, dtype=np.float64).reshape(n, -1)


def _orthogonalize(w: np.ndarray, V: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Two passes of classical Gram-Schmidt against V and the locked block L."""
    for _ in range(2):
        if L.shape[1]:
            w = w - L @ (L.T @ w)
        if V.shape[1]:
            w = w - V @ (V.T @ w)
    return w


def _random_unit(n: int, rng: np.random.Generator, V: np.ndarray, L: np.ndarray) -> np.ndarray:
    w = _orthogonalize(rng.uniform(-1.0, 1.0, n), V, L)
    return w / np.linalg.norm(w)


def _thick_restart_lanczos(apply: Operator, n: int, r: int, cfg: EigSolveConfig,
                           L: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    space = n - L.shape[1]
    m = min(cfg.subspace_size(r), space)
    if m <= r and m < space:
        raise ConfigError(f"max_subspace {m} must exceed rank {r}")
    keep = min(r + max(1, math.ceil(0.25 * r)), m - 1)
    rng = np.random.default_rng(cfg.seed)

    V = np.zeros((n, m + 1))
    T = np.zeros((m, m))
    V[:, 0] = _random_unit(n, rng, V[:, :0], L)
    k = 0
    beta = 0.0
    scale = 1.0
    resid = np.full(r, np.inf)

    for restart in range(cfg.max_restarts + 1):
        for j in range(k, m):
            w = apply(V[:, j])
            h = V[:, :j + 1].T @ w
            w = w - V[:, :j + 1] @ h
            if L.shape[1]:
                w = w - L @ (L.T @ w)
            correction = V[:, :j + 1].T @ w
            w = w - V[:, :j + 1] @ correction
            if L.shape[1]:
                w = w - L @ (L.T @ w)
            h = h + correction
            T[:j + 1, j] = h
            T[j, :j + 1] = h
            scale = max(scale, float(np.abs(h).max()))
            beta = float(np.linalg.norm(w))
            if j + 1 == m:
                V[:, m] = w / beta if beta > 0 else 0.0
                break
            if beta <= 1e-12 * scale:
                # invariant subspace: continue with a fresh direction
                V[:, j + 1] = _random_unit(n, rng, V[:, :j + 1], L)
                T[j + 1, j] = T[j, j + 1] = 0.0
            else:
                V[:, j + 1] = w / beta
                T[j + 1, j] = T[j, j + 1] = beta

        theta, S = np.linalg.eigh(T)
        order = np.argsort(theta)[::-1]
        theta, S = theta[order], S[:, order]
        coupling = beta * S[m - 1, :]
        resid = np.abs(coupling[:r])
        bound = cfg.tol * np.maximum(1.0, np.abs(theta[:r]))
        converged = int(np.sum(resid <= bound))
        logger.debug("restart %d: %d/%d Ritz pairs converged", restart, converged, r)

        if converged == r or m == space:
            logger.debug("Lanczos converged after %d restarts (subspace %d)", restart, m)
            return theta[:r].copy(), V[:, :m] @ S[:, :r]

        V[:, :keep] = V[:, :m] @ S[:, :keep]
        V[:, keep] = V[:, m]
        T[:] = 0.0
        T[np.arange(keep), np.arange(keep)] = theta[:keep]
        T[:keep, keep] = coupling[:keep]
        T[keep, :keep] = coupling[:keep]
        k = keep

    raise NoConvergence(cfg.max_restarts, resid)


def largest_eigenpairs(apply: Operator, n: int, r: int, cfg: EigSolveConfig,
                       lock: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Largest eigenpairs of a symmetric operator by thick-restart Lanczos.

    A single Krylov sequence sees one vector of each eigenspace, so after
    convergence the orthogonal complement of the converged block is searched
    for its largest eigenpair. Whenever that beats the r-th Ritz value the
    block is extended by Rayleigh-Ritz and the search repeats.

    Args:
        apply: Symmetric operator acting on length-n vectors
        n: Dimension
        r: Number of wanted eigenpairs
        cfg: Solver settings
        lock: Optional unit vector (or orthonormal columns) known to span an
            invariant subspace; the search is restricted to its complement

    Returns:
        (mu, V) with mu descending (length r) and V an n x r orthonormal block

    Raises:
        RankTooLarge: if r exceeds the searchable dimension
        NoConvergence: after cfg.max_restarts restarts without convergence
    """
    L = _as_block(n, lock)
    space = n - L.shape[1]
    if r < 1 or r >= n or r > space:
        raise RankTooLarge(f"cannot compute {r} eigenpairs in dimension {n}")
    mu, X = _thick_restart_lanczos(apply, n, r, cfg, L)

    for extension in range(2 * r + 1):
        if space - r == 0:
            break
        try:
            nu, y = _thick_restart_lanczos(apply, n, 1, cfg, np.hstack([L, X]))
        except NoConvergence:
            logger.warning("Multiplicity check did not converge; keeping %d Ritz pairs", r)
            break
        if nu[0] <= mu[-1] + 10.0 * cfg.tol * max(1.0, abs(mu[-1])):
            break
        logger.info("Found missed eigenvalue %.10g above %.10g; extending the block",
                    nu[0], mu[-1])
        Q = np.hstack([X, y])
        AQ = np.column_stack([apply(Q[:, i]) for i in range(r + 1)])
        H = Q.T @ AQ
        theta, S = np.linalg.eigh(0.5 * (H + H.T))
        order = np.argsort(theta)[::-1][:r]
        mu, X = theta[order], Q @ S[:, order]
    else:
        logger.warning("Multiplicity check stopped after %d extensions", 2 * r + 1)

    logger.info("Lanczos found %d eigenpairs (largest %.6g, smallest %.6g)", r, mu[0], mu[-1])
    return mu, X


def spectral_basis(op: LaplacianOperator, r: int, cfg: EigSolveConfig) -> SpectralBasis:
    """
    The r smallest nonzero Laplacian eigenpairs via the deflated signless operator.

    Raises:
        NumericallyDisconnected: if the recovered eigengap is at most cfg.tol
    """
    if r < 1 or r + 1 > op.n:
        raise RankTooLarge(f"rank {r} needs 1 <= r <= n - 1 = {op.n - 1}")
    u0 = unit_degree_vector(op.degrees)
    mu, U = largest_eigenpairs(signless_operator(op, u0), op.n, r, cfg, lock=u0)
    lambdas = 2.0 - mu
    order = np.argsort(lambdas, kind="stable")
    lambdas, U = lambdas[order], np.asfortranarray(U[:, order])
    if lambdas[0] <= cfg.tol:
        raise NumericallyDisconnected(
            f"smallest nonzero eigenvalue {lambdas[0]:.3e} is below tolerance {cfg.tol:.1e}"
        )
    LU = U - op.apply(U)
    residuals = np.linalg.norm(LU - U * lambdas, axis=0)
    logger.info("Spectral basis: n=%d, r=%d, eigengap %.6f, max residual %.2e",
                op.n, r, lambdas[0], residuals.max())
    return SpectralBasis(u0=u0, lambdas=lambdas, U=U, tol=cfg.tol, residuals=residuals)


def _round_robin(n: int):
    """Pairings of the cyclic-by-rounds Jacobi ordering; each round is disjoint."""
    players = list(range(n + (n % 2)))
    half = len(players) // 2
    for _ in range(len(players) - 1):
        pairs = [(players[i], players[-1 - i]) for i in range(half)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        if pairs:
            p, q = np.array(pairs).T
            yield p, q
        players = [players[0], players[-1]] + players[1:-1]


def dense_eig_oracle(M: np.ndarray, max_sweeps: int = 60) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full eigendecomposition of a dense symmetric matrix by cyclic Jacobi rotations.

    Rotations on disjoint index pairs are applied together, one round of the
    round-robin ordering at a time.

    Returns:
        (eigenvalues ascending, eigenvectors as columns)
    """
    A = np.array(M, dtype=np.float64)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise DimensionMismatch(f"oracle needs a square matrix, got {A.shape}")
    if n > ORACLE_LIMIT:
        raise ScaleGuardError(f"dense oracle limited to n <= {ORACLE_LIMIT}, got {n}")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    target = 1e-13 * max(np.linalg.norm(A), np.finfo(float).tiny)

    for sweep in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= target:
            break
        for p, q in _round_robin(n):
            apq = A[p, q]
            active = apq != 0.0
            theta = np.where(active, (A[q, q] - A[p, p]) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            Ap, Aq = A[:, p], A[:, q]
            A[:, p], A[:, q] = Ap * c - Aq * s, Ap * s + Aq * c
            Ap, Aq = A[p, :], A[q, :]
            A[p, :], A[q, :] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = Vp * c - Vq * s, Vp * s + Vq * c
    else:
        logger.warning("Jacobi oracle stopped after %d sweeps", max_sweeps)

    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def save_basis(basis: SpectralBasis, path: str) -> None:
    """Write a basis to an .npz container (bit-exact round trip)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(
            f,
            header=np.array([BASIS_FORMAT_VERSION, basis.n, basis.r], dtype=np.int64),
            tol=np.array(basis.tol),
            lambdas=basis.lambdas,
            u0=basis.u0,
            U=np.asfortranarray(basis.U),
            residuals=basis.residuals,
        )
    logger.debug("Saved spectral basis n=%d r=%d to %s", basis.n, basis.r, path)


def load_basis(path: str) -> SpectralBasis:
    """Read a basis written by save_basis."""
    with np.load(path) as data:
        version, n, r = (int(x) for x in data["header"])
        if version != BASIS_FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported basis format version {version}")
        basis = SpectralBasis(
            u0=data["u0"].copy(),
            lambdas=data["lambdas"].copy(),
            U=np.asfortranarray(data["U"]),
            tol=float(data["tol"]),
            residuals=data["residuals"].copy(),
        )
    if basis.n != n or basis.r != r:
        raise ConfigError(f"{path}: header ({n}, {r}) does not match arrays")
    return basis
