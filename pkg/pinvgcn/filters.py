"""
Three-part pseudoinverse filter basis in factored form.

K1 = u0 u0ᵀ (zero impulse), K2 = λ1 U_r Λ_r^{-1} U_rᵀ (low-rank pseudoinverse),
K3 = λ1 (I - u0 u0ᵀ - U_r U_rᵀ) (high-pass). Only the factors are stored; every
product costs O(n r c).
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from pinvgcn.csv_handler import CSVHandler
from pinvgcn.eigensolver import SpectralBasis
from pinvgcn.errors import DimensionMismatch, ScaleGuardError

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
ArrayOrScalar = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Factors of the three convolution matrices."""
    basis: SpectralBasis
    scaling: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        scaling = self.basis.eigengap / self.basis.lambdas
        scaling[0] = 1.0
        scaling.setflags(write=False)
        object.__setattr__(self, "scaling", scaling)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def eigengap(self) -> float:
        return self.basis.eigengap


def _check_rows(bank: FilterBank, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != bank.n:
        raise DimensionMismatch(f"operand has {X.shape[0]} rows, filter bank has {bank.n}")
    return X


def filter_value(alpha: float, beta: float, gamma: float,
                 basis: SpectralBasis, lam: ArrayOrScalar) -> ArrayOrScalar:
    """Response of the low-rank filter with coefficients (alpha, beta, gamma) at λ."""
    lam_arr = np.asarray(lam, dtype=np.float64)
    lam1, lam_r = basis.eigengap, float(basis.lambdas[-1])
    safe = np.where(lam_arr == 0.0, 1.0, lam_arr)
    value = np.where(lam_arr == 0.0, alpha,
                     np.where(lam_arr <= lam_r, lam1 * beta / safe, lam1 * gamma))
    return float(value) if value.ndim == 0 else value


def pinv_filter_value(alpha: float, beta: float, basis: SpectralBasis,
                      lam: ArrayOrScalar) -> ArrayOrScalar:
    """Full-rank response: alpha at 0, λ1 β / λ elsewhere."""
    lam_arr = np.asarray(lam, dtype=np.float64)
    safe = np.where(lam_arr == 0.0, 1.0, lam_arr)
    value = np.where(lam_arr == 0.0, alpha, basis.eigengap * beta / safe)
    return float(value) if value.ndim == 0 else value


def filter_response(alpha: float, beta: float, gamma: float, basis: SpectralBasis,
                    grid: np.ndarray) -> np.ndarray:
    """Low-rank filter sampled on a λ grid."""
    return np.asarray(filter_value(alpha, beta, gamma, basis, np.asarray(grid)), dtype=np.float64)


def export_filter_response(path: str, alpha: float, beta: float, gamma: float,
                           basis: SpectralBasis, points: int = 401) -> None:
    """Write `lambda,phi` samples on [0, 2] plus the exact eigenvalue knots."""
    grid = np.union1d(np.linspace(0.0, 2.0, points), basis.lambdas)
    values = filter_response(alpha, beta, gamma, basis, grid)
    CSVHandler.write_csv(path, ["lambda", "phi"],
                         [[repr(float(x)), repr(float(y))] for x, y in zip(grid, values)])
    logger.info("Wrote filter response (%d samples) to %s", grid.size, path)


def _scale_rows(scale: np.ndarray, B: np.ndarray) -> np.ndarray:
    return scale[:, None] * B if B.ndim == 2 else scale * B


def conv_products(bank: FilterBank, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(K1 X, K2 X, K3 X) sharing the projections u0ᵀX and U_rᵀX."""
    X = _check_rows(bank, X)
    basis = bank.basis
    a = basis.u0 @ X
    B = basis.U.T @ X
    p1 = np.multiply.outer(basis.u0, a)
    p2 = basis.U @ _scale_rows(bank.scaling, B)
    p3 = bank.eigengap * (X - p1 - basis.U @ B)
    return p1, p2, p3


def conv_apply(bank: FilterBank, k: int, X: np.ndarray) -> np.ndarray:
    """Apply K^(k) (k in 1, 2, 3) to a vector or n x c block."""
    X = _check_rows(bank, X)
    basis = bank.basis
    if k == 1:
        return np.multiply.outer(basis.u0, basis.u0 @ X)
    if k == 2:
        B = basis.U.T @ X
        return basis.U @ _scale_rows(bank.scaling, B)
    if k == 3:
        return bank.eigengap * (X - np.multiply.outer(basis.u0, basis.u0 @ X)
                                - basis.U @ (basis.U.T @ X))
    raise ValueError(f"filter part must be 1, 2 or 3, got {k}")


def feature_map(bank: FilterBank, X: np.ndarray, W1: np.ndarray,
                W2: np.ndarray, W3: np.ndarray) -> np.ndarray:
    """
    Sum over k of K^(k) X W^(k), evaluated from the factors.

    Y = u0 ((u0ᵀX) W1 - λ1 u0ᵀ(X W3)) + λ1 U_r (Λ_r^{-1}(U_rᵀX) W2 - U_rᵀ(X W3)) + λ1 X W3
    """
    X = _check_rows(bank, X)
    if not (W1.shape == W2.shape == W3.shape) or W1.shape[0] != X.shape[1]:
        raise DimensionMismatch(
            f"weights {W1.shape}, {W2.shape}, {W3.shape} do not conform to input {X.shape}"
        )
    basis = bank.basis
    lam1 = bank.eigengap
    XW3 = X @ W3
    zero_impulse = (basis.u0 @ X) @ W1 - lam1 * (basis.u0 @ XW3)
    low_rank = (basis.lambdas[:, None] ** -1 * (basis.U.T @ X)) @ W2 - basis.U.T @ XW3
    return np.outer(basis.u0, zero_impulse) + lam1 * (basis.U @ low_rank) + lam1 * XW3


def dense_conv_matrix(bank: FilterBank, k: int) -> np.ndarray:
    """Explicit K^(k); tests and oracle checks only."""
    if bank.n > DENSE_LIMIT:
        raise ScaleGuardError(f"dense convolution matrix limited to n <= {DENSE_LIMIT}")
    return conv_apply(bank, k, np.eye(bank.n))
