"""
Exception hierarchy for the Pseudoinverse GCN toolkit.
"""
from typing import Optional, Sequence


class PinvGCNError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(PinvGCNError):
    """Invalid configuration value, schema or experiment file."""


class ParseError(PinvGCNError):
    """Malformed input file."""

    def __init__(self, path: str, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class DimensionMismatch(PinvGCNError, ValueError):
    """Operand shapes do not conform."""


class ScaleGuardError(PinvGCNError, ValueError):
    """A dense oracle was asked to materialize a problem above its size limit."""


class IsolatedNode(PinvGCNError):
    """A node has zero degree."""

    def __init__(self, node: int, message: Optional[str] = None):
        self.node = int(node)
        super().__init__(message or f"node {node} has zero degree")


class DisconnectedGraph(PinvGCNError):
    """The graph has more than one connected component."""


class NoConvergence(PinvGCNError):
    """The eigensolver hit its restart limit."""

    def __init__(self, restarts: int, residuals: Sequence[float]):
        self.restarts = restarts
        self.residuals = [float(x) for x in residuals]
        worst = max(self.residuals) if self.residuals else float("nan")
        super().__init__(
            f"no convergence after {restarts} restarts (worst residual {worst:.3e})"
        )


class NumericallyDisconnected(PinvGCNError):
    """Smallest nonzero eigenvalue is indistinguishable from zero."""


class EmptyHypergraph(PinvGCNError):
    """All hyperedges were pruned."""


class RankTooLarge(PinvGCNError, ValueError):
    """Requested rank exceeds what the problem allows."""


class RankDeficient(PinvGCNError):
    """The normalized incidence matrix does not have the required rank."""


class NonFiniteLoss(PinvGCNError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, epoch: int, value: float):
        self.epoch = epoch
        self.value = value
        super().__init__(f"non-finite loss {value} at epoch {epoch}")


class ClassTooSmall(PinvGCNError):
    """A class has fewer samples than requested for training."""


class EmptyEvaluationSet(PinvGCNError):
    """Every node is in the training set; nothing left to evaluate."""


class MissingCheckpoint(PinvGCNError):
    """Expected checkpoint files are absent."""
