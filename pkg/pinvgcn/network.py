"""
Two-layer Pseudoinverse GCN with a hand-written backward pass and Adam.

    X1 = ReLU(sum_k K^(k) X0 W^(1,k) + b1)
    X2 = sum_k K^(k) dropout(X1) W^(2,k) + b2

Dropout acts only between the layers, so the first-layer products K^(k) X0
are computed once per training run.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from pinvgcn.errors import (
    ConfigError,
    DimensionMismatch,
    EmptyEvaluationSet,
    MissingCheckpoint,
    NonFiniteLoss,
)
from pinvgcn.filters import FilterBank, conv_products, feature_map
from pinvgcn.models import TrainConfig

logger = logging.getLogger(__name__)

PARTS = 3
# order of ModelParams.arrays(): W1 (3), b1, W2 (3), b2
WEIGHT_MASK = (True, True, True, False, True, True, True, False)
CHECKPOINT_KEYS = ("W1_1", "W1_2", "W1_3", "b1", "W2_1", "W2_2", "W2_3", "b2")

SeedLike = Union[int, np.random.Generator]
Products = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class ModelParams:
    """Weights W^(l,k) per layer l and filter part k, plus the two biases."""
    W1: List[np.ndarray]
    b1: np.ndarray
    W2: List[np.ndarray]
    b2: np.ndarray

    def __post_init__(self):
        if len(self.W1) != PARTS or len(self.W2) != PARTS:
            raise DimensionMismatch("each layer needs exactly three weight matrices")
        d, h = self.W1[0].shape
        m = self.W2[0].shape[1]
        for W in self.W1:
            if W.shape != (d, h):
                raise DimensionMismatch(f"layer-1 weight shape {W.shape}, expected {(d, h)}")
        for W in self.W2:
            if W.shape != (h, m):
                raise DimensionMismatch(f"layer-2 weight shape {W.shape}, expected {(h, m)}")
        if self.b1.shape != (h,) or self.b2.shape != (m,):
            raise DimensionMismatch("bias shapes do not match weights")

    @property
    def shape(self) -> Tuple[int, int, int]:
        """(d, h, m)"""
        return self.W1[0].shape[0], self.W1[0].shape[1], self.W2[0].shape[1]

    def arrays(self) -> List[np.ndarray]:
        return [*self.W1, self.b1, *self.W2, self.b2]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "ModelParams":
        if len(arrays) != len(WEIGHT_MASK):
            raise DimensionMismatch(f"expected {len(WEIGHT_MASK)} arrays, got {len(arrays)}")
        return cls(W1=list(arrays[0:3]), b1=arrays[3], W2=list(arrays[4:7]), b2=arrays[7])

    def copy(self) -> "ModelParams":
        return ModelParams.from_arrays([a.copy() for a in self.arrays()])


@dataclass(frozen=True, eq=False)
class Split:
    """Training nodes plus the class of every node."""
    train_idx: np.ndarray
    labels: np.ndarray
    m: int

    def __post_init__(self):
        train = np.asarray(self.train_idx, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if train.size == 0:
            raise ConfigError("training set is empty")
        if np.unique(train).size != train.size:
            raise ConfigError("training indices are not distinct")
        if train.min() < 0 or train.max() >= labels.size:
            raise ConfigError("training index out of range")
        if labels.min() < 0 or labels.max() >= self.m:
            raise ConfigError(f"labels must lie in [0, {self.m})")
        object.__setattr__(self, "train_idx", train)
        object.__setattr__(self, "labels", labels)

    @property
    def test_idx(self) -> np.ndarray:
        mask = np.ones(self.labels.size, dtype=bool)
        mask[self.train_idx] = False
        return np.flatnonzero(mask)


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, kept for backprop."""
    Z1: np.ndarray
    X1: np.ndarray
    mask: Optional[np.ndarray]
    logits: np.ndarray


@dataclass
class AdamState:
    """First and second moments per parameter array."""
    m: List[np.ndarray]
    v: List[np.ndarray]

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        arrays = params.arrays()
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays])


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def init_params(d: int, h: int, m: int, seed: SeedLike = 0) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    if min(d, h, m) < 1:
        raise ConfigError(f"dimensions must be positive, got d={d}, h={h}, m={m}")
    rng = _rng(seed)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    W1 = [glorot(d, h) for _ in range(PARTS)]
    W2 = [glorot(h, m) for _ in range(PARTS)]
    return ModelParams(W1=W1, b1=np.zeros(h), W2=W2, b2=np.zeros(m))


def precompute(bank: FilterBank, X0: np.ndarray) -> Products:
    """First-layer products K^(k) X0."""
    return conv_products(bank, X0)


def dropout_mask(shape: Tuple[int, ...], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted dropout: zero with probability rate, survivors scaled by 1/(1-rate)."""
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def forward_cache(bank: FilterBank, X0: np.ndarray, params: ModelParams,
                  mask: Optional[np.ndarray] = None,
                  products: Optional[Products] = None) -> ForwardCache:
    """Forward pass keeping intermediates; mask=None is evaluation mode."""
    P = products if products is not None else precompute(bank, X0)
    if P[0].shape[1] != params.shape[0]:
        raise DimensionMismatch(f"features have {P[0].shape[1]} columns, weights expect {params.shape[0]}")
    Z1 = P[0] @ params.W1[0] + P[1] @ params.W1[1] + P[2] @ params.W1[2] + params.b1
    X1 = np.maximum(Z1, 0.0)
    if mask is not None:
        X1 = X1 * mask
    logits = feature_map(bank, X1, *params.W2) + params.b2
    return ForwardCache(Z1=Z1, X1=X1, mask=mask, logits=logits)


def forward(bank: FilterBank, X0: np.ndarray, params: ModelParams,
            mask: Optional[np.ndarray] = None,
            products: Optional[Products] = None) -> np.ndarray:
    """Logits n x m."""
    return forward_cache(bank, X0, params, mask, products).logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def loss(logits: np.ndarray, split: Split) -> float:
    """Mean cross entropy over the training rows."""
    rows = split.train_idx
    logp = log_softmax(logits[rows])
    return float(-logp[np.arange(rows.size), split.labels[rows]].mean())


def backward(bank: FilterBank, products: Products, params: ModelParams,
             split: Split, cache: ForwardCache) -> ModelParams:
    """Exact gradients of `loss` with respect to every parameter."""
    rows = split.train_idx
    dZ2 = np.zeros_like(cache.logits)
    probs = softmax(cache.logits[rows])
    probs[np.arange(rows.size), split.labels[rows]] -= 1.0
    dZ2[rows] = probs / rows.size

    Q = conv_products(bank, cache.X1)
    dW2 = [Q[k].T @ dZ2 for k in range(PARTS)]
    db2 = dZ2.sum(axis=0)

    # every K^(k) is symmetric
    R = conv_products(bank, dZ2)
    dX1 = R[0] @ params.W2[0].T + R[1] @ params.W2[1].T + R[2] @ params.W2[2].T
    if cache.mask is not None:
        dX1 = dX1 * cache.mask
    dZ1 = dX1 * (cache.Z1 > 0)
    dW1 = [products[k].T @ dZ1 for k in range(PARTS)]
    db1 = dZ1.sum(axis=0)
    return ModelParams(W1=dW1, b1=db1, W2=dW2, b2=db2)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState,
              cfg: TrainConfig, t: int) -> Tuple[ModelParams, AdamState]:
    """
    One Adam update with bias correction.

    Weight decay is coupled: wd * W is added to the gradient of every weight
    matrix before the moments are updated; biases are not decayed.

    Args:
        params: Current parameters
        grads: Loss gradients
        state: Moments from the previous step
        cfg: Learning rate, betas, epsilon, weight decay
        t: Step number, starting at 1

    Returns:
        (updated parameters, updated state)
    """
    new_params, new_m, new_v = [], [], []
    for p, g, m, v, is_weight in zip(params.arrays(), grads.arrays(), state.m, state.v, WEIGHT_MASK):
        if is_weight and cfg.weight_decay:
            g = g + cfg.weight_decay * p
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1 ** t)
        v_hat = v / (1.0 - cfg.beta2 ** t)
        new_params.append(p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon))
        new_m.append(m)
        new_v.append(v)
    return ModelParams.from_arrays(new_params), AdamState(m=new_m, v=new_v)


def _tie(params: ModelParams) -> None:
    params.W1[2] = params.W1[1].copy()
    params.W2[2] = params.W2[1].copy()


def train(bank: FilterBank, X0: np.ndarray, split: Split, cfg: TrainConfig,
          rng: Optional[np.random.Generator] = None,
          products: Optional[Products] = None) -> Tuple[ModelParams, List[float]]:
    """
    Full-batch training for cfg.epochs epochs.

    The generator (seeded with cfg.seed unless given) draws the initial
    weights first and then one dropout mask per epoch.

    Returns:
        (final parameters, training loss per epoch)

    Raises:
        NonFiniteLoss: as soon as an epoch produces a NaN or infinite loss
    """
    X0 = np.asarray(X0, dtype=np.float64)
    if X0.shape[0] != bank.n:
        raise DimensionMismatch(f"features have {X0.shape[0]} rows, graph has {bank.n} nodes")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    params = init_params(X0.shape[1], cfg.hidden, split.m, rng)
    if cfg.tie_high_pass:
        _tie(params)
    P = products if products is not None else precompute(bank, X0)
    state = AdamState.zeros_like(params)
    history: List[float] = []

    for epoch in range(cfg.epochs):
        mask = dropout_mask((bank.n, cfg.hidden), cfg.dropout, rng) if cfg.dropout > 0 else None
        cache = forward_cache(bank, X0, params, mask, P)
        value = loss(cache.logits, split)
        if not np.isfinite(value):
            raise NonFiniteLoss(epoch, value)
        history.append(value)
        grads = backward(bank, P, params, split, cache)
        if cfg.tie_high_pass:
            for layer in (grads.W1, grads.W2):
                layer[1] = layer[2] = layer[1] + layer[2]
        params, state = adam_step(params, grads, state, cfg, epoch + 1)
        if (epoch + 1) % 100 == 0:
            logger.debug("epoch %d: loss %.6f", epoch + 1, value)

    return params, history


def predict(bank: FilterBank, X0: np.ndarray, params: ModelParams,
            products: Optional[Products] = None) -> np.ndarray:
    """Class index per node; ties go to the lowest index."""
    return np.argmax(forward(bank, X0, params, None, products), axis=1)


def evaluate(bank: FilterBank, X0: np.ndarray, params: ModelParams, split: Split,
             products: Optional[Products] = None) -> float:
    """Accuracy on the nodes outside the training set."""
    test = split.test_idx
    if test.size == 0:
        raise EmptyEvaluationSet("every node is a training node")
    predicted = predict(bank, X0, params, products)
    return float(np.mean(predicted[test] == split.labels[test]))


def weight_magnitude_analysis(params: ModelParams) -> Tuple[float, float, float]:
    """Average absolute weight per filter part, averaged over both layers."""
    return tuple(
        0.5 * (float(np.abs(params.W1[k]).mean()) + float(np.abs(params.W2[k]).mean()))
        for k in range(PARTS)
    )


def save_checkpoint(params: ModelParams, path: str) -> None:
    """Shapes plus all parameter arrays in an .npz container."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, shape=np.array(params.shape, dtype=np.int64),
                 **dict(zip(CHECKPOINT_KEYS, params.arrays())))


def load_checkpoint(path: str) -> ModelParams:
    """Read a checkpoint written by save_checkpoint."""
    if not Path(path).exists():
        raise MissingCheckpoint(f"checkpoint not found: {path}")
    with np.load(path) as data:
        params = ModelParams.from_arrays([data[key].copy() for key in CHECKPOINT_KEYS])
        if tuple(int(x) for x in data["shape"]) != params.shape:
            raise ConfigError(f"{path}: stored shape does not match arrays")
    return params
