"""Binary-cross-entropy training for detector models.

Mini-batch optimization (adam by default, sgd available), per-epoch
seeded shuffling, inverted dropout active only during training. Two runs
with the same seed and data produce bit-identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import StutterKitError
from .graph import ModelGraph, NaNDetected
from .layers import ShapeMismatch

PROB_CLAMP = 1e-7


class EmptyDataset(StutterKitError):
    """Training requested on an empty dataset."""


def bce_loss(p, y) -> float:
    """Mean binary cross entropy; probabilities clamped away from {0, 1}."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_grad(p, y) -> np.ndarray:
    """d(mean BCE)/dp, evaluated at the clamped probabilities."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return ((1.0 - y) / (1.0 - p) - y / p) / p.size


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 30
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "seed": self.seed,
            "threshold": self.threshold,
        }


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params_and_grads) -> None:
        for _key, param, grad in params_and_grads:
            param -= self.lr * grad


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params_and_grads) -> None:
        self.t += 1
        for key, param, grad in params_and_grads:
            m = self._m.setdefault(key, np.zeros_like(param))
            v = self._v.setdefault(key, np.zeros_like(param))
            m += (1.0 - self.beta1) * (grad - m)
            v += (1.0 - self.beta2) * (grad * grad - v)
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(cfg: TrainConfig):
    return Adam(cfg.learning_rate) if cfg.optimizer == "adam" else Sgd(cfg.learning_rate)


def _as_model_input(features, input_shape: tuple[int, ...]) -> np.ndarray:
    values = getattr(features, "values", features)
    x = np.asarray(values, dtype=np.float64)
    if tuple(x.shape) == tuple(input_shape):
        return x
    if input_shape[-1] == 1 and tuple(x.shape) == tuple(input_shape[:-1]):
        return x[..., None]
    raise ShapeMismatch(f"features {x.shape} do not fit model input {input_shape}")


def stack_dataset(dataset, input_shape) -> tuple[np.ndarray, np.ndarray]:
    if not dataset:
        raise EmptyDataset("no training examples")
    xs, ys = [], []
    for features, label in dataset:
        if label not in (0, 1):
            raise ValueError(f"labels must be 0/1, got {label!r}")
        xs.append(_as_model_input(features, input_shape))
        ys.append(float(label))
    return np.stack(xs), np.asarray(ys)


def train(model: ModelGraph, dataset, cfg: TrainConfig) -> TrainReport:
    """Initialize weights from cfg.seed and run mini-batch training."""
    x, y = stack_dataset(dataset, model.input_shape)
    rng = np.random.default_rng(cfg.seed)
    model.init_params(rng)
    optimizer = make_optimizer(cfg)
    report = TrainReport()

    n = len(y)
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            out = model.forward(xb, training=True, rng=rng)
            p = out.ravel()
            loss = bce_loss(p, yb)
            if not np.isfinite(loss):
                raise NaNDetected("non-finite training loss")
            model.zero_grads()
            model.backward(bce_grad(p, yb).reshape(out.shape))
            optimizer.step(
                (key, param, grad)
                for (key, param), (_k, grad) in zip(model.parameters(), model.gradients())
            )
            epoch_loss += loss * len(yb)
            correct += int(np.sum((p >= cfg.threshold) == (yb == 1.0)))
        report.losses.append(epoch_loss / n)
        report.accuracies.append(correct / n)
    return report


def predict(model: ModelGraph, features) -> float:
    """Deterministic single-example probability (dropout disabled)."""
    x = _as_model_input(features, model.input_shape)
    return float(model.forward(x[None], training=False).ravel()[0])


def predict_batch(model: ModelGraph, batch: np.ndarray) -> np.ndarray:
    return model.forward(batch, training=False).ravel()


def evaluate(model: ModelGraph, x: np.ndarray, y: np.ndarray, threshold: float = 0.5) -> dict:
    """accuracy / precision / recall of thresholded predictions."""
    p = predict_batch(model, x)
    calls = p >= threshold
    actual = np.asarray(y) == 1.0
    tp = int(np.sum(calls & actual))
    fp = int(np.sum(calls & ~actual))
    fn = int(np.sum(~calls & actual))
    return {
        "accuracy": float(np.mean(calls == actual)),
        "precision": tp / (tp + fp) if tp + fp else 0.0,
        "recall": tp / (tp + fn) if tp + fn else 0.0,
    }
