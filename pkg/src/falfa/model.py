"""Two-hidden-layer ReLU classifier with a 2-way softmax head, trained by
mini-batch SGD on cross-entropy.  Plain numpy, float64 throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

HIDDEN = 128
PROB_EPS = 1e-7
BLOCKS = ("W1", "b1", "W2", "b2", "W3", "b3")


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        if self.W3.shape[1] != 2 or self.b3.shape != (2,):
            raise ValueError("output layer must have exactly 2 units")

    @property
    def n_features(self) -> int:
        return self.W1.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in BLOCKS}

    def copy(self) -> "MlpModel":
        return MlpModel(**{k: v.copy() for k, v in self.params().items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.params().values())


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 400
    learning_rate: float = 0.01
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError(f"invalid training config {self}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))


def _layer(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)  # He-uniform, suited to ReLU
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_model(m: int, seed: int) -> MlpModel:
    """Fan-in scaled uniform weights, zero biases; deterministic in `seed`."""
    if m < 1:
        raise ValueError("model needs at least one input feature")
    rng = np.random.default_rng(seed)
    return MlpModel(
        W1=_layer(rng, m, HIDDEN), b1=np.zeros(HIDDEN),
        W2=_layer(rng, HIDDEN, HIDDEN), b2=np.zeros(HIDDEN),
        W3=_layer(rng, HIDDEN, 2), b3=np.zeros(2),
    )


def softmax(logits) -> np.ndarray:
    """Softmax over the last axis with max subtraction."""
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def clamp_probs(p) -> np.ndarray:
    return np.clip(np.asarray(p, dtype=float), PROB_EPS, 1.0 - PROB_EPS)


def _check_pair(p, y):
    p = clamp_probs(p)
    y = np.asarray(y, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: p {p.shape} vs y {y.shape}")
    return p, y


def cross_entropy_paper(p, y) -> float:
    """Mean of ``y * (-log p + log(1 - p))``.

    This is the label-dependent part of binary cross-entropy only; it is the
    form whose coefficient on y feeds the label-flip LP.
    """
    p, y = _check_pair(p, y)
    return float(np.mean(y * (-np.log(p) + np.log1p(-p))))


def cross_entropy_standard(p, y) -> float:
    """Mean of ``-y log p - (1 - y) log(1 - p)``."""
    p, y = _check_pair(p, y)
    return float(np.mean(-y * np.log(p) - (1.0 - y) * np.log1p(-p)))


def logits(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got shape {X.shape}")
    h1 = np.maximum(X @ model.W1 + model.b1, 0.0)
    h2 = np.maximum(h1 @ model.W2 + model.b2, 0.0)
    return h2 @ model.W3 + model.b3


def predict_proba(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Positive-class probability per row, clamped to [1e-7, 1 - 1e-7]."""
    return clamp_probs(softmax(logits(model, X))[:, 1])


def evaluate_accuracy(model: MlpModel, X: np.ndarray, y) -> float:
    y = np.asarray(y)
    if len(y) == 0:
        return float("nan")
    return float(np.mean((predict_proba(model, X) >= 0.5).astype(int) == y))


def loss_and_grads(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean standard cross-entropy of a batch and its gradient per parameter block."""
    h1 = np.maximum(X @ model.W1 + model.b1, 0.0)
    h2 = np.maximum(h1 @ model.W2 + model.b2, 0.0)
    z = h2 @ model.W3 + model.b3
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(y))
    loss = float(np.mean(logsum - z[rows, y]))

    dz = np.exp(z - logsum[:, None])
    dz[rows, y] -= 1.0
    dz /= len(y)
    g = {"W3": h2.T @ dz, "b3": dz.sum(axis=0)}
    dh = dz @ model.W3.T
    dh *= h2 > 0
    g["W2"] = h1.T @ dh
    g["b2"] = dh.sum(axis=0)
    dh = dh @ model.W2.T
    dh *= h1 > 0
    g["W1"] = X.T @ dh
    g["b1"] = dh.sum(axis=0)
    return loss, g


def train(model: MlpModel, X, y, cfg: TrainConfig,
          callback: Callable[[int, MlpModel], None] | None = None) -> MlpModel:
    """Mini-batch SGD for exactly ``cfg.max_epochs`` epochs.

    The input model is not modified.  The shuffle order is drawn from
    ``cfg.seed``, so results are reproducible.  `callback(epoch, model)` is
    called after every epoch.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != len(y):
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)}")
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    model = model.copy()
    params = model.params()
    rng = np.random.default_rng(cfg.seed)
    n, bs, lr = len(y), cfg.batch_size, cfg.learning_rate
    full_batch = bs >= n
    for epoch in range(cfg.max_epochs):
        order = np.arange(n) if full_batch else rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = loss_and_grads(model, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch offset {start}")
            for k, g in grads.items():
                params[k] -= lr * g
        if callback is not None:
            callback(epoch, model)
    return model


def save_model(model: MlpModel, path: str | Path) -> None:
    blocks = [{"name": k, "shape": list(v.shape), "data": v.ravel().tolist()}
              for k, v in model.params().items()]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps({"format": "mlp-v1", "blocks": blocks}))


def load_model(path: str | Path) -> MlpModel:
    doc = json.loads(Path(path).read_text())
    blocks = {b["name"]: np.array(b["data"], dtype=float).reshape(b["shape"])
              for b in doc["blocks"]}
    missing = set(BLOCKS) - set(blocks)
    if missing:
        raise ValueError(f"checkpoint missing blocks {sorted(missing)}")
    return MlpModel(**{k: blocks[k] for k in BLOCKS})
