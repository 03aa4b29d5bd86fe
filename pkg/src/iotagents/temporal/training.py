"""Training loop: minibatch MSE with adaptive moments and decoupled decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..numerics import regression_metrics
from ..validation import as_float_array
from .model import GridLstmModel, _as_tensors, _forward_tape, init_model

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 200
    window: int = 12
    seed: int = 0
    hidden_size: int = 32
    layers: int = 2
    share_decoder: bool = False
    patience: int | None = None  # early stop on stalled validation loss

    def __post_init__(self):
        for name in ("epochs", "batch_size", "window", "hidden_size", "layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be nonnegative")


@dataclass
class TrainResult:
    model: GridLstmModel
    history: list = field(default_factory=list)  # per-epoch train MSE
    val_history: list = field(default_factory=list)
    best_epoch: int = 0


class _Adam:
    def __init__(self, params: dict, lr: float, weight_decay: float):
        self.lr = lr
        self.weight_decay = weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = ADAM_BETAS
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for key, grad in grads.items():
            self.m[key] = b1 * self.m[key] + (1 - b1) * grad
            self.v[key] = b2 * self.v[key] + (1 - b2) * grad**2
            m_hat = self.m[key] / bias1
            v_hat = self.v[key] / bias2
            params[key] -= self.lr * (
                m_hat / (np.sqrt(v_hat) + ADAM_EPS) + self.weight_decay * params[key]
            )


def batch_loss(model: GridLstmModel, windows: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error only; cheaper than a full gradient pass."""
    out = _forward_tape(_as_tensors(model.params), windows, model)
    err = out["prediction"].value[:, 0] - targets
    return float(np.mean(err**2))


def batch_loss_and_grads(model: GridLstmModel, windows: np.ndarray, targets: np.ndarray):
    """Mean squared error over a batch plus gradients for every parameter."""
    tensors = _as_tensors(model.params)
    out = _forward_tape(tensors, windows, model)
    err = out["prediction"] - ad.Tensor(targets[:, None])
    loss = ad.mean(ad.mul(err, err))
    loss.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.value))
             for k, t in tensors.items()}
    return float(loss.value), grads


def predict_batch(model: GridLstmModel, windows: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Normalized-scale predictions for (B, T, N) windows, in fixed order."""
    outs = []
    for start in range(0, windows.shape[0], chunk):
        part = windows[start : start + chunk]
        res = _forward_tape(_as_tensors(model.params), part, model)
        outs.append(res["prediction"].value[:, 0])
    return np.concatenate(outs) if outs else np.zeros(0)


def train_on_windows(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    target_norm=None,
) -> TrainResult:
    """Fit on pre-built windows; the best-validation snapshot is returned."""
    x_train = as_float_array(x_train, "x_train")
    y_train = as_float_array(y_train, "y_train")
    x_val = as_float_array(x_val, "x_val")
    y_val = as_float_array(y_val, "y_val")
    if x_train.ndim != 3 or x_train.shape[0] == 0:
        raise ValueError("x_train must be a nonempty (B, T, N) array")

    model = init_model(
        n_features=x_train.shape[2],
        hidden_size=cfg.hidden_size,
        layers=cfg.layers,
        share_decoder=cfg.share_decoder,
        seed=cfg.seed,
    )
    model.target_norm = target_norm
    optimizer = _Adam(model.params, cfg.learning_rate, cfg.weight_decay)
    shuffle_rng = np.random.default_rng(cfg.seed + 1)

    n = x_train.shape[0]
    best_val = np.inf
    best_params = {k: v.copy() for k, v in model.params.items()}
    best_epoch = 0
    history: list[float] = []
    val_history: list[float] = []
    stall = 0

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = batch_loss_and_grads(model, x_train[idx], y_train[idx])
            optimizer.step(model.params, grads)
            total += loss * idx.size
        history.append(total / n)

        if x_val.shape[0]:
            val_pred = predict_batch(model, x_val)
            val_loss = float(np.mean((val_pred - y_val) ** 2))
        else:
            val_loss = history[-1]
        val_history.append(val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in model.params.items()}
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if cfg.patience is not None and stall >= cfg.patience:
                break

    model.params = best_params
    return TrainResult(
        model=model, history=history, val_history=val_history, best_epoch=best_epoch
    )


def train(dataset, cfg: TrainConfig) -> TrainResult:
    """Fit against a TimeSeriesDataset's train/validation splits."""
    splits = dataset.window_splits(cfg.window)
    if splits["train"][0].shape[0] == 0:
        raise ValueError("dataset provides fewer samples than one window")
    x_train, y_train = splits["train"]
    x_val, y_val = splits["val"]
    return train_on_windows(
        x_train, y_train, x_val, y_val, cfg, target_norm=dataset.target_norm()
    )


def evaluate(model: GridLstmModel, windows: np.ndarray, targets: np.ndarray):
    """Regression report of normalized-scale predictions vs targets."""
    preds = predict_batch(model, windows)
    return regression_metrics(targets, preds)
