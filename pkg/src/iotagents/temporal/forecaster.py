"""Scikit-learn style wrapper around the grid-LSTM trainer."""

from __future__ import annotations

from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ..validation import as_float_array
from .model import GridLstmModel
from .training import TrainConfig, predict_batch, train_on_windows


class GridLstmForecaster(BaseEstimator, RegressorMixin):
    """One-step-ahead forecaster over (n_samples, window, n_features) arrays.

    fit/predict operate on already-normalized windows, which keeps the
    estimator composable with sklearn model selection utilities.
    """

    def __init__(
        self,
        hidden_size: int = 32,
        layers: int = 2,
        epochs: int = 200,
        learning_rate: float = 1e-3,
        weight_decay: float = 1e-5,
        batch_size: int = 200,
        share_decoder: bool = False,
        validation_fraction: float = 0.1,
        patience: int | None = None,
        seed: int = 0,
    ):
        self.hidden_size = hidden_size
        self.layers = layers
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.share_decoder = share_decoder
        self.validation_fraction = validation_fraction
        self.patience = patience
        self.seed = seed

    def _config(self, window: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            window=window,
            seed=self.seed,
            hidden_size=self.hidden_size,
            layers=self.layers,
            share_decoder=self.share_decoder,
            patience=self.patience,
        )

    def fit(self, X, y):
        X = as_float_array(X, "X")
        y = as_float_array(y, "y")
        if X.ndim != 3:
            raise ValueError(f"X must be (n_samples, window, n_features), got {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on sample count")
        n_val = int(round(self.validation_fraction * X.shape[0]))
        split = X.shape[0] - n_val
        result = train_on_windows(
            X[:split], y[:split], X[split:], y[split:], self._config(X.shape[1])
        )
        self.model_ = result.model
        self.history_ = result.history
        self.val_history_ = result.val_history
        return self

    def predict(self, X):
        model = self._fitted()
        X = as_float_array(X, "X")
        if X.ndim != 3:
            raise ValueError(f"X must be (n_samples, window, n_features), got {X.shape}")
        return predict_batch(model, X)

    def _fitted(self) -> GridLstmModel:
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError("fit must be called before predict")
        return model
