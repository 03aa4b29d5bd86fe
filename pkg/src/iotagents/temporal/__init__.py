from .forecaster import GridLstmForecaster
from .model import (
    GridLstmModel,
    cross_attention,
    decode,
    encode,
    feature_attention,
    grid_cell_step,
    init_model,
    load_model,
    predict,
    save_model,
)
from .training import (
    TrainConfig,
    TrainResult,
    batch_loss,
    batch_loss_and_grads,
    evaluate,
    predict_batch,
    train,
    train_on_windows,
)

__all__ = [
    "GridLstmForecaster",
    "GridLstmModel",
    "TrainConfig",
    "TrainResult",
    "batch_loss",
    "batch_loss_and_grads",
    "cross_attention",
    "decode",
    "encode",
    "evaluate",
    "feature_attention",
    "grid_cell_step",
    "init_model",
    "load_model",
    "predict",
    "predict_batch",
    "save_model",
    "train",
    "train_on_windows",
]
