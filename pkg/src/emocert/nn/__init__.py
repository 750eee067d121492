from emocert.nn.architectures import build_model, count_parameters
from emocert.nn.network import ModelSpec, Network, Parameters
from emocert.nn.optim import AdamW, RMSprop, clip_gradients
from emocert.nn.schedules import CosineWarmRestarts, ReduceOnPlateau
from emocert.nn.serialization import load_model, save_model
from emocert.nn.training import (
    EarlyStopping,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    default_train_config,
    train,
    weighted_sample_indices,
)

__all__ = [
    "AdamW",
    "CosineWarmRestarts",
    "EarlyStopping",
    "ModelSpec",
    "Network",
    "Parameters",
    "ReduceOnPlateau",
    "RMSprop",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "build_model",
    "clip_gradients",
    "count_parameters",
    "default_train_config",
    "load_model",
    "save_model",
    "train",
    "weighted_sample_indices",
]
