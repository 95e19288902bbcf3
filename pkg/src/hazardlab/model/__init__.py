"""Attention-MIL / GRU hazard network, its optimizer and training drivers."""

from .network import (
    POOL_HAZARD,
    POOL_LOGIT,
    VARIANTS,
    ModelConfig,
    active_parameters,
    backward,
    backward_batch,
    check_params,
    forward,
    forward_batch,
    init_params,
    pad_bags,
    param_shapes,
    variant_config,
)
from .optim import OptimizerState, nadam_step
from .training import (
    BINARY_HORIZON_MONTHS,
    BinaryRelapseModel,
    Prediction,
    TrainConfig,
    TrainingLog,
    predict,
    predict_arrays,
    pretrain_encoder,
    train,
    train_binary_model,
)

__all__ = [
    "POOL_HAZARD", "POOL_LOGIT", "VARIANTS", "ModelConfig", "active_parameters", "backward",
    "backward_batch", "check_params", "forward", "forward_batch", "init_params", "pad_bags",
    "param_shapes", "variant_config", "OptimizerState", "nadam_step", "BINARY_HORIZON_MONTHS",
    "BinaryRelapseModel", "Prediction", "TrainConfig", "TrainingLog", "predict", "predict_arrays",
    "pretrain_encoder", "train", "train_binary_model",
]
