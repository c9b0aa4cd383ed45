"""Trainers for sign-hash and PQ retrievers over a linear query head."""

from lthkit.lthtrain.config import LossConfig, QueryHead, constant_schedule, sqrt_schedule
from lthkit.lthtrain.losses import (
    LossResult,
    TrainingBatch,
    bpr_loss,
    compute_loss,
    hard_sign,
    infonce_loss,
    jpq_loss,
    margin_mse_from_margins,
    margin_mse_loss,
    rank_loss,
    reconstruct,
    relaxed_hash,
    relaxed_hash_grad,
)
from lthkit.lthtrain.train import (
    TraceRow,
    TrainResult,
    load_params,
    moving_average,
    read_trace,
    save_params,
    train,
    write_trace,
)

__all__ = [
    "LossConfig",
    "LossResult",
    "QueryHead",
    "TraceRow",
    "TrainResult",
    "TrainingBatch",
    "bpr_loss",
    "compute_loss",
    "constant_schedule",
    "hard_sign",
    "infonce_loss",
    "jpq_loss",
    "load_params",
    "margin_mse_from_margins",
    "margin_mse_loss",
    "moving_average",
    "rank_loss",
    "read_trace",
    "reconstruct",
    "relaxed_hash",
    "relaxed_hash_grad",
    "save_params",
    "sqrt_schedule",
    "train",
    "write_trace",
]
