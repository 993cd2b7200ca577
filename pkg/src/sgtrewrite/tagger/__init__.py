"""Multi-task sequence tagger: encoder, speaker-aware concatenation, three
linear heads, weighted cross-entropy training."""

from .encoder import ContextEncoder, SparseRows, WindowEncoder
from .model import (
    ForwardTrace,
    Losses,
    Mode,
    apply_speaker,
    encode,
    forward,
    gradient,
    loss_gd,
    loss_ged,
    loss_sgt,
    predict_proba,
    predict_tags,
    total_loss,
)
from .params import EncoderConfig, TaggerParams, load_params, save_params
from .train import TrainConfig, TrainResult, default_class_weights, token_accuracy, train

__all__ = [
    "ContextEncoder", "SparseRows", "WindowEncoder",
    "ForwardTrace", "Losses", "Mode", "apply_speaker", "encode", "forward", "gradient",
    "loss_gd", "loss_ged", "loss_sgt", "predict_proba", "predict_tags", "total_loss",
    "EncoderConfig", "TaggerParams", "load_params", "save_params",
    "TrainConfig", "TrainResult", "default_class_weights", "token_accuracy", "train",
]
