"""Classifiers: length/profile logistic regression, CNN, bidirectional GRU."""

from .checkpoint import Checkpoint, checkpoint_digest, load_checkpoint, save_checkpoint
from .cnn import CnnModel
from .gru import GruModel
from .logistic import (
    LENGTH_SPEC,
    PROFILE_SPEC,
    LogisticModel,
    Standardizer,
    length_features,
    profile_features,
)
from .ops import Adam, pad_batch, sigmoid, softmax
from .training import EpochStats, TrainConfig, TrainingLog, train

_ARCHS = {
    "logistic": LogisticModel,
    "cnn": CnnModel,
    "gru": GruModel,
}


def model_from_checkpoint(ck: Checkpoint):
    try:
        cls = _ARCHS[ck.arch]
    except KeyError:
        raise ValueError(f"unknown model architecture {ck.arch!r}") from None
    return cls.from_checkpoint(ck)


def load_model(path):
    ck = load_checkpoint(path)
    return model_from_checkpoint(ck), ck
