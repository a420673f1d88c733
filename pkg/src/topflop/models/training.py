"""Shared training loop: Adam, cross-entropy, early stopping on validation
loss with best-weights restore, per-epoch logging."""

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError
from ..seeding import derive_seed
from .ops import Adam, cross_entropy


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 20
    patience: int = 2
    seed: int = 1
    max_seq_len: int = 200

    def to_dict(self):
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "max_seq_len": self.max_seq_len,
        }


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    seconds: float


@dataclass
class TrainingLog:
    seed: int
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def to_csv(self):
        lines = ["epoch,train_loss,val_loss,val_acc,seconds"]
        for e in self.epochs:
            lines.append(
                f"{e.epoch},{e.train_loss:.6f},{e.val_loss:.6f},{e.val_acc:.6f},{e.seconds:.3f}"
            )
        return "\n".join(lines) + "\n"


def _take(inputs, idx):
    if isinstance(inputs, np.ndarray):
        return inputs[idx]
    return [inputs[i] for i in idx]


def _validate(model, inputs, labels):
    probs = model.predict_proba(inputs)
    loss = cross_entropy(probs, labels)
    acc = float(np.mean(probs.argmax(axis=1) == labels))
    return loss, acc


def train(model, train_data, val_data, config=None):
    """Train `model` in place; returns the TrainingLog.

    train_data/val_data are (inputs, labels) pairs; inputs are either a
    feature matrix or a list of embedded token sequences, whatever the
    model consumes.  Stops after `patience` epochs without a validation
    loss improvement and restores the best parameters seen.
    """
    config = config or TrainConfig()
    inputs, labels = train_data
    labels = np.asarray(labels, dtype=np.int64)
    val_inputs, val_labels = val_data
    val_labels = np.asarray(val_labels, dtype=np.int64)
    n = len(labels)

    shuffle_rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))
    dropout_rng = np.random.default_rng(derive_seed(config.seed, "dropout"))
    adam = Adam(
        model.parameters,
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
    )

    log = TrainingLog(seed=config.seed)
    best_loss = np.inf
    best_params = {k: v.copy() for k, v in model.parameters.items()}
    bad_epochs = 0

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss, grads = model.loss_and_grads(
                _take(inputs, idx), labels[idx], rng=dropout_rng, train=True
            )
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, batch offset {lo}"
                )
            adam.step(grads)
            loss_sum += loss * len(idx)
        train_loss = loss_sum / n
        val_loss, val_acc = _validate(model, val_inputs, val_labels)
        if not np.isfinite(val_loss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}")
        log.epochs.append(
            EpochStats(epoch, train_loss, val_loss, val_acc, time.perf_counter() - started)
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = {k: v.copy() for k, v in model.parameters.items()}
            log.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                log.stopped_early = True
                break

    for key, value in best_params.items():
        model.parameters[key][:] = value
    return log
