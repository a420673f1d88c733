"""Logistic regression classifiers over hand-built features.

Two feature specs exist: "length" (word count only, the naive baseline)
and "profile" (comment length, readability, and the author's historical
averages).  Profile features need per-author aggregates computed on the
training corpus; corpora without usable author history (e.g. product
reviews) make that feature set inapplicable.
"""

import numpy as np

from ..errors import DataError
from ..textstats import ari, tokenize
from .checkpoint import Checkpoint, save_checkpoint
from .ops import sigmoid

LENGTH_SPEC = "length"
PROFILE_SPEC = "profile"

_PROFILE_FEATURES = (
    "comment_length",
    "comment_readability",
    "user_avg_length",
    "user_avg_readability",
    "user_avg_upvotes",
)


def _text_stats(text):
    seq = tokenize(text)
    if seq.word_count < 1:
        return 0.0, 0.0
    return float(seq.word_count), float(ari(seq))


def length_features(texts):
    return np.array([[_text_stats(t)[0]] for t in texts], dtype=np.float64)


def profile_features(texts, authors, aggregates):
    """(B, 5) raw feature rows; authors unseen in training fall back to
    the training-global means."""
    if aggregates is None:
        raise DataError(
            "feature set inapplicable: user metadata unavailable for this corpus"
        )
    rows = []
    for text, author in zip(texts, authors):
        n_words, readability = _text_stats(text)
        agg = aggregates.lookup(author)
        rows.append(
            [
                n_words,
                readability,
                agg.avg_comment_length,
                agg.avg_readability,
                agg.avg_upvotes,
            ]
        )
    return np.array(rows, dtype=np.float64)


class Standardizer:
    """Per-feature (x - mean) / std fitted on training data only."""

    def __init__(self, mean=None, std=None):
        self.mean = mean
        self.std = std

    def fit(self, x):
        self.mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std == 0.0] = 1.0
        self.std = std
        return self

    def transform(self, x):
        return (x - self.mean) / self.std


class LogisticModel:
    arch = "logistic"

    def __init__(self, n_features, feature_spec=LENGTH_SPEC):
        self.feature_spec = feature_spec
        self.parameters = {
            "w": np.zeros(n_features, dtype=np.float64),
            "b": np.zeros(1, dtype=np.float64),
        }

    @property
    def config(self):
        return {
            "n_features": len(self.parameters["w"]),
            "feature_spec": self.feature_spec,
        }

    def predict_proba(self, x):
        z = x @ self.parameters["w"] + self.parameters["b"][0]
        p = sigmoid(z)
        return np.column_stack([1.0 - p, p])

    def loss_and_grads(self, x, y, rng=None, train=True):
        n = len(y)
        z = x @ self.parameters["w"] + self.parameters["b"][0]
        p = sigmoid(z)
        eps = 1e-12
        loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
        dz = (p - y) / n
        grads = {"w": x.T @ dz, "b": np.array([dz.sum()])}
        return loss, grads

    def save(self, path, embedding_digest="", extra=None):
        save_checkpoint(
            path,
            self.arch,
            dict(self.parameters),
            self.config,
            embedding_digest,
            extra,
        )

    @classmethod
    def from_checkpoint(cls, ck: Checkpoint):
        model = cls(ck.config["n_features"], ck.config["feature_spec"])
        model.parameters["w"][:] = ck.tensors["w"]
        model.parameters["b"][:] = ck.tensors["b"]
        return model
