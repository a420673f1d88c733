import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthdata import planted_token_task, split_examples

from topflop.embeddings import EmbeddingConfig, train_embeddings
from topflop.models import CnnModel, GruModel, TrainConfig, train


@dataclass
class PlantedTask:
    train: list  # (comment_id, tokens, label)
    val: list
    test: list
    embeddings: object
    train_x: list
    val_x: list
    test_x: list

    def labels(self, part):
        return np.array([label for _, _, label in getattr(self, part)], dtype=np.int64)


@pytest.fixture(scope="session")
def planted_task():
    examples = planted_token_task(n=2000, marker_rate=0.3, seed=7)
    train_ex, val_ex, test_ex = split_examples(examples, n_val=200, n_test=400, seed=3)
    emb = train_embeddings(
        (tokens for _, tokens, _ in train_ex),
        EmbeddingConfig(
            dim=16, window=5, negatives=5, epochs=3, min_count=1,
            buckets=2000, lr=0.05, seed=11,
        ),
    )
    encode = lambda part: [emb.encode(tokens) for _, tokens, _ in part]
    return PlantedTask(
        train=train_ex,
        val=val_ex,
        test=test_ex,
        embeddings=emb,
        train_x=encode(train_ex),
        val_x=encode(val_ex),
        test_x=encode(test_ex),
    )


@pytest.fixture(scope="session")
def planted_gru(planted_task):
    model = GruModel(dim=16, hidden=32, dense=16, seed=5)
    log = train(
        model,
        (planted_task.train_x, planted_task.labels("train")),
        (planted_task.val_x, planted_task.labels("val")),
        TrainConfig(seed=5, max_epochs=10, patience=2),
    )
    return model, log


@pytest.fixture(scope="session")
def planted_cnn(planted_task):
    model = CnnModel(dim=16, widths=(3, 4, 5), maps=100, seed=6)
    log = train(
        model,
        (planted_task.train_x, planted_task.labels("train")),
        (planted_task.val_x, planted_task.labels("val")),
        TrainConfig(seed=6, max_epochs=10, patience=2),
    )
    return model, log
