"""Metrics, the repeated-run protocol, paired significance testing, and
report tables.

Accuracy is the headline metric (class distributions are balanced by
construction).  Per-taxonomy-class recall is reported for test examples
carrying taxonomy labels, omitting classes with fewer than five labeled
positives.  The repeated protocol runs n seeded train/evaluate rounds and
pairs runs by seed for the one-tailed t-test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from .errors import DataError

MIN_CLASS_SUPPORT = 5
MODEL_ROWS_COMMENTS = ("baseline", "profile", "cnn", "gru")
MODEL_ROWS_REVIEWS = ("baseline", "cnn", "gru")
MODEL_LABELS = {
    "baseline": "Length LR",
    "profile": "Profile LR",
    "cnn": "CNN",
    "gru": "GRU",
}
BANDS = (10, 25, 50)


@dataclass
class RunResult:
    model: str
    band: int
    signal: str
    seed: int
    accuracy: float
    n_test: int
    confusion: dict  # tp / fp / tn / fn
    class_recall: dict = field(default_factory=dict)
    class_support: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(
            {
                "model": self.model,
                "band": self.band,
                "signal": self.signal,
                "seed": self.seed,
                "accuracy": self.accuracy,
                "n_test": self.n_test,
                "confusion": self.confusion,
                "class_recall": self.class_recall,
                "class_support": self.class_support,
            },
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(**obj)


def evaluate(predictions, labels, taxonomy_classes=None, model="", band=0, signal="", seed=0):
    """Metrics for predicted labels against true labels.

    predictions/labels: integer arrays (1 = top).  taxonomy_classes is an
    optional parallel sequence of class ids (None where unlabeled);
    per-class recall counts correct predictions among that class's
    positives, and classes under MIN_CLASS_SUPPORT positives are omitted.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(predictions) != len(labels) or len(labels) == 0:
        raise DataError("predictions and labels must be equal-length and non-empty")
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    tn = int(np.sum((predictions == 0) & (labels == 0)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))
    accuracy = (tp + tn) / len(labels)

    class_recall = {}
    class_support = {}
    if taxonomy_classes is not None:
        per_class = {}
        for pred, label, cls in zip(predictions, labels, taxonomy_classes):
            if cls is None or label != 1:
                continue
            hit, total = per_class.get(cls, (0, 0))
            per_class[cls] = (hit + int(pred == 1), total + 1)
        for cls, (hit, total) in sorted(per_class.items()):
            if total >= MIN_CLASS_SUPPORT:
                class_recall[cls] = hit / total
                class_support[cls] = total
    return RunResult(
        model=model,
        band=band,
        signal=signal,
        seed=seed,
        accuracy=float(accuracy),
        n_test=len(labels),
        confusion={"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        class_recall=class_recall,
        class_support=class_support,
    )


def repeated_protocol(run_once, seeds, results_dir=None):
    """Run train+evaluate once per seed; collect RunResults.

    `run_once(seed) -> RunResult`.  Each result is written to results_dir
    as it completes, so an aborting run leaves a partial log behind before
    the exception propagates.  Returns (results, summary) where summary
    holds the mean and sample standard deviation (None for n=1).
    """
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise DataError("protocol seeds must be distinct")
    results = []
    for seed in seeds:
        result = run_once(seed)
        results.append(result)
        if results_dir is not None:
            write_result(result, results_dir)
    accs = np.array([r.accuracy for r in results])
    summary = {
        "n": len(results),
        "mean_accuracy": float(accs.mean()),
        "std_accuracy": float(accs.std(ddof=1)) if len(results) > 1 else None,
    }
    return results, summary


def result_path(results_dir, result):
    return (
        Path(results_dir)
        / result.signal
        / f"band{result.band}"
        / result.model
        / f"seed{result.seed}"
        / "result.json"
    )


def write_result(result, results_dir):
    path = result_path(results_dir, result)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(result.to_json() + "\n", encoding="utf-8")
    return path


def collect_results(results_dir):
    results = []
    for path in sorted(Path(results_dir).rglob("result.json")):
        results.append(RunResult.from_json(path.read_text(encoding="utf-8")))
    return results


# ---------------------------------------------------------------------------
# Paired significance test


@dataclass
class SignificanceResult:
    method_pair: tuple
    n_pairs: int
    mean_difference: float
    t_statistic: float
    p_bound: float
    critical_value: float
    reject: bool


def paired_ttest(a, b, alpha=0.05, method_pair=("a", "b")):
    """One-tailed paired t-test of H0: mean(a - b) <= 0.

    Pairs must be matched by seed.  t = mean(d) / (std(d)/sqrt(n)) with the
    sample standard deviation (n-1); rejects when t exceeds the one-tailed
    critical value at the given alpha with df = n-1 (1.833 at df=9,
    alpha=0.05).  Zero-variance edge cases: positive mean rejects
    trivially, otherwise fail to reject.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise DataError("paired_ttest needs two equal-length vectors of >= 2 runs")
    d = a - b
    n = len(d)
    df = n - 1
    mean = float(d.mean())
    std = float(d.std(ddof=1))
    critical = float(scipy_stats.t.ppf(1.0 - alpha, df))
    if std == 0.0:
        t_stat = math.inf if mean > 0 else (-math.inf if mean < 0 else 0.0)
        p = 0.0 if mean > 0 else 1.0
        return SignificanceResult(
            tuple(method_pair), n, mean, t_stat, p, critical, mean > 0
        )
    t_stat = mean / (std / math.sqrt(n))
    p = float(scipy_stats.t.sf(t_stat, df))
    return SignificanceResult(
        tuple(method_pair), n, mean, float(t_stat), p, critical, t_stat > critical
    )


# ---------------------------------------------------------------------------
# Report tables


def accuracy_grid(results, layout="comments"):
    """Mean test accuracy per (model, signal, band) cell.

    layout "comments": rows Length LR / Profile LR / CNN / GRU, columns
    (upvotes, replies) x bands (10, 25, 50).  layout "reviews": rows
    Length LR / CNN / GRU, columns bands only (helpfulness upvotes).
    Missing cells stay None.
    """
    if layout == "comments":
        rows = MODEL_ROWS_COMMENTS
        columns = [(signal, band) for signal in ("upvotes", "replies") for band in BANDS]
    elif layout == "reviews":
        rows = MODEL_ROWS_REVIEWS
        columns = [("upvotes", band) for band in BANDS]
    else:
        raise ValueError(f"unknown report layout {layout!r}")
    cells = {}
    for result in results:
        key = (result.model, result.signal, result.band)
        cells.setdefault(key, []).append(result.accuracy)
    grid = {}
    for model in rows:
        grid[model] = {}
        for signal, band in columns:
            accs = cells.get((model, signal, band))
            grid[model][(signal, band)] = float(np.mean(accs)) if accs else None
    return {"rows": rows, "columns": columns, "cells": grid}


def grid_to_csv(grid):
    header = ["model"] + [f"{signal}_{band}" for signal, band in grid["columns"]]
    lines = [",".join(header)]
    for model in grid["rows"]:
        row = [MODEL_LABELS[model]]
        for column in grid["columns"]:
            value = grid["cells"][model][column]
            row.append("" if value is None else f"{value:.2f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def grid_to_text(grid):
    """Aligned plain-text table; missing cells render as an em dash stand-in."""
    signals = []
    for signal, _ in grid["columns"]:
        if signal not in signals:
            signals.append(signal)
    name_width = max(len(MODEL_LABELS[m]) for m in grid["rows"]) + 2
    col_width = 7
    lines = []
    top = " " * name_width
    for signal in signals:
        n_bands = sum(1 for s, _ in grid["columns"] if s == signal)
        top += signal.capitalize().center(col_width * n_bands)
    lines.append(top.rstrip())
    sub = "Top/Flop %".ljust(name_width)
    for _, band in grid["columns"]:
        sub += str(band).rjust(col_width)
    lines.append(sub)
    for model in grid["rows"]:
        line = MODEL_LABELS[model].ljust(name_width)
        for column in grid["columns"]:
            value = grid["cells"][model][column]
            line += ("--" if value is None else f"{value:.2f}").rjust(col_width)
        lines.append(line)
    return "\n".join(lines) + "\n"
