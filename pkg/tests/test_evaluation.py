import math

import numpy as np
import pytest

from topflop.errors import DataError
from topflop.evaluation import (
    RunResult,
    accuracy_grid,
    collect_results,
    evaluate,
    grid_to_csv,
    grid_to_text,
    paired_ttest,
    repeated_protocol,
    write_result,
)


class TestEvaluate:
    def test_perfect_predictor(self):
        labels = np.array([0, 1, 0, 1, 1])
        classes = [None, "Fact", None, "Fact", "Joke/Humor"]
        result = evaluate(labels, labels, taxonomy_classes=classes)
        assert result.accuracy == 1.0
        assert result.confusion == {"tp": 3, "fp": 0, "tn": 2, "fn": 0}
        # Fact has 2 positives, Joke/Humor 1: both under the support threshold
        assert result.class_recall == {}

    def test_constant_predictor_on_balanced_set(self):
        labels = np.array([0, 1] * 10)
        preds = np.ones_like(labels)
        assert evaluate(preds, labels).accuracy == 0.5

    def test_class_recall_with_support(self):
        labels = np.array([1] * 12 + [0] * 12)
        preds = labels.copy()
        preds[:3] = 0  # miss three positives of class A
        classes = ["A-class"] * 6 + ["B-class"] * 6 + [None] * 12
        # class ids must come from the taxonomy in real use; evaluate only
        # checks support, so synthetic ids are fine here
        result = evaluate(preds, labels, taxonomy_classes=classes)
        assert result.class_recall["A-class"] == pytest.approx(0.5)
        assert result.class_recall["B-class"] == pytest.approx(1.0)
        assert result.class_support == {"A-class": 6, "B-class": 6}

    def test_unlearnable_class_has_lowest_recall(self):
        rng = np.random.default_rng(0)
        labels = np.ones(60, dtype=int)
        preds = np.ones(60, dtype=int)
        # class "hard" positives get random predictions, others are correct
        classes = ["hard"] * 20 + ["easy-a"] * 20 + ["easy-b"] * 20
        preds[:20] = rng.integers(0, 2, 20)
        result = evaluate(preds, labels, taxonomy_classes=classes)
        assert result.class_recall["hard"] < result.class_recall["easy-a"]
        assert result.class_recall["hard"] < result.class_recall["easy-b"]

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            evaluate(np.array([]), np.array([]))


class TestRepeatedProtocol:
    def _run_once(self, seed):
        rng = np.random.default_rng(seed)
        return RunResult(
            model="gru", band=10, signal="upvotes", seed=seed,
            accuracy=float(0.7 + rng.random() * 0.01), n_test=100,
            confusion={"tp": 35, "fp": 15, "tn": 35, "fn": 15},
        )

    def test_deterministic_result_list(self, tmp_path):
        one, summary_one = repeated_protocol(self._run_once, range(1, 11), tmp_path / "a")
        two, summary_two = repeated_protocol(self._run_once, range(1, 11), tmp_path / "b")
        assert [r.accuracy for r in one] == [r.accuracy for r in two]
        assert summary_one == summary_two
        assert summary_one["n"] == 10
        assert summary_one["std_accuracy"] is not None

    def test_single_run_has_null_std(self):
        _, summary = repeated_protocol(self._run_once, [3])
        assert summary["n"] == 1
        assert summary["std_accuracy"] is None

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(DataError):
            repeated_protocol(self._run_once, [1, 1, 2])

    def test_abort_retains_partial_results(self, tmp_path):
        calls = []

        def flaky(seed):
            if seed == 2:
                raise DataError("synthetic failure")
            result = self._run_once(seed)
            calls.append(seed)
            return result

        with pytest.raises(DataError):
            repeated_protocol(flaky, [1, 2, 3], tmp_path)
        kept = collect_results(tmp_path)
        assert [r.seed for r in kept] == [1]
        assert calls == [1]


class TestPairedTTest:
    def test_equal_vectors_fail_to_reject(self):
        a = np.full(10, 0.7)
        result = paired_ttest(a, a.copy())
        assert result.t_statistic == 0.0
        assert not result.reject

    def test_hand_computed_fixture(self):
        # d = (0.01, 0.02, ..., 0.10): mean 0.055, sample std 0.0302765...
        # t = 0.055 / (std / sqrt(10)) = 5.744562646538...
        b = np.full(10, 0.60)
        a = b + np.arange(1, 11) / 100.0
        result = paired_ttest(a, b)
        assert result.n_pairs == 10
        assert result.mean_difference == pytest.approx(0.055)
        assert result.t_statistic == pytest.approx(5.744562646538029, abs=1e-9)
        assert result.critical_value == pytest.approx(1.8331129326536335, abs=1e-6)
        assert result.reject

    def test_df9_critical_value(self):
        result = paired_ttest(np.arange(10) / 10.0, np.zeros(10))
        assert result.critical_value == pytest.approx(1.833, abs=5e-4)

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        a = 0.7 + rng.random(10) * 0.05
        b = 0.68 + rng.random(10) * 0.05
        forward = paired_ttest(a, b)
        backward = paired_ttest(b, a)
        assert forward.t_statistic == pytest.approx(-backward.t_statistic)

    def test_zero_variance_positive_mean_rejects(self):
        a = np.full(10, 0.75)
        b = np.full(10, 0.70)
        result = paired_ttest(a, b)
        assert result.reject
        assert math.isinf(result.t_statistic)

    def test_zero_variance_zero_mean_fails_to_reject(self):
        a = np.full(10, 0.75)
        result = paired_ttest(a, a.copy())
        assert not result.reject

    def test_too_short_rejected(self):
        with pytest.raises(DataError):
            paired_ttest([0.5], [0.4])


def _fill_results(models, signals, bands, base=0.6):
    results = []
    for m_i, model in enumerate(models):
        for s_i, signal in enumerate(signals):
            for b_i, band in enumerate(bands):
                for seed in (1, 2):
                    results.append(
                        RunResult(
                            model=model, band=band, signal=signal, seed=seed,
                            accuracy=base + 0.01 * m_i + 0.001 * s_i + 0.0001 * b_i,
                            n_test=10, confusion={},
                        )
                    )
    return results


class TestReport:
    def test_comments_grid_shape(self):
        results = _fill_results(["baseline", "profile", "cnn", "gru"], ["upvotes", "replies"], [10, 25, 50])
        grid = accuracy_grid(results, "comments")
        assert list(grid["rows"]) == ["baseline", "profile", "cnn", "gru"]
        assert len(grid["columns"]) == 6
        csv_text = grid_to_csv(grid)
        lines = csv_text.strip().split("\n")
        assert len(lines) == 5
        assert lines[0] == "model,upvotes_10,upvotes_25,upvotes_50,replies_10,replies_25,replies_50"

    def test_reviews_grid_shape(self):
        results = _fill_results(["baseline", "cnn", "gru"], ["upvotes"], [10, 25, 50])
        grid = accuracy_grid(results, "reviews")
        assert len(grid["columns"]) == 3
        lines = grid_to_csv(grid).strip().split("\n")
        assert len(lines) == 4

    def test_missing_cells_render_as_dashes(self):
        results = _fill_results(["gru"], ["upvotes"], [10])
        grid = accuracy_grid(results, "comments")
        text = grid_to_text(grid)
        assert "--" in text
        csv_lines = grid_to_csv(grid).strip().split("\n")
        assert csv_lines[1].startswith("Length LR,,")

    def test_empty_results_header_only_table(self):
        grid = accuracy_grid([], "reviews")
        lines = grid_to_csv(grid).strip().split("\n")
        assert lines[0] == "model,upvotes_10,upvotes_25,upvotes_50"
        assert all(line.split(",")[1] == "" for line in lines[1:])

    def test_mean_over_seeds(self):
        results = [
            RunResult("gru", 10, "upvotes", 1, 0.70, 10, {}),
            RunResult("gru", 10, "upvotes", 2, 0.80, 10, {}),
        ]
        grid = accuracy_grid(results, "comments")
        assert grid["cells"]["gru"][("upvotes", 10)] == pytest.approx(0.75)

    def test_result_files_round_trip(self, tmp_path):
        result = RunResult("cnn", 25, "replies", 7, 0.66, 50,
                           {"tp": 20, "fp": 9, "tn": 13, "fn": 8}, {"Fact": 0.5}, {"Fact": 6})
        write_result(result, tmp_path)
        (loaded,) = collect_results(tmp_path)
        assert loaded == result
