import json

import numpy as np
import pytest

from topflop.explain import (
    CLASS_TOP,
    DeletionCurve,
    deletion_eval,
    ig_completeness_gap,
    lrp_dense_chain,
    lrp_linear,
    relevance_ig,
    relevance_lrp,
    relevance_random,
    relevance_sa,
    relevance_to_json,
    vocabulary_relevance,
)
from topflop.models import GruModel


@pytest.fixture(scope="module")
def small_gru():
    return GruModel(dim=5, hidden=4, dense=3, seed=2)


@pytest.fixture(scope="module")
def sample_seq():
    return np.random.default_rng(0).standard_normal((9, 5))


class TestLrpLinear:
    def test_three_input_hand_computation(self):
        x = np.array([1.0, 2.0, -1.0])
        w = np.array([[0.5], [0.25], [0.125]])
        z = x @ w
        r_out = np.array([z[0]])
        eps = 1e-3
        got = lrp_linear(x, w, np.zeros(1), z, r_out, eps=eps)
        expected = x * w[:, 0] * z[0] / (z[0] + eps * np.sign(z[0]))
        assert np.allclose(got, expected)

    def test_conservation_without_bias(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(6)
        w = rng.standard_normal((6, 4))
        z = x @ w
        r_in = lrp_linear(x, w, np.zeros(4), z, z.copy(), eps=1e-6)
        assert r_in.sum() == pytest.approx(z.sum(), rel=1e-3)

    def test_dense_chain_conservation_within_five_percent(self):
        rng = np.random.default_rng(2)
        layers = [
            (rng.standard_normal((6, 8)) * 0.5, np.zeros(8), True),
            (rng.standard_normal((8, 3)) * 0.5, np.zeros(3), False),
        ]
        for trial in range(10):
            x = np.random.default_rng(trial).standard_normal(6)
            relevance, out = lrp_dense_chain(layers, x, class_idx=1, eps=1e-3)
            if abs(out) < 1e-3:
                continue
            assert abs(relevance.sum() - out) <= 0.05 * abs(out)


class TestGruLrp:
    def test_score_vector_length_matches_tokens(self, small_gru, sample_seq):
        vec = relevance_lrp(small_gru, sample_seq, tokens=tuple("abcdefghi"))
        assert len(vec.scores) == 9
        assert vec.output == pytest.approx(
            float(small_gru.class_scores([sample_seq], CLASS_TOP)[0])
        )

    def test_deterministic(self, small_gru, sample_seq):
        one = relevance_lrp(small_gru, sample_seq)
        two = relevance_lrp(small_gru, sample_seq)
        assert np.array_equal(one.scores, two.scores)

    def test_empty_sequence(self, small_gru):
        vec = relevance_lrp(small_gru, np.zeros((0, 5)))
        assert vec.scores.shape == (0,)


class TestSensitivity:
    def test_constant_model_zero_scores(self, sample_seq):
        model = GruModel(dim=5, hidden=4, dense=3, seed=3)
        model.parameters["W2"][:] = 0.0  # logits constant in the input
        vec = relevance_sa(model, sample_seq)
        assert np.allclose(vec.scores, 0.0)

    def test_nonnegative(self, small_gru, sample_seq):
        assert np.all(relevance_sa(small_gru, sample_seq).scores >= 0.0)

    def test_matches_directional_finite_differences(self, small_gru):
        rng = np.random.default_rng(4)
        seq = rng.standard_normal((5, 5))
        _, grads = small_gru.score_and_input_grads([seq], CLASS_TOP)
        g = grads[0]
        h = 1e-6
        for t in range(5):
            direction = rng.standard_normal(5)
            direction /= np.linalg.norm(direction)
            plus, minus = seq.copy(), seq.copy()
            plus[t] += h * direction
            minus[t] -= h * direction
            numeric = (
                small_gru.class_scores([plus], CLASS_TOP)[0]
                - small_gru.class_scores([minus], CLASS_TOP)[0]
            ) / (2 * h)
            analytic = float(g[t] @ direction)
            assert abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6) < 1e-3


class TestIntegratedGradients:
    def test_baseline_input_gives_zero(self, small_gru):
        vec = relevance_ig(small_gru, np.zeros((4, 5)), steps=16)
        assert np.allclose(vec.scores, 0.0)

    def test_completeness(self, small_gru, sample_seq):
        err, gap = ig_completeness_gap(small_gru, sample_seq, steps=128)
        assert err <= 0.01 * gap + 1e-6

    def test_convergence_64_vs_128(self, small_gru, sample_seq):
        v64 = relevance_ig(small_gru, sample_seq, steps=64).scores
        v128 = relevance_ig(small_gru, sample_seq, steps=128).scores
        assert np.abs(v64 - v128).sum() <= 0.05 * np.abs(v128).sum() + 1e-9

    def test_minimum_steps_enforced(self, small_gru, sample_seq):
        with pytest.raises(ValueError):
            relevance_ig(small_gru, sample_seq, steps=8)


class TestRandomBaseline:
    def test_seed_reproducibility(self):
        seq = np.zeros((6, 3))
        one = relevance_random(seq, comment_id="c1", seed=9)
        two = relevance_random(seq, comment_id="c1", seed=9)
        other = relevance_random(seq, comment_id="c1", seed=10)
        assert np.array_equal(one.scores, two.scores)
        assert not np.array_equal(one.scores, other.scores)

    def test_distinct_per_comment(self):
        seq = np.zeros((6, 3))
        a = relevance_random(seq, comment_id="c1", seed=9)
        b = relevance_random(seq, comment_id="c2", seed=9)
        assert not np.array_equal(a.scores, b.scores)


class TestDeletionEval:
    def _examples(self, model, rng, n=30):
        examples = []
        for i in range(n):
            seq = rng.standard_normal((rng.integers(4, 9), model.dim))
            tokens = tuple(f"tok{j}" for j in range(len(seq)))
            examples.append((f"c{i}", tokens, seq, 1))
        return examples

    def test_k_zero_endpoints(self, small_gru):
        rng = np.random.default_rng(6)
        examples = self._examples(small_gru, rng)
        curves = deletion_eval(
            small_gru, examples,
            lambda seq, cid: relevance_random(seq, cid, seed=1),
            max_k=2,
        )
        by_pop = {c.population: c for c in curves}
        assert by_pop["true_positives"].points[0] == (0, 1.0)
        assert by_pop["false_negatives"].points[0] == (0, 0.0)
        assert (
            by_pop["true_positives"].n_examples + by_pop["false_negatives"].n_examples
            == len(examples)
        )

    def test_exhaustion_flagged(self, small_gru):
        rng = np.random.default_rng(7)
        seq = rng.standard_normal((3, 5))
        examples = [("c0", ("a", "b", "c"), seq, 1)]
        curves = deletion_eval(
            small_gru, examples,
            lambda s, cid: relevance_random(s, cid, seed=2),
            max_k=5,
        )
        populated = [c for c in curves if c.n_examples][0]
        assert populated.exhausted > 0

    def test_zero_mode_keeps_length(self, small_gru):
        rng = np.random.default_rng(8)
        examples = self._examples(small_gru, rng, n=10)
        remove = deletion_eval(
            small_gru, examples, lambda s, cid: relevance_random(s, cid, seed=3),
            max_k=2, mode="remove",
        )
        zero = deletion_eval(
            small_gru, examples, lambda s, cid: relevance_random(s, cid, seed=3),
            max_k=2, mode="zero",
        )
        assert {c.population for c in remove} == {c.population for c in zero}

    def test_deterministic(self, small_gru):
        rng = np.random.default_rng(9)
        examples = self._examples(small_gru, rng, n=12)
        fn = lambda s, cid: relevance_lrp(small_gru, s, cid)
        one = deletion_eval(small_gru, examples, fn, max_k=3)
        two = deletion_eval(small_gru, examples, fn, max_k=3)
        assert [c.points for c in one] == [c.points for c in two]


class TestVocabularyAggregation:
    def _vectors(self):
        from topflop.explain import RelevanceVector

        return [
            RelevanceVector("c1", "lrp", np.array([1.0, 3.0]), 1, 0.0, ("alpha", "beta")),
            RelevanceVector("c2", "lrp", np.array([5.0]), 1, 0.0, ("alpha",)),
        ]

    def test_mean_aggregation(self):
        rows = dict((t, v) for t, v, _ in vocabulary_relevance(self._vectors(), "mean"))
        assert rows["alpha"] == pytest.approx(3.0)
        assert rows["beta"] == pytest.approx(3.0)

    def test_max_aggregation(self):
        rows = dict((t, v) for t, v, _ in vocabulary_relevance(self._vectors(), "max"))
        assert rows["alpha"] == pytest.approx(5.0)

    def test_json_dump_schema(self):
        vec = self._vectors()[0]
        obj = json.loads(relevance_to_json(vec))
        assert set(obj) == {"id", "method", "tokens", "scores", "class", "output"}
        assert obj["class"] == "top"
