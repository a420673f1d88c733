import json
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import oracle_labels
from synthdata import make_thread_records

from topflop.corpus import CommentRecord
from topflop.dataset import (
    LABEL_FLOP,
    LABEL_TOP,
    TAXONOMY,
    attach_taxonomy,
    build_threads,
    make_splits,
    materialize,
    position_bias_curve,
    rank_groups,
    read_examples,
    read_taxonomy_labels,
    split_top_flop,
    verify_dataset,
)
from topflop.errors import DataError


def simple_thread(thread_id, upvotes_by_rank, n_top=10, replies=(), base_time=0):
    """Thread fixture: n_top top-level comments and optional reply tuples
    (reply_id, parent_rank)."""
    records = []
    for i in range(n_top):
        records.append(
            CommentRecord(
                comment_id=f"{thread_id}c{i:02d}",
                thread_id=thread_id,
                author_id="u0",
                posted_at=base_time + i,
                text=f"text {i}",
                upvotes=upvotes_by_rank[i] if i < len(upvotes_by_rank) else 0,
                parent_id=None,
            )
        )
    for reply_id, parent_rank in replies:
        records.append(
            CommentRecord(
                comment_id=reply_id,
                thread_id=thread_id,
                author_id="u1",
                posted_at=base_time + 1000,
                text="reply",
                upvotes=0,
                parent_id=f"{thread_id}c{parent_rank:02d}",
            )
        )
    return records


class TestBuildThreads:
    def test_direct_share_normalization(self):
        records = simple_thread("a1", [9, 1, 0, 0, 0, 0, 0, 0, 0, 0])
        result = build_threads(iter(records), signal="upvotes")
        (thread,) = result.threads
        shares = [c.upvote_share for c in thread.comments]
        assert shares[0] == pytest.approx(0.9)
        assert shares[1] == pytest.approx(0.1)
        assert sum(shares) == pytest.approx(1.0, abs=1e-9)

    def test_nine_comment_thread_discarded(self):
        records = simple_thread("a1", [5] * 9, n_top=9)
        result = build_threads(iter(records), signal="upvotes")
        assert result.threads == []
        assert result.discarded_short == 1

    def test_reply_threshold_boundary(self):
        def thread_with_replies(n):
            return simple_thread(
                "a1", [1] * 10, replies=[(f"r{i}", i % 10) for i in range(n)]
            )

        discarded = build_threads(iter(thread_with_replies(19)), signal="replies")
        assert discarded.threads == []
        assert discarded.discarded_low_reply == 1

        kept = build_threads(iter(thread_with_replies(20)), signal="replies")
        assert len(kept.threads) == 1
        assert sum(c.replies for c in kept.threads[0].comments) == 20

    def test_zero_upvote_thread_discarded(self):
        records = simple_thread("a1", [0] * 10)
        result = build_threads(iter(records), signal="upvotes")
        assert result.threads == []
        assert result.discarded_zero_total == 1

    def test_replies_counted_from_anywhere_in_thread(self):
        # reply to a rank-1 comment posted after 30 other replies still counts
        records = simple_thread("a1", [1] * 10, replies=[(f"r{i}", 0) for i in range(30)])
        result = build_threads(iter(records), signal="replies")
        assert result.threads[0].comments[0].replies == 30

    def test_dangling_parent_counted_and_strict_mode_aborts(self):
        records = simple_thread("a1", [1] * 10)
        records.append(
            CommentRecord("orphan", "a1", "u9", 99, "x", 0, parent_id="missing")
        )
        result = build_threads(iter(records), signal="upvotes")
        assert result.dangling_parents == 1
        with pytest.raises(DataError, match="dangling"):
            build_threads(iter(records), signal="upvotes", strict_parents=True)

    def test_first_ten_by_time_with_id_ties(self):
        records = simple_thread("a1", list(range(12)), n_top=12)
        # give two comments the same timestamp; id ascending breaks the tie
        records[3] = CommentRecord("a1c03", "a1", "u0", records[2].posted_at, "t", 3, None)
        result = build_threads(iter(records), signal="upvotes")
        ids = [c.comment_id for c in result.threads[0].comments]
        assert ids == sorted(ids)
        assert len(ids) == 10


class TestRankGroups:
    def _threads(self, n):
        records = []
        for t in range(n):
            records.extend(simple_thread(f"a{t}", [t + 1] * 10, base_time=t * 100))
        return build_threads(iter(records), signal="upvotes").threads

    def test_group_sizes_match_thread_count(self):
        groups = rank_groups(self._threads(3), "upvotes")
        assert len(groups) == 10
        assert all(len(g.entries) == 3 for g in groups)

    def test_share_sort_with_id_tiebreak(self):
        threads = build_threads(
            iter(
                simple_thread("aA", [2, 2, 6, 0, 0, 0, 0, 0, 0, 0])
                + simple_thread("aB", [1, 18, 1, 0, 0, 0, 0, 0, 0, 0], base_time=50)
                + simple_thread("aC", [2, 2, 6, 0, 0, 0, 0, 0, 0, 0], base_time=90)
            ),
            signal="upvotes",
        ).threads
        group3 = rank_groups(threads, "upvotes")[2]
        # shares at rank 3: A = 0.6, B = 0.05, C = 0.6; tie between A and C
        assert [e[0] for e in group3.entries] == ["aAc02", "aCc02", "aBc02"]

    def test_empty_thread_list_rejected(self):
        with pytest.raises(DataError):
            rank_groups([], "upvotes")


class TestSplitTopFlop:
    def _groups_and_texts(self, n_threads):
        records = []
        rng = random.Random(1)
        for t in range(n_threads):
            votes = [rng.randrange(0, 40) + 1 for _ in range(10)]
            records.extend(simple_thread(f"a{t:03d}", votes, base_time=t * 100))
        build = build_threads(iter(records), signal="upvotes")
        return rank_groups(build.threads, "upvotes"), build.texts

    def test_band10_floor_counts(self):
        groups, texts = self._groups_and_texts(20)
        examples = split_top_flop(groups, 10, texts, "upvotes")
        # 2 top + 2 flop per rank group of size 20
        assert len(examples) == 10 * 4
        per_rank = {}
        for e in examples:
            per_rank.setdefault(e.rank, []).append(e.label)
        for labels in per_rank.values():
            assert labels.count(LABEL_TOP) == 2
            assert labels.count(LABEL_FLOP) == 2

    def test_band50_odd_group_drops_median(self):
        groups, texts = self._groups_and_texts(21)
        examples = split_top_flop(groups, 50, texts, "upvotes")
        group1 = rank_groups_entries = [e for e in examples if e.rank == 1]
        assert len(group1) == 20  # 10 + 10 from 21 entries
        chosen = {e.comment_id for e in group1}
        all_rank1 = [cid for cid, _ in groups[0].entries]
        median_id = all_rank1[10]
        assert median_id not in chosen

    def test_band_too_small_error(self):
        groups, texts = self._groups_and_texts(5)
        with pytest.raises(DataError, match="band .* too small"):
            split_top_flop(groups, 10, texts, "upvotes")


class TestMakeSplits:
    def _examples(self, n_threads=100, seed=2):
        records = make_thread_records(n_threads=n_threads, seed=seed)
        build = build_threads(iter(records), signal="upvotes")
        groups = rank_groups(build.threads, "upvotes")
        return {
            band: split_top_flop(groups, band, build.texts, "upvotes")
            for band in (10, 25, 50)
        }

    def test_test_ids_disjoint_from_all_bands(self):
        splits = make_splits(self._examples(), test_fraction=0.2, seed=9)
        test_ids = {e.comment_id for e in splits.test}
        assert test_ids
        for band, parts in splits.bands.items():
            for name in ("train", "val"):
                ids = {e.comment_id for e in parts[name]}
                assert not (ids & test_ids), (band, name)

    def test_same_seed_identical_materialization(self, tmp_path):
        for run in ("one", "two"):
            splits = make_splits(self._examples(), test_fraction=0.2, seed=5)
            splits.source_digest = "fixed"
            materialize(splits, tmp_path / run)
        a = (tmp_path / "one" / "manifest.json").read_bytes()
        b = (tmp_path / "two" / "manifest.json").read_bytes()
        assert a == b
        assert (tmp_path / "one" / "test.jsonl").read_bytes() == (
            tmp_path / "two" / "test.jsonl"
        ).read_bytes()

    def test_different_seed_changes_split(self):
        one = make_splits(self._examples(), seed=1)
        two = make_splits(self._examples(), seed=2)
        assert {e.comment_id for e in one.test} != {e.comment_id for e in two.test}

    def test_bad_test_fraction(self):
        with pytest.raises(DataError, match="test_fraction"):
            make_splits(self._examples(), test_fraction=1.5)

    def test_verify_detects_tampering(self, tmp_path):
        splits = make_splits(self._examples(), seed=4)
        materialize(splits, tmp_path)
        verify_dataset(tmp_path)  # clean pass
        test_file = tmp_path / "test.jsonl"
        lines = test_file.read_text().splitlines()
        first = json.loads(lines[0])
        first["label"] = 1 - first["label"]
        lines[0] = json.dumps(first)
        test_file.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="digest"):
            verify_dataset(tmp_path)

    def test_verify_detects_overlap(self, tmp_path):
        splits = make_splits(self._examples(), seed=4)
        materialize(splits, tmp_path)
        # splice a test example into a train file and refresh its digest
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        train_file = tmp_path / manifest["bands"]["10"]["train"]["file"]
        test_line = (tmp_path / "test.jsonl").read_text().splitlines()[0]
        new_content = train_file.read_text() + test_line + "\n"
        train_file.write_text(new_content)
        import hashlib

        manifest["bands"]["10"]["train"]["digest"] = hashlib.sha256(
            new_content.encode()
        ).hexdigest()
        (tmp_path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        with pytest.raises(DataError, match="overlap"):
            verify_dataset(tmp_path)


class TestOracleAndInvariants:
    def test_labels_match_bruteforce_oracle(self):
        records = make_thread_records(n_threads=120, seed=13, short_thread_every=7,
                                      zero_upvote_every=11)
        for signal in ("upvotes", "replies"):
            build = build_threads(iter(records), signal=signal)
            groups = rank_groups(build.threads, signal)
            expected = oracle_labels(records, signal, bands=(10, 25, 50))
            for band in (10, 25, 50):
                examples = split_top_flop(groups, band, build.texts, signal)
                got = {e.comment_id: e.label for e in examples}
                assert got == expected[band], (signal, band)

    def test_rank_balance(self):
        for seed in range(6):
            records = make_thread_records(n_threads=30 + seed, seed=seed)
            build = build_threads(iter(records), signal="upvotes")
            groups = rank_groups(build.threads, "upvotes")
            for band in (10, 25, 50):
                examples = split_top_flop(groups, band, build.texts, "upvotes")
                per_rank = {}
                for e in examples:
                    counts = per_rank.setdefault(e.rank, [0, 0])
                    counts[e.label] += 1
                for flops, tops in per_rank.values():
                    assert abs(tops - flops) <= 1

    def test_upvote_scale_invariance(self):
        records = make_thread_records(n_threads=25, seed=21)
        rng = random.Random(5)
        build = build_threads(iter(records), signal="upvotes")
        groups = rank_groups(build.threads, "upvotes")
        base = {
            band: {e.comment_id: e.label
                   for e in split_top_flop(groups, band, build.texts, "upvotes")}
            for band in (10, 25, 50)
        }
        for _ in range(15):
            target = f"a{rng.randrange(25):04d}"
            factor = rng.randrange(1, 50)
            scaled = [
                r if r.thread_id != target or r.parent_id is not None
                else CommentRecord(r.comment_id, r.thread_id, r.author_id,
                                   r.posted_at, r.text, r.upvotes * factor, None)
                for r in records
            ]
            build2 = build_threads(iter(scaled), signal="upvotes")
            groups2 = rank_groups(build2.threads, "upvotes")
            for band in (10, 25, 50):
                got = {e.comment_id: e.label
                       for e in split_top_flop(groups2, band, build2.texts, "upvotes")}
                assert got == base[band]

    def test_share_sums(self):
        records = make_thread_records(n_threads=40, seed=3)
        build = build_threads(iter(records), signal="upvotes")
        for thread in build.threads:
            assert sum(c.upvote_share for c in thread.comments) == pytest.approx(1.0, abs=1e-9)


class TestBiasCurve:
    def test_identical_counts_reproduced(self):
        records = simple_thread("a1", [7] * 10) + simple_thread("a2", [7] * 10, base_time=500)
        build = build_threads(iter(records), signal="upvotes")
        rows = position_bias_curve(build.threads)
        assert [up for _, up, _ in rows] == [pytest.approx(7.0)] * 10

    def test_synthetic_decreasing_curve(self):
        records = []
        for t in range(8):
            votes = [11 - r for r in range(1, 11)]
            records.extend(simple_thread(f"a{t}", votes, base_time=t * 100))
        build = build_threads(iter(records), signal="upvotes")
        rows = position_bias_curve(build.threads)
        ups = [up for _, up, _ in rows]
        assert all(a > b for a, b in zip(ups, ups[1:]))


class TestTaxonomy:
    def test_schema_is_a_tree_with_unique_ids(self):
        assert len(TAXONOMY) == len(set(TAXONOMY))
        for cls in TAXONOMY.values():
            if cls.parent is not None:
                assert cls.parent in TAXONOMY
            assert cls.trigger in ("upvotes", "replies", "both")

    def _examples(self):
        records = simple_thread("a1", [5, 4, 3, 2, 1, 1, 1, 1, 1, 1]) + simple_thread(
            "a2", [1, 2, 3, 4, 5, 1, 1, 1, 1, 1], base_time=500
        )
        build = build_threads(iter(records), signal="upvotes")
        groups = rank_groups(build.threads, "upvotes")
        return split_top_flop(groups, 50, build.texts, "upvotes")

    def test_empty_label_file_changes_nothing(self, tmp_path):
        examples = self._examples()
        path = tmp_path / "labels.csv"
        path.write_text("comment_id,class_id\n")
        unmatched = attach_taxonomy(examples, read_taxonomy_labels(path))
        assert unmatched == []
        assert all(e.taxonomy_class is None for e in examples)

    def test_label_annotates_matching_example(self, tmp_path):
        examples = self._examples()
        target = examples[0].comment_id
        path = tmp_path / "labels.csv"
        path.write_text(f"{target},Joke/Humor\nmissing-id,Fact\n")
        unmatched = attach_taxonomy(examples, read_taxonomy_labels(path))
        assert examples[0].taxonomy_class == "Joke/Humor"
        assert unmatched == ["missing-id"]

    def test_unknown_class_aborts_with_row(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("c1,Sarcasm\n")
        with pytest.raises(DataError, match="Sarcasm"):
            read_taxonomy_labels(path)


def test_examples_round_trip(tmp_path):
    records = simple_thread("a1", [5, 4, 3, 2, 1, 1, 1, 1, 1, 1]) + simple_thread(
        "a2", [1, 2, 3, 4, 5, 1, 1, 1, 1, 1], base_time=500
    )
    build = build_threads(iter(records), signal="upvotes")
    groups = rank_groups(build.threads, "upvotes")
    examples = split_top_flop(groups, 50, build.texts, "upvotes")
    from topflop.dataset import write_examples

    write_examples(examples, tmp_path / "x.jsonl", "upvotes", 50)
    loaded = read_examples(tmp_path / "x.jsonl", signal="upvotes", band=50)
    assert [(e.comment_id, e.label, e.rank) for e in loaded] == [
        (e.comment_id, e.label, e.rank) for e in examples
    ]
