"""Position-bias removal and top/flop dataset construction.

Engagement counts depend heavily on a comment's chronological rank: early
comments are seen by more readers.  To compare comments fairly, counts are
turned into within-thread shares over the first ten top-level comments,
comments are grouped across threads by rank, and each rank group is sorted
by share.  The top/bottom percentile band of every group provides balanced
positive/negative labels.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import DataError
from .seeding import derive_seed

THREAD_SIZE = 10
MIN_REPLY_TOTAL = 20
SIGNAL_UPVOTES = "upvotes"
SIGNAL_REPLIES = "replies"
LABEL_TOP = 1
LABEL_FLOP = 0


@dataclass(frozen=True)
class RankedComment:
    comment_id: str
    rank: int
    upvotes: int
    replies: int
    upvote_share: float
    reply_share: float


@dataclass(frozen=True)
class RankedThread:
    thread_id: str
    comments: tuple  # exactly THREAD_SIZE RankedComments, ranks 1..10


@dataclass(frozen=True)
class RankGroup:
    rank: int
    entries: tuple  # (comment_id, share) sorted by share desc, id asc


@dataclass
class LabeledExample:
    comment_id: str
    text: str
    label: int
    signal: str
    percentile_band: int
    rank: int
    taxonomy_class: Optional[str] = None


@dataclass
class ThreadBuildResult:
    threads: list
    texts: dict
    n_input_threads: int = 0
    discarded_short: int = 0
    discarded_low_reply: int = 0
    discarded_zero_total: int = 0
    dangling_parents: int = 0


def build_threads(records, signal=SIGNAL_UPVOTES, strict_parents=False):
    """Assemble RankedThreads from a record stream.

    Per thread: the ten chronologically earliest top-level comments (ties
    broken by comment id) define ranks 1..10; replies are direct children
    of those ten, found anywhere in the thread.  Threads are discarded when
    they have fewer than ten top-level comments, when signal="replies" and
    the first ten drew fewer than MIN_REPLY_TOTAL replies, or when the
    chosen signal's total over the ten is zero (shares would be 0/0).
    signal=None applies only the ten-comment rule (for raw analytics).
    """
    if signal not in (SIGNAL_UPVOTES, SIGNAL_REPLIES, None):
        raise ValueError(f"unknown signal {signal!r}")
    by_thread = {}
    for record in records:
        by_thread.setdefault(record.thread_id, []).append(record)

    result = ThreadBuildResult(threads=[], texts={}, n_input_threads=len(by_thread))
    for thread_id in sorted(by_thread):
        members = by_thread[thread_id]
        ids = {r.comment_id for r in members}
        child_counts = {}
        for record in members:
            if record.parent_id is None:
                continue
            if record.parent_id not in ids:
                result.dangling_parents += 1
                if strict_parents:
                    raise DataError(
                        f"dangling parent_id {record.parent_id!r} in thread {thread_id!r}"
                    )
                continue
            child_counts[record.parent_id] = child_counts.get(record.parent_id, 0) + 1

        top_level = sorted(
            (r for r in members if r.parent_id is None),
            key=lambda r: (r.posted_at, r.comment_id),
        )
        if len(top_level) < THREAD_SIZE:
            result.discarded_short += 1
            continue
        first_ten = top_level[:THREAD_SIZE]
        upvote_counts = [r.upvotes for r in first_ten]
        reply_counts = [child_counts.get(r.comment_id, 0) for r in first_ten]
        total_upvotes = sum(upvote_counts)
        total_replies = sum(reply_counts)

        if signal == SIGNAL_REPLIES and total_replies < MIN_REPLY_TOTAL:
            result.discarded_low_reply += 1
            continue
        if signal == SIGNAL_UPVOTES and total_upvotes == 0:
            result.discarded_zero_total += 1
            continue
        if signal == SIGNAL_REPLIES and total_replies == 0:
            result.discarded_zero_total += 1
            continue

        comments = []
        for rank, record in enumerate(first_ten, start=1):
            comments.append(
                RankedComment(
                    comment_id=record.comment_id,
                    rank=rank,
                    upvotes=record.upvotes,
                    replies=reply_counts[rank - 1],
                    upvote_share=(record.upvotes / total_upvotes) if total_upvotes else 0.0,
                    reply_share=(reply_counts[rank - 1] / total_replies) if total_replies else 0.0,
                )
            )
            result.texts[record.comment_id] = record.text
        result.threads.append(RankedThread(thread_id=thread_id, comments=tuple(comments)))
    return result


def _share(comment, signal):
    return comment.upvote_share if signal == SIGNAL_UPVOTES else comment.reply_share


def rank_groups(threads, signal):
    """Ten equally sized groups, one per rank, each sorted by share desc."""
    if not threads:
        raise DataError("rank grouping requires at least one thread")
    groups = []
    for rank in range(1, THREAD_SIZE + 1):
        entries = [
            (t.comments[rank - 1].comment_id, _share(t.comments[rank - 1], signal))
            for t in threads
        ]
        entries.sort(key=lambda e: (-e[1], e[0]))
        groups.append(RankGroup(rank=rank, entries=tuple(entries)))
    return groups


def split_top_flop(groups, band, texts, signal):
    """Label the top/bottom `band` percent of every rank group.

    Per group of size n, the first floor(band/100*n) entries become top
    examples and the last floor(band/100*n) become flops; the middle is
    dropped (at band 50 with odd n the exact median entry is dropped).
    """
    if band not in (10, 25, 50):
        raise ValueError(f"band must be 10, 25, or 50, got {band}")
    examples = []
    for group in groups:
        n = len(group.entries)
        k = (band * n) // 100
        if k == 0:
            raise DataError(f"band {band} too small for corpus (rank group size {n})")
        chosen = [(entry, LABEL_TOP) for entry in group.entries[:k]]
        chosen += [(entry, LABEL_FLOP) for entry in group.entries[n - k:]]
        for (comment_id, _), label in chosen:
            examples.append(
                LabeledExample(
                    comment_id=comment_id,
                    text=texts[comment_id],
                    label=label,
                    signal=signal,
                    percentile_band=band,
                    rank=group.rank,
                )
            )
    return examples


def position_bias_curve(threads):
    """Mean raw upvotes and replies per rank 1..10 across threads."""
    if not threads:
        raise DataError("bias curve requires at least one thread")
    rows = []
    n = len(threads)
    for rank in range(1, THREAD_SIZE + 1):
        upvotes = sum(t.comments[rank - 1].upvotes for t in threads)
        replies = sum(t.comments[rank - 1].replies for t in threads)
        rows.append((rank, upvotes / n, replies / n))
    return rows


def bias_curve_to_csv(rows):
    lines = ["rank,mean_upvotes,mean_replies"]
    for rank, up, rep in rows:
        lines.append(f"{rank},{up:.6f},{rep:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Splits


@dataclass
class DatasetSplits:
    signal: str
    seed: int
    test_fraction: float
    test: list
    bands: dict  # band -> {"train": [...], "val": [...]}
    source_digest: str = ""
    discards: dict = field(default_factory=dict)


def _strata(examples):
    groups = {}
    for example in examples:
        groups.setdefault((example.rank, example.label), []).append(example)
    return groups


def _stratified_take(examples, fraction, rng):
    """floor(fraction*n) examples per (rank, label) stratum, seeded shuffle."""
    taken, rest = [], []
    for key in sorted(_strata(examples)):
        stratum = sorted(_strata(examples)[key], key=lambda e: e.comment_id)
        rng.shuffle(stratum)
        cut = int(math.floor(fraction * len(stratum)))
        taken.extend(stratum[:cut])
        rest.extend(stratum[cut:])
    return taken, rest


def make_splits(examples_by_band, test_fraction=0.1, seed=1):
    """Shared test set from the band-10 examples plus 80/20 train/validation
    splits per band, all stratified by (rank, label) and seeded.

    Test ids are removed from every band's pool, so the shared test set is
    disjoint from all training and validation data.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if 10 not in examples_by_band:
        raise DataError("band-10 examples are required to draw the shared test set")

    signal = examples_by_band[10][0].signal if examples_by_band[10] else SIGNAL_UPVOTES
    test_rng = random.Random(derive_seed(seed, "test"))
    test, _ = _stratified_take(examples_by_band[10], test_fraction, test_rng)
    if not test:
        raise DataError(
            "empty shared test set: corpus too small for this test_fraction"
        )
    test_ids = {e.comment_id for e in test}
    test = sorted(test, key=lambda e: (e.rank, e.label, e.comment_id))

    bands = {}
    for band in sorted(examples_by_band):
        pool = [e for e in examples_by_band[band] if e.comment_id not in test_ids]
        val_rng = random.Random(derive_seed(seed, "val", band))
        val, train = _stratified_take(pool, 0.2, val_rng)
        if not train or not val:
            raise DataError(
                f"band {band} train/validation split is empty: corpus too small"
            )
        bands[band] = {
            "train": sorted(train, key=lambda e: (e.rank, e.label, e.comment_id)),
            "val": sorted(val, key=lambda e: (e.rank, e.label, e.comment_id)),
        }
    return DatasetSplits(
        signal=signal, seed=seed, test_fraction=test_fraction, test=test, bands=bands
    )


def example_to_json(example):
    return json.dumps(
        {
            "id": example.comment_id,
            "text": example.text,
            "label": example.label,
            "rank": example.rank,
            "class": example.taxonomy_class,
        },
        ensure_ascii=False,
    )


def write_examples(examples, path, signal, band):
    payload = "".join(example_to_json(e) + "\n" for e in examples)
    data = payload.encode("utf-8")
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_examples(path, signal="", band=0):
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed example: {exc.msg}", line_no=line_no) from exc
            examples.append(
                LabeledExample(
                    comment_id=obj["id"],
                    text=obj["text"],
                    label=int(obj["label"]),
                    signal=signal,
                    percentile_band=band,
                    rank=int(obj["rank"]),
                    taxonomy_class=obj.get("class"),
                )
            )
    return examples


def materialize(splits, outdir):
    """Write split jsonl files plus manifest.json; returns the manifest.

    The manifest is a deterministic function of the splits: rerunning the
    pipeline with identical inputs and seed reproduces it byte for byte.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": 1,
        "signal": splits.signal,
        "seed": splits.seed,
        "test_fraction": splits.test_fraction,
        "source_digest": splits.source_digest,
        "discards": splits.discards,
        "bands": {},
    }
    test_digest = write_examples(splits.test, out / "test.jsonl", splits.signal, 10)
    manifest["test"] = {"count": len(splits.test), "digest": test_digest, "file": "test.jsonl"}
    for band, split in sorted(splits.bands.items()):
        band_dir = out / f"band{band}"
        band_dir.mkdir(exist_ok=True)
        entry = {}
        for name in ("train", "val"):
            digest = write_examples(
                split[name], band_dir / f"{name}.jsonl", splits.signal, band
            )
            entry[name] = {
                "count": len(split[name]),
                "digest": digest,
                "file": f"band{band}/{name}.jsonl",
            }
        manifest["bands"][str(band)] = entry
    manifest_text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(manifest_text, encoding="utf-8")
    return manifest


def load_manifest(dataset_dir):
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise DataError(f"no manifest.json under {dataset_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def verify_dataset(dataset_dir):
    """Check split files against manifest digests and test-id disjointness.

    Returns the manifest on success; raises DataError on tampering or on
    any overlap between the shared test set and a train/val split.
    """
    manifest = load_manifest(dataset_dir)
    root = Path(dataset_dir)

    def _check(entry):
        data = (root / entry["file"]).read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if digest != entry["digest"]:
            raise DataError(f"split file {entry['file']} does not match manifest digest")

    _check(manifest["test"])
    test_ids = {e.comment_id for e in read_examples(root / manifest["test"]["file"])}
    for band, entry in manifest["bands"].items():
        for name in ("train", "val"):
            _check(entry[name])
            ids = {e.comment_id for e in read_examples(root / entry[name]["file"])}
            overlap = ids & test_ids
            if overlap:
                raise DataError(
                    f"band {band} {name} split overlaps the shared test set "
                    f"({len(overlap)} ids, e.g. {sorted(overlap)[:3]})"
                )
    return manifest


# ---------------------------------------------------------------------------
# Taxonomy


@dataclass(frozen=True)
class TaxonomyClass:
    class_id: str
    parent: Optional[str]
    trigger: str  # "upvotes" | "replies" | "both"


TAXONOMY = {
    c.class_id: c
    for c in (
        TaxonomyClass("Question", None, "replies"),
        TaxonomyClass("Question/Explanation", "Question", "replies"),
        TaxonomyClass("Question/Opinion", "Question", "replies"),
        TaxonomyClass("Question/Fact", "Question", "replies"),
        TaxonomyClass("Joke/Humor", None, "upvotes"),
        TaxonomyClass("Speculation", None, "both"),
        TaxonomyClass("Speculation/Future", "Speculation", "both"),
        TaxonomyClass("Speculation/Reasons", "Speculation", "both"),
        TaxonomyClass("Correction", None, "replies"),
        TaxonomyClass("Comment Consent", None, "upvotes"),
        TaxonomyClass("Comment Dissent", None, "both"),
        TaxonomyClass("Fact", None, "upvotes"),
    )
}


def read_taxonomy_labels(path):
    """CSV comment_id,class_id; aborts on any class id not in the schema."""
    labels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            row = line.strip()
            if not row or row.lower() == "comment_id,class_id":
                continue
            parts = row.split(",", 1)
            if len(parts) != 2:
                raise DataError(f"bad taxonomy row {row!r}", line_no=line_no)
            comment_id, class_id = parts[0].strip(), parts[1].strip()
            if class_id not in TAXONOMY:
                raise DataError(
                    f"unknown taxonomy class {class_id!r} in row {row!r}", line_no=line_no
                )
            labels[comment_id] = class_id
    return labels


def attach_taxonomy(examples, labels):
    """Annotate matching examples in place; returns ids in `labels` that
    matched no example (reported, not fatal)."""
    by_id = {e.comment_id: e for e in examples}
    unmatched = []
    for comment_id, class_id in labels.items():
        example = by_id.get(comment_id)
        if example is None:
            unmatched.append(comment_id)
        else:
            example.taxonomy_class = class_id
    return sorted(unmatched)
