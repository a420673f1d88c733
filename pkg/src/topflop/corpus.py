"""Streaming ingestion of comment and review corpora.

Both corpora arrive as line-delimited JSON and are normalized into a single
canonical record stream so everything downstream handles one schema.
Review lines are mapped onto the comment schema: product -> thread,
helpfulness votes -> upvotes, and no parent (reviews do not reference each
other).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional

from .errors import DataError

FORMAT_COMMENTS = "comments"
FORMAT_REVIEWS = "reviews"


@dataclass(frozen=True)
class CommentRecord:
    """One comment or review in canonical form. posted_at is UTC seconds."""

    comment_id: str
    thread_id: str
    author_id: str
    posted_at: int
    text: str
    upvotes: int
    parent_id: Optional[str] = None


@dataclass
class CorpusStats:
    n_comments: int = 0
    n_threads: int = 0
    n_users: int = 0
    n_upvotes_total: int = 0
    reply_fraction: float = 0.0


@dataclass
class IngestReport:
    """Filled in while ingest() is consumed; useful only after exhaustion."""

    n_records: int = 0
    n_skipped: int = 0
    errors: list = field(default_factory=list)


def parse_timestamp(value):
    """RFC 3339 string -> integer UTC seconds. Naive times are taken as UTC."""
    if not isinstance(value, str):
        raise ValueError("timestamp must be a string")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(seconds):
    dt = datetime.fromtimestamp(int(seconds), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _require(obj, key, types, line_no):
    if key not in obj or obj[key] is None:
        raise DataError(f"missing field {key!r}", line_no=line_no)
    value = obj[key]
    if not isinstance(value, types):
        raise DataError(f"field {key!r} has wrong type", line_no=line_no)
    # bool is an int subclass and never a valid count/id
    if isinstance(value, bool):
        raise DataError(f"field {key!r} has wrong type", line_no=line_no)
    return value


def _parse_comment_line(obj, line_no):
    comment_id = _require(obj, "id", str, line_no)
    thread_id = _require(obj, "article_id", str, line_no)
    author_id = _require(obj, "author_id", str, line_no)
    raw_ts = _require(obj, "timestamp", str, line_no)
    text = _require(obj, "text", str, line_no)
    upvotes = _require(obj, "upvotes", int, line_no)
    parent_id = obj.get("parent_id")
    if parent_id is not None and not isinstance(parent_id, str):
        raise DataError("field 'parent_id' has wrong type", line_no=line_no)
    try:
        posted_at = parse_timestamp(raw_ts)
    except ValueError as exc:
        raise DataError(f"bad timestamp: {exc}", line_no=line_no) from exc
    if upvotes < 0:
        raise DataError("negative upvote count", line_no=line_no)
    if parent_id == comment_id:
        raise DataError("record is its own parent", line_no=line_no)
    return CommentRecord(
        comment_id=comment_id,
        thread_id=thread_id,
        author_id=author_id,
        posted_at=posted_at,
        text=text,
        upvotes=upvotes,
        parent_id=parent_id,
    )


def _parse_review_line(obj, line_no):
    comment_id = _require(obj, "id", str, line_no)
    thread_id = _require(obj, "product_id", str, line_no)
    author_id = _require(obj, "author_id", str, line_no)
    raw_ts = _require(obj, "timestamp", str, line_no)
    text = _require(obj, "text", str, line_no)
    votes = _require(obj, "helpful_votes", int, line_no)
    try:
        posted_at = parse_timestamp(raw_ts)
    except ValueError as exc:
        raise DataError(f"bad timestamp: {exc}", line_no=line_no) from exc
    if votes < 0:
        raise DataError("negative helpful_votes count", line_no=line_no)
    return CommentRecord(
        comment_id=comment_id,
        thread_id=thread_id,
        author_id=author_id,
        posted_at=posted_at,
        text=text,
        upvotes=votes,
        parent_id=None,
    )


_PARSERS = {FORMAT_COMMENTS: _parse_comment_line, FORMAT_REVIEWS: _parse_review_line}


def ingest(path, format=FORMAT_COMMENTS, on_error="abort", report=None):
    """Stream CommentRecords from a jsonl file in file order.

    on_error: "abort" raises DataError at the first malformed line;
    "skip" drops malformed lines and counts them in `report`.
    Duplicate comment ids always abort: downstream rank logic depends on
    identity uniqueness.
    """
    if format not in _PARSERS:
        raise ValueError(f"unknown corpus format {format!r}")
    if on_error not in ("abort", "skip"):
        raise ValueError("on_error must be 'abort' or 'skip'")
    parser = _PARSERS[format]
    if report is None:
        report = IngestReport()

    def _generate():
        seen = set()
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    if not isinstance(obj, dict):
                        raise DataError("line is not a JSON object", line_no=line_no)
                    record = parser(obj, line_no)
                except DataError as exc:
                    if on_error == "abort":
                        raise
                    report.n_skipped += 1
                    report.errors.append((line_no, str(exc)))
                    continue
                except json.JSONDecodeError as exc:
                    err = DataError(f"malformed JSON: {exc.msg}", line_no=line_no)
                    if on_error == "abort":
                        raise err from exc
                    report.n_skipped += 1
                    report.errors.append((line_no, str(err)))
                    continue
                if record.comment_id in seen:
                    raise DataError(
                        f"duplicate comment_id {record.comment_id!r}", line_no=line_no
                    )
                seen.add(record.comment_id)
                report.n_records += 1
                yield record

    return _generate()


def record_to_json(record):
    """Canonical comments-jsonl line for a record (used for both corpora)."""
    return json.dumps(
        {
            "id": record.comment_id,
            "article_id": record.thread_id,
            "author_id": record.author_id,
            "timestamp": format_timestamp(record.posted_at),
            "text": record.text,
            "upvotes": record.upvotes,
            "parent_id": record.parent_id,
        },
        ensure_ascii=False,
    )


def serialize(records, path):
    """Write records as canonical comments-jsonl. Inverse of ingest()."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_json(record))
            fh.write("\n")
            n += 1
    return n


def filter_after(records, cutoff):
    """Keep records strictly after `cutoff` (UTC seconds); order preserved."""
    for record in records:
        if record.posted_at > cutoff:
            yield record


def corpus_stats(records):
    """One-pass corpus counts; empty stream yields all-zero stats."""
    stats = CorpusStats()
    threads = set()
    users = set()
    replies = 0
    for record in records:
        stats.n_comments += 1
        threads.add(record.thread_id)
        users.add(record.author_id)
        stats.n_upvotes_total += record.upvotes
        if record.parent_id is not None:
            replies += 1
    stats.n_threads = len(threads)
    stats.n_users = len(users)
    stats.reply_fraction = replies / stats.n_comments if stats.n_comments else 0.0
    return stats


def file_digest(path):
    """sha256 of a file's bytes; recorded in dataset manifests."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
