"""Tokenization and corpus analytics.

The tokenizer is deliberately simple and deterministic: lowercase, URLs and
user mentions replaced with reserved tokens, whitespace split, edge
punctuation emitted as separate tokens.  Readability (ARI), lexicon-based
sentiment, lexical rates, word-frequency contrasts, and per-author
aggregates all operate on these token sequences.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional

from .errors import DataError

URL_TOKEN = "<url>"
USER_TOKEN = "<user>"
_SPECIALS = frozenset({URL_TOKEN, USER_TOKEN})

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"(?<!\w)@\w+")
_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s|$)")


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple
    char_count: int
    word_count: int
    sentence_count: int


@dataclass(frozen=True)
class CommentAnalytics:
    n_words: int
    function_word_rate: float
    pronoun_rate: float
    ari: float
    sentiment: str


@dataclass(frozen=True)
class UserAggregates:
    author_id: str
    avg_comment_length: float
    avg_readability: float
    avg_upvotes: float


@dataclass(frozen=True)
class WordContrast:
    word: str
    freq_top: float
    freq_flop: float
    delta: float


def is_word_token(token):
    """Word tokens carry at least one alphanumeric char; reserved tokens count."""
    return token in _SPECIALS or any(c.isalnum() for c in token)


def _split_chunk(chunk):
    if chunk in _SPECIALS:
        return [chunk]
    start, end = 0, len(chunk)
    lead = []
    while start < end and not chunk[start].isalnum():
        lead.append(chunk[start])
        start += 1
    trail = []
    while end > start and not chunk[end - 1].isalnum():
        trail.append(chunk[end - 1])
        end -= 1
    tokens = lead
    if end > start:
        tokens.append(chunk[start:end])
    tokens.extend(reversed(trail))
    return tokens


def tokenize(text):
    """Normalize text into a TokenSequence.

    Rules: replace URLs with <url> and @mentions with <user>, lowercase,
    split on whitespace, peel leading/trailing punctuation off each chunk
    into separate one-char tokens.  Sentences are counted on `.`/`!`/`?`
    followed by whitespace or end of text; every non-empty text counts at
    least one sentence.
    """
    replaced = _URL_RE.sub(f" {URL_TOKEN} ", text)
    replaced = _MENTION_RE.sub(f" {USER_TOKEN} ", replaced)
    replaced = replaced.lower()

    terminators = len(_SENTENCE_END_RE.findall(replaced))
    stripped = replaced.strip()
    sentences = terminators
    if stripped and not _SENTENCE_END_RE.search(stripped.split()[-1]):
        sentences += 1
    sentences = max(sentences, 1)

    tokens = []
    for chunk in replaced.split():
        tokens.extend(_split_chunk(chunk))
    word_tokens = [t for t in tokens if is_word_token(t)]
    return TokenSequence(
        tokens=tuple(tokens),
        char_count=sum(len(t) for t in word_tokens),
        word_count=len(word_tokens),
        sentence_count=sentences,
    )


# ---------------------------------------------------------------------------
# Lexicons


@dataclass(frozen=True)
class Lexicons:
    function_words: frozenset
    pronouns: frozenset
    positive: frozenset
    negative: frozenset


def load_lexicon(path_or_file):
    """One token per line; blank lines and `#` comments ignored."""
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    tokens = set()
    for line in lines:
        entry = line.strip()
        if entry and not entry.startswith("#"):
            tokens.add(entry.lower())
    return frozenset(tokens)


def _bundled(name):
    ref = resources.files("topflop").joinpath("lexicons").joinpath(name)
    with ref.open("r", encoding="utf-8") as fh:
        return load_lexicon(fh)


_DEFAULT_LEXICONS = None


def default_lexicons():
    global _DEFAULT_LEXICONS
    if _DEFAULT_LEXICONS is None:
        _DEFAULT_LEXICONS = Lexicons(
            function_words=_bundled("function_words.txt"),
            pronouns=_bundled("pronouns.txt"),
            positive=_bundled("positive.txt"),
            negative=_bundled("negative.txt"),
        )
    return _DEFAULT_LEXICONS


# ---------------------------------------------------------------------------
# Per-comment analytics


def ari(seq):
    """Automated readability index: 4.71*chars/words + 0.5*words/sentences - 21.43."""
    if seq.word_count < 1:
        raise ValueError("readability undefined for zero words")
    chars_per_word = seq.char_count / seq.word_count
    words_per_sentence = seq.word_count / seq.sentence_count
    return 4.71 * chars_per_word + 0.5 * words_per_sentence - 21.43


def sentiment(seq, lexicons=None):
    """Lexicon count vote: positive if p > n, negative if n > p, else neutral."""
    lex = lexicons or default_lexicons()
    p = sum(1 for t in seq.tokens if t in lex.positive)
    n = sum(1 for t in seq.tokens if t in lex.negative)
    if p > n:
        return "positive"
    if n > p:
        return "negative"
    return "neutral"


def comment_analytics(seq, lexicons=None):
    """Per-comment analytics row. Requires at least one word token.

    Rates use all tokens (words and punctuation) as the denominator.
    """
    lex = lexicons or default_lexicons()
    n_tokens = len(seq.tokens)
    if seq.word_count < 1:
        raise ValueError("analytics undefined for zero words")
    return CommentAnalytics(
        n_words=seq.word_count,
        function_word_rate=sum(1 for t in seq.tokens if t in lex.function_words) / n_tokens,
        pronoun_rate=sum(1 for t in seq.tokens if t in lex.pronouns) / n_tokens,
        ari=ari(seq),
        sentiment=sentiment(seq, lex),
    )


ANALYTICS_ROWS = (
    "Number of Words",
    "Rate of Function Words",
    "Rate of Personal Pronouns",
    "Readability Index",
    "Positive Sentiment",
    "Neutral Sentiment",
    "Negative Sentiment",
)

ANALYTICS_COLUMNS = (
    ("upvotes", "Most"),
    ("upvotes", "Least"),
    ("replies", "Most"),
    ("replies", "Least"),
)


def _column_summary(texts, lexicons):
    rows = []
    for text in texts:
        seq = tokenize(text)
        if seq.word_count < 1:
            continue
        rows.append(comment_analytics(seq, lexicons))
    if not rows:
        return None
    n = len(rows)
    return {
        "Number of Words": sum(r.n_words for r in rows) / n,
        "Rate of Function Words": sum(r.function_word_rate for r in rows) / n,
        "Rate of Personal Pronouns": sum(r.pronoun_rate for r in rows) / n,
        "Readability Index": sum(r.ari for r in rows) / n,
        "Positive Sentiment": sum(1 for r in rows if r.sentiment == "positive") / n,
        "Neutral Sentiment": sum(1 for r in rows if r.sentiment == "neutral") / n,
        "Negative Sentiment": sum(1 for r in rows if r.sentiment == "negative") / n,
    }


def aggregate_analytics(texts_by_column, lexicons=None):
    """Mean analytics per column.

    texts_by_column maps (signal, "Most"|"Least") -> iterable of texts.
    Missing columns stay None and render as empty cells.  Returns
    {row_name: {column: value|None}} in the fixed row/column layout.
    """
    lex = lexicons or default_lexicons()
    summaries = {}
    for column in ANALYTICS_COLUMNS:
        texts = texts_by_column.get(column)
        summaries[column] = _column_summary(texts, lex) if texts is not None else None
    table = {}
    for row in ANALYTICS_ROWS:
        table[row] = {
            column: (summaries[column][row] if summaries[column] else None)
            for column in ANALYTICS_COLUMNS
        }
    return table


def analytics_to_csv(table):
    header = "Average per Comment," + ",".join(
        f"{signal.capitalize()} {side}" for signal, side in ANALYTICS_COLUMNS
    )
    lines = [header]
    for row in ANALYTICS_ROWS:
        cells = []
        for column in ANALYTICS_COLUMNS:
            value = table[row][column]
            cells.append("" if value is None else f"{value:.4f}")
        lines.append(row + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Word-frequency contrast


def _word_frequencies(texts):
    counts = Counter()
    total = 0
    for text in texts:
        seq = tokenize(text)
        total += len(seq.tokens)
        counts.update(
            t for t in seq.tokens if is_word_token(t) and t not in _SPECIALS
        )
    return counts, total


def word_contrast(top_texts, flop_texts, k=100):
    """Relative-frequency deltas (in percent of tokens) for the k most
    frequent words across both classes, sorted by |delta| descending."""
    top_counts, top_total = _word_frequencies(top_texts)
    flop_counts, flop_total = _word_frequencies(flop_texts)
    if top_total == 0 or flop_total == 0:
        raise DataError("word_contrast requires non-empty token streams on both sides")
    combined_total = top_total + flop_total
    candidates = sorted(
        set(top_counts) | set(flop_counts),
        key=lambda w: (-(top_counts[w] + flop_counts[w]) / combined_total, w),
    )[:k]
    contrasts = []
    for word in candidates:
        freq_top = 100.0 * top_counts[word] / top_total
        freq_flop = 100.0 * flop_counts[word] / flop_total
        contrasts.append(
            WordContrast(word=word, freq_top=freq_top, freq_flop=freq_flop, delta=freq_top - freq_flop)
        )
    contrasts.sort(key=lambda c: (-abs(c.delta), c.word))
    return contrasts


def contrast_to_csv(contrasts):
    lines = ["word,freq_top_pct,freq_flop_pct,delta_pct"]
    for c in contrasts:
        lines.append(f"{c.word},{c.freq_top:.6f},{c.freq_flop:.6f},{c.delta:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Per-author aggregates (profile classifier features)


class UserAggregateTable:
    """Per-author means plus global-mean fallback for unseen authors.

    Must be fit on training-period records only; feeding it test data
    leaks engagement counts into the feature space.
    """

    def __init__(self, per_author, global_means):
        self.per_author = per_author
        self.global_means = global_means

    def lookup(self, author_id):
        found = self.per_author.get(author_id)
        if found is not None:
            return found
        g = self.global_means
        return UserAggregates(
            author_id=author_id,
            avg_comment_length=g[0],
            avg_readability=g[1],
            avg_upvotes=g[2],
        )


def user_aggregates(records):
    """Per-author mean word count, ARI, and upvotes over the given records.

    Comments with zero word tokens are skipped (ARI undefined on them).
    """
    sums = defaultdict(lambda: [0.0, 0.0, 0.0, 0])
    for record in records:
        seq = tokenize(record.text)
        if seq.word_count < 1:
            continue
        cell = sums[record.author_id]
        cell[0] += seq.word_count
        cell[1] += ari(seq)
        cell[2] += record.upvotes
        cell[3] += 1
    if not sums:
        raise DataError("no usable records for user aggregates")
    per_author = {}
    totals = [0.0, 0.0, 0.0]
    total_n = 0
    for author, (length_sum, ari_sum, upvote_sum, n) in sums.items():
        per_author[author] = UserAggregates(
            author_id=author,
            avg_comment_length=length_sum / n,
            avg_readability=ari_sum / n,
            avg_upvotes=upvote_sum / n,
        )
        totals[0] += length_sum
        totals[1] += ari_sum
        totals[2] += upvote_sum
        total_n += n
    global_means = tuple(t / total_n for t in totals)
    return UserAggregateTable(per_author, global_means)
