"""Subword-aware skip-gram word embeddings.

Words are represented as the mean of a word vector and hashed character
n-gram (3..6) bucket vectors, so out-of-vocabulary words still map to a
vector through their n-grams.  Training is skip-gram with negative
sampling on the kernel backends in `topflop.kernels`.

The n-gram hash is FNV-1a over UTF-8 bytes mod the bucket count, and the
n-gram spanning the entire boundary-wrapped token is excluded (the word
vector itself covers it), so one-character tokens have no subwords.
"""

from __future__ import annotations

import hashlib
import json
import threading
import warnings
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError
from .seeding import derive_seed

MIN_NGRAM = 3
MAX_NGRAM = 6
NEG_TABLE_SIZE = 1_000_000
_BUCKET_MAGIC = b"TFBUCKETS1\n"


def fnv1a_32(data):
    h = 0x811C9DC5
    for byte in data:
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def subword_hashes(token, buckets, min_n=MIN_NGRAM, max_n=MAX_NGRAM):
    """Bucket indices for a token's character n-grams.

    The token is wrapped in '<' and '>'; n-grams of length min_n..max_n are
    hashed, except the one covering the whole wrapped token.
    """
    if buckets <= 0:
        return []
    wrapped = f"<{token}>"
    length = len(wrapped)
    hashes = []
    for n in range(min_n, max_n + 1):
        if n >= length:
            break
        for i in range(length - n + 1):
            hashes.append(fnv1a_32(wrapped[i : i + n].encode("utf-8")) % buckets)
    return hashes


@dataclass
class EmbeddingConfig:
    dim: int = 300
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 5
    buckets: int = 2_000_000
    lr: float = 0.05
    seed: int = 1
    workers: int = 1


class EmbeddingModel:
    """Vocabulary, composed word vectors, and optional subword buckets.

    `vectors[i]` is the already-composed representation of vocab word i
    (mean of its raw word vector and its bucket vectors at training time).
    OOV lookups average bucket vectors; without buckets they are zero.
    """

    def __init__(self, dim, vocab, vectors, bucket_vectors=None, counts=None, metadata=None):
        self.dim = dim
        self.vocab = vocab
        self.vectors = vectors
        self.bucket_vectors = bucket_vectors
        self.counts = counts
        self.metadata = metadata or {}
        self.raw_word_vectors = None  # populated by train_embeddings only

    @property
    def buckets(self):
        return 0 if self.bucket_vectors is None else self.bucket_vectors.shape[0]

    def lookup(self, token):
        idx = self.vocab.get(token)
        if idx is not None:
            return self.vectors[idx]
        if self.bucket_vectors is not None:
            hashes = subword_hashes(token, self.buckets)
            if hashes:
                return self.bucket_vectors[hashes].mean(axis=0)
        return np.zeros(self.dim, dtype=np.float64)

    def encode(self, tokens, max_len=None):
        """Token sequence -> (T, dim) matrix, head-truncated to max_len.

        An empty sequence encodes as a single zero row (the documented
        degenerate input for the classifiers).
        """
        if max_len is not None:
            tokens = tokens[:max_len]
        if not tokens:
            return np.zeros((1, self.dim), dtype=np.float64)
        return np.stack([self.lookup(t) for t in tokens])

    def digest(self):
        h = hashlib.sha256()
        h.update(f"dim={self.dim};buckets={self.buckets};".encode())
        for token in sorted(self.vocab, key=self.vocab.get):
            h.update(token.encode("utf-8"))
            h.update(b"\x00")
        h.update(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes())
        if self.bucket_vectors is not None:
            h.update(np.ascontiguousarray(self.bucket_vectors, dtype="<f8").tobytes())
        return h.hexdigest()


def _build_negative_table(counts, size=NEG_TABLE_SIZE):
    probs = counts.astype(np.float64) ** 0.75
    probs /= probs.sum()
    table = np.zeros(size, dtype=np.int32)
    cumulative = probs[0]
    word = 0
    for i in range(size):
        table[i] = word
        if (i + 1) / size > cumulative and word < len(counts) - 1:
            word += 1
            cumulative += probs[word]
    return table


def train_embeddings(sentences, config=None, **overrides):
    """Train a subword skip-gram model on tokenized sentences.

    Deterministic for a fixed seed with workers=1.  workers > 1 runs racy
    unsynchronized updates on the compiled backend (and is rejected with a
    warning, falling back to one worker, on the numpy backend).
    """
    config = config or EmbeddingConfig(**overrides)
    sentences = [list(s) for s in sentences]
    counter = Counter(t for sentence in sentences for t in sentence)
    vocab_tokens = sorted(
        (t for t, c in counter.items() if c >= config.min_count),
        key=lambda t: (-counter[t], t),
    )
    if not vocab_tokens:
        raise DataError("no token reaches min_count; corpus too small to train on")
    vocab = {t: i for i, t in enumerate(vocab_tokens)}
    counts = np.array([counter[t] for t in vocab_tokens], dtype=np.int64)

    encoded = []
    for sentence in sentences:
        idxs = [vocab[t] for t in sentence if t in vocab]
        if idxs:
            encoded.append(idxs)
    if not encoded:
        raise DataError("corpus empty after vocabulary filtering")

    n_vocab = len(vocab_tokens)
    dim, n_buckets = config.dim, config.buckets
    sub_lists = [
        [n_vocab + h for h in subword_hashes(t, n_buckets)] for t in vocab_tokens
    ]
    sub_offsets = np.zeros(n_vocab + 1, dtype=np.int64)
    for v, subs in enumerate(sub_lists):
        sub_offsets[v + 1] = sub_offsets[v] + len(subs)
    sub_indices = np.array(
        [h for subs in sub_lists for h in subs], dtype=np.int32
    )
    if sub_indices.size == 0:
        sub_indices = np.zeros(0, dtype=np.int32)

    init_rng = np.random.default_rng(derive_seed(config.seed, "init"))
    win = (init_rng.random((n_vocab + n_buckets, dim)) - 0.5) / dim
    wout = np.zeros((n_vocab, dim), dtype=np.float64)

    tokens = np.array([i for s in encoded for i in s], dtype=np.int32)
    offsets = np.zeros(len(encoded) + 1, dtype=np.int64)
    for s, idxs in enumerate(encoded):
        offsets[s + 1] = offsets[s] + len(idxs)
    neg_table = _build_negative_table(counts)

    total_tokens = int(offsets[-1])
    total_planned = config.epochs * total_tokens
    backend = kernels.get_backend()
    workers = config.workers
    if workers > 1 and kernels.ACTIVE_BACKEND != "cython":
        warnings.warn(
            "multi-worker training needs the compiled kernel; running one worker"
        )
        workers = 1

    epoch_losses = []
    processed = 0
    state = derive_seed(config.seed, "sgd")
    for epoch in range(config.epochs):
        if workers == 1:
            loss, terms, processed, state = backend.train_epoch(
                tokens, offsets, win, wout, sub_offsets, sub_indices, neg_table,
                config.window, config.negatives, config.lr,
                processed, total_planned, state,
            )
            epoch_losses.append(loss / max(terms, 1))
        else:
            loss, terms, processed = _racy_epoch(
                backend, tokens, offsets, win, wout, sub_offsets, sub_indices,
                neg_table, config, processed, total_planned, epoch, workers,
            )
            epoch_losses.append(loss / max(terms, 1))

    composed = np.empty((n_vocab, dim), dtype=np.float64)
    for v in range(n_vocab):
        subs = sub_lists[v]
        if subs:
            composed[v] = (win[v] + win[subs].sum(axis=0)) / (1 + len(subs))
        else:
            composed[v] = win[v]

    metadata = dict(asdict(config))
    metadata.update(
        {
            "min_n": MIN_NGRAM,
            "max_n": MAX_NGRAM,
            "epoch_loss": epoch_losses,
            "n_tokens": total_tokens,
            "kernel_backend": kernels.ACTIVE_BACKEND if workers == 1 else "cython-racy",
        }
    )
    model = EmbeddingModel(
        dim=dim,
        vocab=vocab,
        vectors=composed,
        bucket_vectors=win[n_vocab:].copy() if n_buckets else None,
        counts=counts,
        metadata=metadata,
    )
    model.raw_word_vectors = win[:n_vocab].copy()
    return model


def _racy_epoch(backend, tokens, offsets, win, wout, sub_offsets, sub_indices,
                neg_table, config, processed, total_planned, epoch, workers):
    """Hogwild-style epoch: sentence shards updated by unsynchronized threads."""
    n_sentences = len(offsets) - 1
    bounds = [round(w * n_sentences / workers) for w in range(workers + 1)]
    results = [None] * workers
    threads = []

    def run(w):
        lo, hi = bounds[w], bounds[w + 1]
        shard_tokens = tokens[offsets[lo] : offsets[hi]]
        shard_offsets = (offsets[lo : hi + 1] - offsets[lo]).astype(np.int64)
        results[w] = backend.train_epoch(
            shard_tokens, shard_offsets, win, wout, sub_offsets, sub_indices,
            neg_table, config.window, config.negatives, config.lr,
            processed + int(offsets[lo]) // max(workers, 1), total_planned,
            derive_seed(config.seed, "sgd", epoch, w),
        )

    for w in range(workers):
        t = threading.Thread(target=run, args=(w,))
        threads.append(t)
        t.start()
    for t in threads:
        t.join()
    loss = sum(r[0] for r in results)
    terms = sum(r[1] for r in results)
    return loss, terms, processed + int(offsets[-1])


# ---------------------------------------------------------------------------
# Persistence


def save_vectors(model, path, precision=17):
    """Write the model as word2vec-style text plus optional sidecars.

    <path>:          "V dim" header, then "token v1 .. vdim" per line with
                     `precision` significant digits (17 round-trips float64
                     exactly).
    <path>.buckets:  binary sidecar, magic + "B dim" line + raw float64
                     rows, written only for subword models.
    <path>.meta.json: config/counts sidecar.
    """
    path = Path(path)
    n_vocab = len(model.vocab)
    fmt = f"%.{precision}g"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n_vocab} {model.dim}\n")
        for token in sorted(model.vocab, key=model.vocab.get):
            row = model.vectors[model.vocab[token]]
            fh.write(token + " " + " ".join(fmt % x for x in row) + "\n")
    if model.bucket_vectors is not None:
        with open(str(path) + ".buckets", "wb") as fh:
            fh.write(_BUCKET_MAGIC)
            fh.write(f"{model.buckets} {model.dim}\n".encode("ascii"))
            fh.write(np.ascontiguousarray(model.bucket_vectors, dtype="<f8").tobytes())
    meta = {
        "dim": model.dim,
        "buckets": model.buckets,
        "min_n": MIN_NGRAM,
        "max_n": MAX_NGRAM,
        "counts": None if model.counts is None else [int(c) for c in model.counts],
        "metadata": model.metadata,
    }
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_vectors(path):
    """Load a text vector file; sidecars restore subword OOV support.

    Plain external vector files (no sidecars) load as word-only models
    whose OOV lookups are zero vectors.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError("vector file header must be 'V dim'", line_no=1)
        try:
            n_vocab, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise DataError("vector file header must be 'V dim'", line_no=1) from exc
        vocab = {}
        vectors = np.zeros((n_vocab, dim), dtype=np.float64)
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise DataError(
                    f"expected {dim} values for token {token!r}, got {len(values)}",
                    line_no=line_no,
                )
            if token in vocab:
                raise DataError(f"duplicate token {token!r}", line_no=line_no)
            idx = len(vocab)
            if idx >= n_vocab:
                raise DataError("more vector rows than the header declares", line_no=line_no)
            vocab[token] = idx
            vectors[idx] = np.array([float(v) for v in values])
    if len(vocab) != n_vocab:
        raise DataError(f"header declares {n_vocab} rows, file has {len(vocab)}")

    bucket_vectors = None
    counts = None
    metadata = {}
    bucket_path = Path(str(path) + ".buckets")
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        metadata = meta.get("metadata", {})
        if meta.get("counts") is not None:
            counts = np.array(meta["counts"], dtype=np.int64)
    if bucket_path.exists():
        raw = bucket_path.read_bytes()
        if not raw.startswith(_BUCKET_MAGIC):
            raise DataError(f"{bucket_path} is not a bucket sidecar")
        rest = raw[len(_BUCKET_MAGIC):]
        nl = rest.index(b"\n")
        n_buckets, bdim = (int(x) for x in rest[:nl].split())
        if bdim != dim:
            raise DataError(
                f"bucket sidecar dim {bdim} does not match vector dim {dim}"
            )
        bucket_vectors = np.frombuffer(rest[nl + 1:], dtype="<f8").reshape(n_buckets, bdim).copy()
    return EmbeddingModel(
        dim=dim,
        vocab=vocab,
        vectors=vectors,
        bucket_vectors=bucket_vectors,
        counts=counts,
        metadata=metadata,
    )
