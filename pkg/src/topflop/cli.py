"""Batch command-line pipeline.

Commands: ingest, build-dataset, stats, train-embeddings, train, evaluate,
explain, delete-eval, report.  Every command is re-runnable: outputs are a
pure function of the inputs, the resolved configuration (frozen next to
the outputs as <command>.config.json), and the master --seed.

Exit codes: 0 success, 2 usage error, 3 data validation error,
4 numerical failure.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import corpus as corpus_mod
from . import dataset as dataset_mod
from . import embeddings as emb_mod
from . import evaluation as eval_mod
from . import explain as explain_mod
from . import models as models_mod
from . import textstats
from .errors import DataError, NumericalError
from .seeding import derive_seed


class _DataFailure(click.ClickException):
    exit_code = 3


class _NumericalFailure(click.ClickException):
    exit_code = 4


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except DataError as exc:
            raise _DataFailure(str(exc)) from exc
        except NumericalError as exc:
            raise _NumericalFailure(str(exc)) from exc


def _default_out(command):
    root = os.environ.get("TOPFLOP_OUT")
    return str(Path(root) / command) if root else None


def _freeze_config(target, command, params):
    target = Path(target)
    if target.suffix and not target.is_dir():
        path = target.parent / f"{target.name}.config.json"
    else:
        target.mkdir(parents=True, exist_ok=True)
        path = target / f"{command}.config.json"
    payload = {"command": command, "params": params}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require_out(out, command):
    out = out or _default_out(command)
    if not out:
        raise click.UsageError(
            f"--out is required (or set TOPFLOP_OUT) for {command}"
        )
    return out


@click.group(cls=_Group)
@click.version_option()
def cli():
    """Top/flop engagement datasets, classifiers, and explanations."""


def main():
    cli()


# ---------------------------------------------------------------------------
# ingest


@cli.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["comments", "reviews"]), default="comments", show_default=True)
@click.option("--on-error", type=click.Choice(["abort", "skip"]), default="abort", show_default=True)
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False))
def ingest(source, fmt, on_error, out):
    """Normalize a raw corpus file into canonical comments-jsonl."""
    report = corpus_mod.IngestReport()
    records = corpus_mod.ingest(source, format=fmt, on_error=on_error, report=report)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    n = corpus_mod.serialize(records, out)
    _freeze_config(Path(out), "ingest", {
        "source": str(source), "format": fmt, "on_error": on_error, "out": str(out),
    })
    click.echo(f"wrote {n} records to {out}")
    if report.n_skipped:
        click.echo(f"warning: skipped {report.n_skipped} malformed lines", err=True)
        for line_no, message in report.errors[:10]:
            click.echo(f"  line {line_no}: {message}", err=True)


# ---------------------------------------------------------------------------
# build-dataset


def _load_section_map(path):
    sections = {}
    with open(path, "r", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "article_id":
                continue
            sections[row[0]] = row[1].strip()
    return sections


@cli.command("build-dataset")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--signal", type=click.Choice(["upvotes", "replies"]), required=True)
@click.option("--bands", default="10,25,50", show_default=True, help="comma-separated percentile bands")
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--test-fraction", default=0.1, show_default=True, type=float)
@click.option("--after", default=None, help="keep only records strictly after this RFC 3339 time")
@click.option("--section", default=None, help="keep only threads mapped to this section")
@click.option("--sections-file", default=None, type=click.Path(exists=True, dir_okay=False),
              help="CSV article_id,section used by --section")
@click.option("--strict-parents", is_flag=True, help="abort on unresolvable parent ids")
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def build_dataset(corpus_path, signal, bands, seed, test_fraction, after, section,
                  sections_file, strict_parents, out):
    """Build rank-balanced top/flop splits plus a manifest from a corpus."""
    out = _require_out(out, "build-dataset")
    try:
        band_list = sorted({int(b) for b in bands.split(",") if b.strip()})
    except ValueError:
        raise click.UsageError(f"cannot parse --bands {bands!r}")
    if 10 not in band_list:
        raise click.UsageError("--bands must include 10 (source of the shared test set)")
    if section and not sections_file:
        raise click.UsageError("--section requires --sections-file")

    records = corpus_mod.ingest(corpus_path, format="comments")
    if after:
        try:
            cutoff = corpus_mod.parse_timestamp(after)
        except ValueError as exc:
            raise click.UsageError(f"cannot parse --after: {exc}")
        records = corpus_mod.filter_after(records, cutoff)
    if section:
        section_map = _load_section_map(sections_file)
        records = (r for r in records if section_map.get(r.thread_id) == section)

    build = dataset_mod.build_threads(records, signal=signal, strict_parents=strict_parents)
    if not build.threads:
        raise DataError("no threads survive filtering; nothing to build")
    groups = dataset_mod.rank_groups(build.threads, signal)
    examples_by_band = {
        band: dataset_mod.split_top_flop(groups, band, build.texts, signal)
        for band in band_list
    }
    splits = dataset_mod.make_splits(examples_by_band, test_fraction=test_fraction, seed=seed)
    splits.source_digest = corpus_mod.file_digest(corpus_path)
    splits.discards = {
        "input_threads": build.n_input_threads,
        "threads_kept": len(build.threads),
        "short_threads": build.discarded_short,
        "low_reply_threads": build.discarded_low_reply,
        "zero_total_threads": build.discarded_zero_total,
        "dangling_parents": build.dangling_parents,
    }
    manifest = dataset_mod.materialize(splits, out)
    _freeze_config(Path(out), "build-dataset", {
        "corpus": str(corpus_path), "signal": signal, "bands": band_list, "seed": seed,
        "test_fraction": test_fraction, "after": after, "section": section,
        "sections_file": sections_file, "strict_parents": strict_parents, "out": str(out),
    })
    counts = ", ".join(
        f"band {band}: {entry['train']['count']}+{entry['val']['count']}"
        for band, entry in sorted(manifest["bands"].items(), key=lambda kv: int(kv[0]))
    )
    click.echo(
        f"kept {len(build.threads)}/{build.n_input_threads} threads; "
        f"test {manifest['test']['count']}; {counts}"
    )


# ---------------------------------------------------------------------------
# stats


@cli.group()
def stats():
    """Corpus analytics tables and plot data."""


def _split_by_label(path):
    examples = dataset_mod.read_examples(path)
    top = [e.text for e in examples if e.label == dataset_mod.LABEL_TOP]
    flop = [e.text for e in examples if e.label == dataset_mod.LABEL_FLOP]
    return top, flop


@stats.command()
@click.option("--upvotes", "upvotes_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="labeled examples jsonl for the upvote signal")
@click.option("--replies", "replies_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="labeled examples jsonl for the reply signal")
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def analytics(upvotes_path, replies_path, out):
    """Mean length/rates/readability/sentiment for most vs least engaging."""
    out = _require_out(out, "stats")
    if not upvotes_path and not replies_path:
        raise click.UsageError("provide --upvotes and/or --replies")
    texts_by_column = {}
    if upvotes_path:
        top, flop = _split_by_label(upvotes_path)
        texts_by_column[("upvotes", "Most")] = top
        texts_by_column[("upvotes", "Least")] = flop
    if replies_path:
        top, flop = _split_by_label(replies_path)
        texts_by_column[("replies", "Most")] = top
        texts_by_column[("replies", "Least")] = flop
    table = textstats.aggregate_analytics(texts_by_column)
    Path(out).mkdir(parents=True, exist_ok=True)
    path = Path(out) / "analytics.csv"
    path.write_text(textstats.analytics_to_csv(table), encoding="utf-8")
    _freeze_config(Path(out), "stats-analytics", {
        "upvotes": upvotes_path, "replies": replies_path, "out": str(out),
    })
    click.echo(f"wrote {path}")


@stats.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="labeled examples jsonl (top and flop mixed)")
@click.option("-k", "--top-k", default=100, show_default=True, type=int)
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def contrast(input_path, top_k, out):
    """Word-frequency deltas between the top and flop classes."""
    out = _require_out(out, "stats")
    top, flop = _split_by_label(input_path)
    if not top or not flop:
        raise DataError("contrast needs examples from both classes")
    contrasts = textstats.word_contrast(top, flop, k=top_k)
    Path(out).mkdir(parents=True, exist_ok=True)
    path = Path(out) / "contrast.csv"
    path.write_text(textstats.contrast_to_csv(contrasts), encoding="utf-8")
    _freeze_config(Path(out), "stats-contrast", {
        "input": input_path, "top_k": top_k, "out": str(out),
    })
    click.echo(f"wrote {path}")


@stats.command("bias-curve")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def bias_curve(corpus_path, out):
    """Mean upvotes/replies per chronological rank (position bias)."""
    out = _require_out(out, "stats")
    records = corpus_mod.ingest(corpus_path, format="comments")
    build = dataset_mod.build_threads(records, signal=None)
    if not build.threads:
        raise DataError("no threads with ten top-level comments found")
    rows = dataset_mod.position_bias_curve(build.threads)
    Path(out).mkdir(parents=True, exist_ok=True)
    path = Path(out) / "bias_curve.csv"
    path.write_text(dataset_mod.bias_curve_to_csv(rows), encoding="utf-8")
    _freeze_config(Path(out), "stats-bias-curve", {"corpus": corpus_path, "out": str(out)})
    click.echo(f"wrote {path}")


# ---------------------------------------------------------------------------
# train-embeddings


@cli.command("train-embeddings")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dim", default=300, show_default=True, type=int)
@click.option("--window", default=5, show_default=True, type=int)
@click.option("--negatives", default=5, show_default=True, type=int)
@click.option("--epochs", default=5, show_default=True, type=int)
@click.option("--min-count", default=5, show_default=True, type=int)
@click.option("--buckets", default=2_000_000, show_default=True, type=int)
@click.option("--lr", default=0.05, show_default=True, type=float)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("-j", "--jobs", default=1, show_default=True, type=int,
              help="racy multi-worker training (compiled kernel only)")
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False))
def train_embeddings_cmd(corpus_path, dim, window, negatives, epochs, min_count,
                         buckets, lr, seed, jobs, out):
    """Train subword skip-gram embeddings on a canonical corpus."""
    sentences = (
        list(textstats.tokenize(r.text).tokens)
        for r in corpus_mod.ingest(corpus_path, format="comments")
    )
    config = emb_mod.EmbeddingConfig(
        dim=dim, window=window, negatives=negatives, epochs=epochs,
        min_count=min_count, buckets=buckets, lr=lr, seed=seed, workers=jobs,
    )
    model = emb_mod.train_embeddings(sentences, config)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    emb_mod.save_vectors(model, out)
    _freeze_config(Path(out), "train-embeddings", {
        "corpus": corpus_path, "dim": dim, "window": window, "negatives": negatives,
        "epochs": epochs, "min_count": min_count, "buckets": buckets, "lr": lr,
        "seed": seed, "jobs": jobs, "out": str(out),
    })
    losses = ", ".join(f"{x:.4f}" for x in model.metadata["epoch_loss"])
    click.echo(f"trained {len(model.vocab)} words (dim {dim}); epoch loss: {losses}")


# ---------------------------------------------------------------------------
# shared model/data plumbing


def _band_examples(dataset_dir, manifest, band, which):
    band_key = str(band)
    if band_key not in manifest["bands"]:
        raise DataError(f"band {band} not present in dataset manifest")
    entry = manifest["bands"][band_key][which]
    return dataset_mod.read_examples(
        Path(dataset_dir) / entry["file"], signal=manifest["signal"], band=band
    )


def _test_examples(dataset_dir, manifest):
    return dataset_mod.read_examples(
        Path(dataset_dir) / manifest["test"]["file"], signal=manifest["signal"], band=10
    )


def _tokenize_texts(examples, max_len):
    return [list(textstats.tokenize(e.text).tokens)[:max_len] for e in examples]


def _encode_tokens(embedding_model, tokens_list):
    return [embedding_model.encode(toks) for toks in tokens_list]


def _load_corpus_records(path):
    return list(corpus_mod.ingest(path, format="comments"))


def _author_map(records):
    return {r.comment_id: r.author_id for r in records}


def _standardizer_from_tensors(tensors):
    return models_mod.Standardizer(mean=tensors["feat_mean"], std=tensors["feat_std"])


def _aggregates_from_checkpoint(ck):
    authors = ck.extra.get("agg_authors")
    if authors is None:
        return None
    matrix = ck.tensors["agg_matrix"]
    per_author = {
        author: textstats.UserAggregates(
            author_id=author,
            avg_comment_length=float(matrix[i, 0]),
            avg_readability=float(matrix[i, 1]),
            avg_upvotes=float(matrix[i, 2]),
        )
        for i, author in enumerate(authors)
    }
    return textstats.UserAggregateTable(per_author, tuple(ck.tensors["agg_global"]))


def _logistic_features(ck, examples, corpus_path):
    texts = [e.text for e in examples]
    spec = ck.config["feature_spec"]
    if spec == models_mod.LENGTH_SPEC:
        raw = models_mod.length_features(texts)
    else:
        if not corpus_path:
            raise DataError(
                "feature set inapplicable: user metadata unavailable "
                "(profile evaluation needs --corpus)"
            )
        authors_by_id = _author_map(_load_corpus_records(corpus_path))
        try:
            authors = [authors_by_id[e.comment_id] for e in examples]
        except KeyError as exc:
            raise DataError(f"comment {exc.args[0]!r} missing from --corpus") from exc
        raw = models_mod.profile_features(texts, authors, _aggregates_from_checkpoint(ck))
    return _standardizer_from_tensors(ck.tensors).transform(raw)


def _predict_in_chunks(model, inputs, chunk=256):
    preds = []
    for lo in range(0, len(inputs), chunk):
        part = inputs[lo : lo + chunk]
        preds.append(model.predict_proba(part).argmax(axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


# ---------------------------------------------------------------------------
# train


@cli.command()
@click.option("--model", "model_kind", type=click.Choice(["baseline", "profile", "cnn", "gru"]), required=True)
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--band", default=10, show_default=True, type=int)
@click.option("--embeddings", "embeddings_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="trained vector file (required for cnn/gru)")
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="canonical corpus with author metadata (required for profile)")
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--epochs", default=20, show_default=True, type=int)
@click.option("--batch-size", default=64, show_default=True, type=int)
@click.option("--patience", default=2, show_default=True, type=int)
@click.option("--lr", default=1e-3, show_default=True, type=float)
@click.option("--max-len", default=200, show_default=True, type=int)
@click.option("--hidden", default=32, show_default=True, type=int, help="GRU units per direction")
@click.option("--dense", default=16, show_default=True, type=int, help="GRU readout dense size")
@click.option("--maps", default=100, show_default=True, type=int, help="CNN feature maps per width")
@click.option("--widths", default="3,4,5", show_default=True, help="CNN filter widths")
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def train(model_kind, dataset_dir, band, embeddings_path, corpus_path, seed, epochs,
          batch_size, patience, lr, max_len, hidden, dense, maps, widths, out):
    """Train one classifier on a band of a built dataset."""
    out = _require_out(out, "train")
    manifest = dataset_mod.load_manifest(dataset_dir)
    signal = manifest["signal"]
    train_examples = _band_examples(dataset_dir, manifest, band, "train")
    val_examples = _band_examples(dataset_dir, manifest, band, "val")
    config = models_mod.TrainConfig(
        lr=lr, batch_size=batch_size, max_epochs=epochs, patience=patience,
        seed=seed, max_seq_len=max_len,
    )

    extra = {"model": model_kind, "band": band, "signal": signal, "seed": seed,
             "max_seq_len": max_len}
    tensors = {}
    embedding_digest = ""

    if model_kind in ("cnn", "gru"):
        if not embeddings_path:
            raise click.UsageError(f"--embeddings is required for --model {model_kind}")
        embedding_model = emb_mod.load_vectors(embeddings_path)
        embedding_digest = embedding_model.digest()
        train_x = _encode_tokens(embedding_model, _tokenize_texts(train_examples, max_len))
        val_x = _encode_tokens(embedding_model, _tokenize_texts(val_examples, max_len))
        if model_kind == "gru":
            model = models_mod.GruModel(
                dim=embedding_model.dim, hidden=hidden, dense=dense,
                seed=derive_seed(seed, "init", "gru"),
            )
        else:
            try:
                width_list = tuple(int(w) for w in widths.split(","))
            except ValueError:
                raise click.UsageError(f"cannot parse --widths {widths!r}")
            model = models_mod.CnnModel(
                dim=embedding_model.dim, widths=width_list, maps=maps,
                seed=derive_seed(seed, "init", "cnn"),
            )
    else:
        texts = [e.text for e in train_examples]
        val_texts = [e.text for e in val_examples]
        if model_kind == "baseline":
            raw_train = models_mod.length_features(texts)
            raw_val = models_mod.length_features(val_texts)
            feature_spec = models_mod.LENGTH_SPEC
        else:
            if not corpus_path:
                raise DataError(
                    "feature set inapplicable: user metadata unavailable "
                    "(profile training needs --corpus)"
                )
            records = _load_corpus_records(corpus_path)
            authors_by_id = _author_map(records)
            train_ids = {e.comment_id for e in train_examples}
            aggregates = textstats.user_aggregates(
                [r for r in records if r.comment_id in train_ids]
            )
            try:
                authors = [authors_by_id[e.comment_id] for e in train_examples]
                val_authors = [authors_by_id[e.comment_id] for e in val_examples]
            except KeyError as exc:
                raise DataError(f"comment {exc.args[0]!r} missing from --corpus") from exc
            raw_train = models_mod.profile_features(texts, authors, aggregates)
            raw_val = models_mod.profile_features(val_texts, val_authors, aggregates)
            feature_spec = models_mod.PROFILE_SPEC
            authors_sorted = sorted(aggregates.per_author)
            tensors["agg_matrix"] = np.array(
                [
                    [
                        aggregates.per_author[a].avg_comment_length,
                        aggregates.per_author[a].avg_readability,
                        aggregates.per_author[a].avg_upvotes,
                    ]
                    for a in authors_sorted
                ]
            )
            tensors["agg_global"] = np.array(aggregates.global_means)
            extra["agg_authors"] = authors_sorted
        standardizer = models_mod.Standardizer().fit(raw_train)
        train_x = standardizer.transform(raw_train)
        val_x = standardizer.transform(raw_val)
        tensors["feat_mean"] = standardizer.mean
        tensors["feat_std"] = standardizer.std
        model = models_mod.LogisticModel(raw_train.shape[1], feature_spec)

    log = models_mod.train(
        model,
        (train_x, [e.label for e in train_examples]),
        (val_x, [e.label for e in val_examples]),
        config,
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tensors.update(model.parameters)
    model_config = dict(model.config)
    model_config["train"] = config.to_dict()
    models_mod.save_checkpoint(
        out_dir / "model.ckpt", model.arch, tensors, model_config, embedding_digest, extra
    )
    (out_dir / "training_log.csv").write_text(log.to_csv(), encoding="utf-8")
    _freeze_config(out_dir, "train", {
        "model": model_kind, "dataset": str(dataset_dir), "band": band,
        "embeddings": embeddings_path, "corpus": corpus_path, "seed": seed,
        "epochs": epochs, "batch_size": batch_size, "patience": patience, "lr": lr,
        "max_len": max_len, "hidden": hidden, "dense": dense, "maps": maps,
        "widths": widths, "out": str(out),
    })
    last = log.epochs[-1]
    click.echo(
        f"trained {model_kind} (band {band}, {signal}); best epoch {log.best_epoch}, "
        f"val acc {last.val_acc:.3f}; checkpoint {out_dir / 'model.ckpt'}"
    )


# ---------------------------------------------------------------------------
# evaluate


def _rebuild_model(ck):
    model = models_mod.model_from_checkpoint(ck)
    return model


def _neural_test_inputs(ck, examples, embeddings_path):
    if not embeddings_path:
        raise click.UsageError("--embeddings is required to evaluate this model")
    embedding_model = emb_mod.load_vectors(embeddings_path)
    if ck.embedding_digest and embedding_model.digest() != ck.embedding_digest:
        raise DataError(
            "embedding file does not match the digest recorded in the checkpoint"
        )
    max_len = ck.extra.get("max_seq_len", 200)
    tokens_list = _tokenize_texts(examples, max_len)
    return _encode_tokens(embedding_model, tokens_list), tokens_list, embedding_model


@cli.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--embeddings", "embeddings_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", "labels_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="taxonomy labels CSV comment_id,class_id")
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def evaluate(checkpoint_path, dataset_dir, embeddings_path, corpus_path, labels_path, out):
    """Evaluate a checkpoint on the shared test split."""
    out = _require_out(out, "evaluate")
    manifest = dataset_mod.verify_dataset(dataset_dir)
    ck = models_mod.load_checkpoint(checkpoint_path)
    model = _rebuild_model(ck)
    examples = _test_examples(dataset_dir, manifest)
    if labels_path:
        labels = dataset_mod.read_taxonomy_labels(labels_path)
        unmatched = dataset_mod.attach_taxonomy(examples, labels)
        if unmatched:
            click.echo(f"warning: {len(unmatched)} label rows match no test example", err=True)

    if ck.arch in ("cnn", "gru"):
        inputs, _, _ = _neural_test_inputs(ck, examples, embeddings_path)
    else:
        inputs = _logistic_features(ck, examples, corpus_path)
    predictions = _predict_in_chunks(model, inputs)
    result = eval_mod.evaluate(
        predictions,
        [e.label for e in examples],
        taxonomy_classes=[e.taxonomy_class for e in examples],
        model=ck.extra.get("model", ck.arch),
        band=ck.extra.get("band", 0),
        signal=ck.extra.get("signal", manifest["signal"]),
        seed=ck.extra.get("seed", 0),
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "result.json").write_text(result.to_json() + "\n", encoding="utf-8")
    _freeze_config(out_dir, "evaluate", {
        "checkpoint": checkpoint_path, "dataset": str(dataset_dir),
        "embeddings": embeddings_path, "corpus": corpus_path, "labels": labels_path,
        "out": str(out),
    })
    click.echo(f"accuracy {result.accuracy:.4f} on {result.n_test} test examples")
    for cls, recall in result.class_recall.items():
        click.echo(f"  recall[{cls}] = {recall:.3f} (n={result.class_support[cls]})")


# ---------------------------------------------------------------------------
# explain / delete-eval


def _explain_setup(checkpoint_path, dataset_dir, embeddings_path):
    manifest = dataset_mod.verify_dataset(dataset_dir)
    ck = models_mod.load_checkpoint(checkpoint_path)
    if ck.arch not in ("cnn", "gru"):
        raise DataError("relevance methods apply to the cnn and gru models")
    model = _rebuild_model(ck)
    examples = _test_examples(dataset_dir, manifest)
    inputs, tokens_list, _ = _neural_test_inputs(ck, examples, embeddings_path)
    return ck, model, examples, inputs, tokens_list


def _relevance_fn(model, method, eps, steps, seed):
    def fn(seq, comment_id, tokens=()):
        return explain_mod.compute_relevance(
            model, seq, method, comment_id=comment_id,
            explained_class=explain_mod.CLASS_TOP,
            eps=eps, steps=steps, seed=seed, tokens=tokens,
        )

    return fn


@cli.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(list(explain_mod.METHODS)), required=True)
@click.option("--epsilon", default=1e-3, show_default=True, type=float, help="LRP stabilizer")
@click.option("--steps", default=64, show_default=True, type=int, help="integrated-gradients steps")
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--aggregate", type=click.Choice(["mean", "max"]), default="mean", show_default=True,
              help="vocabulary-level aggregation of per-occurrence relevance")
@click.option("--limit", default=0, show_default=True, type=int, help="cap on examples (0 = all)")
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def explain(checkpoint_path, dataset_dir, embeddings_path, method, epsilon, steps,
            seed, aggregate, limit, out):
    """Per-token relevance scores plus a vocabulary-level ranking."""
    out = _require_out(out, "explain")
    if method == "lrp":
        ck_probe = models_mod.load_checkpoint(checkpoint_path)
        if ck_probe.arch != "gru":
            raise DataError("lrp relevance is defined for the gru model")
    ck, model, examples, inputs, tokens_list = _explain_setup(
        checkpoint_path, dataset_dir, embeddings_path
    )
    if limit:
        examples, inputs, tokens_list = examples[:limit], inputs[:limit], tokens_list[:limit]
    fn = _relevance_fn(model, method, epsilon, steps, seed)
    vectors = [
        fn(seq, example.comment_id, tokens=tuple(tokens))
        for example, seq, tokens in zip(examples, inputs, tokens_list)
    ]
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "relevance.jsonl", "w", encoding="utf-8") as fh:
        for vec in vectors:
            fh.write(explain_mod.relevance_to_json(vec) + "\n")
    rows = explain_mod.vocabulary_relevance(vectors, aggregate=aggregate)
    (out_dir / "vocab_relevance.csv").write_text(
        explain_mod.vocabulary_relevance_csv(rows), encoding="utf-8"
    )
    _freeze_config(out_dir, "explain", {
        "checkpoint": checkpoint_path, "dataset": str(dataset_dir),
        "embeddings": embeddings_path, "method": method, "epsilon": epsilon,
        "steps": steps, "seed": seed, "aggregate": aggregate, "limit": limit,
        "out": str(out),
    })
    click.echo(f"wrote relevance for {len(vectors)} examples to {out_dir}")


@cli.command("delete-eval")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(list(explain_mod.METHODS)), required=True)
@click.option("--max-k", default=10, show_default=True, type=int)
@click.option("--mode", type=click.Choice(["remove", "zero"]), default="remove", show_default=True)
@click.option("--epsilon", default=1e-3, show_default=True, type=float)
@click.option("--steps", default=64, show_default=True, type=int)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def delete_eval(checkpoint_path, dataset_dir, embeddings_path, method, max_k, mode,
                epsilon, steps, seed, out):
    """Word-deletion curves for true positives and false negatives."""
    out = _require_out(out, "delete-eval")
    ck, model, examples, inputs, tokens_list = _explain_setup(
        checkpoint_path, dataset_dir, embeddings_path
    )
    if method == "lrp" and ck.arch != "gru":
        raise DataError("lrp relevance is defined for the gru model")
    fn = _relevance_fn(model, method, epsilon, steps, seed)
    tuples = [
        (e.comment_id, tuple(toks), seq, e.label)
        for e, toks, seq in zip(examples, tokens_list, inputs)
    ]
    curves = explain_mod.deletion_eval(
        model, tuples, lambda seq, cid: fn(seq, cid), max_k=max_k, mode=mode
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "deletion_curves.csv").write_text(
        explain_mod.deletion_curves_csv({method: curves}), encoding="utf-8"
    )
    _freeze_config(out_dir, "delete-eval", {
        "checkpoint": checkpoint_path, "dataset": str(dataset_dir),
        "embeddings": embeddings_path, "method": method, "max_k": max_k, "mode": mode,
        "epsilon": epsilon, "steps": steps, "seed": seed, "out": str(out),
    })
    for curve in curves:
        click.echo(
            f"{curve.population}: n={curve.n_examples}, "
            + ", ".join(f"k={k}:{acc:.3f}" for k, acc in curve.points[: max_k + 1])
        )


# ---------------------------------------------------------------------------
# report


@cli.command()
@click.option("--results", "results_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--layout", type=click.Choice(["comments", "reviews"]), default="comments", show_default=True)
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
def report(results_dir, layout, out):
    """Aggregate run results into accuracy grids (CSV and aligned text)."""
    out = _require_out(out, "report")
    results = eval_mod.collect_results(results_dir)
    grid = eval_mod.accuracy_grid(results, layout=layout)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"accuracy_{layout}.csv").write_text(eval_mod.grid_to_csv(grid), encoding="utf-8")
    (out_dir / f"accuracy_{layout}.txt").write_text(eval_mod.grid_to_text(grid), encoding="utf-8")
    _freeze_config(out_dir, "report", {
        "results": str(results_dir), "layout": layout, "out": str(out),
    })
    click.echo(eval_mod.grid_to_text(grid), nl=False)


if __name__ == "__main__":
    main()
