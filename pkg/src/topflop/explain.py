"""Per-token relevance attribution and the word-deletion evaluation.

Four scoring methods: layer-wise relevance propagation (epsilon rule,
value pathways only through the GRU gating), gradient sensitivity (squared
gradient norm), integrated gradients (midpoint Riemann sum from a zero
baseline), and a seeded random baseline.  The deletion protocol removes
the most relevant tokens from true positives (accuracy should fall) and
the least relevant tokens from false negatives (accuracy should rise).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .seeding import derive_seed

CLASS_TOP = 1
CLASS_FLOP = 0
METHODS = ("lrp", "sa", "ig", "random")


@dataclass
class RelevanceVector:
    comment_id: str
    method: str
    scores: np.ndarray  # one real per input token
    explained_class: int
    output: float  # model score (pre-softmax) for the explained class
    tokens: tuple = ()


@dataclass
class DeletionCurve:
    method: str
    population: str  # "true_positives" | "false_negatives"
    points: list = field(default_factory=list)  # (k, accuracy)
    n_examples: int = 0
    exhausted: int = 0  # examples whose whole sequence was deleted at some k


# ---------------------------------------------------------------------------
# LRP building blocks


def lrp_linear(h_in, weight, bias, h_out, r_out, eps=1e-3):
    """Epsilon-rule relevance through a linear map h_out = h_in @ weight + bias.

    R_in_i = sum_j h_in_i * w_ij / (h_out_j + eps * sign(h_out_j)) * R_out_j.
    Bias relevance is absorbed, not redistributed.
    """
    sign = np.where(h_out >= 0, 1.0, -1.0)
    denom = h_out + eps * sign
    return (h_in[:, None] * weight) @ (r_out / denom)


def lrp_dense_chain(layers, x, class_idx, eps=1e-3):
    """LRP through stacked (weight, bias, relu?) layers; used for dense-only
    fixtures.  Returns (input relevance, explained output score)."""
    activations = [x]
    pre = []
    a = x
    for weight, bias, use_relu in layers:
        z = a @ weight + bias
        pre.append(z)
        a = np.maximum(z, 0.0) if use_relu else z
        activations.append(a)
    out = pre[-1]
    r = np.zeros_like(out)
    r[class_idx] = out[class_idx]
    for i in range(len(layers) - 1, -1, -1):
        weight, bias, _ = layers[i]
        r = lrp_linear(activations[i], weight, bias, pre[i], r, eps=eps)
    return r, float(out[class_idx])


def relevance_lrp(model, seq, comment_id="", explained_class=CLASS_TOP, eps=1e-3, tokens=()):
    """LRP through the GRU classifier for one embedded sequence.

    Relevance enters at the explained class logit and flows backwards
    through the dense layers and then along the GRU value pathways: the
    state mix h_t = z*h_prev + (1-z)*c splits relevance between its two
    terms, the candidate distributes to x_t and r*h_prev through its
    linear map, and gates themselves receive nothing.
    """
    if len(seq) == 0:
        return RelevanceVector(comment_id, "lrp", np.zeros(0), explained_class, 0.0, tuple(tokens))
    states = model.forward_states(seq)
    n = states["length"]
    h_size = model.hidden
    logits = states["logits"]

    r_out = np.zeros_like(logits)
    r_out[explained_class] = logits[explained_class]
    # dense readout: logits <- a1 <- (relu) <- z1 <- h_cat
    r_a1 = lrp_linear(
        states["a1"], model.parameters["W2"], model.parameters["b2"], logits, r_out, eps=eps
    )
    r_hcat = lrp_linear(
        states["h_cat"], model.parameters["W1"], model.parameters["b1"], states["z1"], r_a1, eps=eps
    )

    r_x = np.zeros((n, model.dim))
    r_x_rev = np.zeros((n, model.dim))
    for side, r_final, r_target in (
        ("f", r_hcat[:h_size], r_x),
        ("b", r_hcat[h_size:], r_x_rev),
    ):
        st = states["forward" if side == "f" else "backward"]
        x = states["x" if side == "f" else "x_rev"]
        wx = model.parameters[f"Wx_{side}"]
        uh = model.parameters[f"Uh_{side}"]
        bias = model.parameters[f"b_{side}"]
        r_h = r_final
        for t in range(n - 1, -1, -1):
            h_prev, r_gate, z_gate, c, rh = (
                st["h_prev"][t],
                st["r"][t],
                st["z"][t],
                st["c"][t],
                st["rh"][t],
            )
            h_t = z_gate * h_prev + (1.0 - z_gate) * c
            # split between the kept-state and candidate terms (identity maps
            # with the gates acting as fixed multipliers)
            sign = np.where(h_t >= 0, 1.0, -1.0)
            denom = h_t + eps * sign
            r_h_prev = (z_gate * h_prev) / denom * r_h
            r_c = ((1.0 - z_gate) * c) / denom * r_h
            # candidate: c = tanh(c_pre); tanh passes relevance through unchanged
            c_pre = st["c_pre"][t]
            r_target[t] = lrp_linear(x[t], wx[:, 2 * h_size :], bias[2 * h_size :], c_pre, r_c, eps=eps)
            r_rh = lrp_linear(rh, uh[:, 2 * h_size :], bias[2 * h_size :], c_pre, r_c, eps=eps)
            r_h = r_h_prev + r_rh
    r_x_total = r_x + r_x_rev[::-1]
    scores = r_x_total.sum(axis=1)
    return RelevanceVector(
        comment_id=comment_id,
        method="lrp",
        scores=scores,
        explained_class=explained_class,
        output=float(logits[explained_class]),
        tokens=tuple(tokens),
    )


# ---------------------------------------------------------------------------
# Gradient-based methods


def relevance_sa(model, seq, comment_id="", explained_class=CLASS_TOP, tokens=()):
    """Squared L2 norm of the class-score gradient per token embedding."""
    if len(seq) == 0:
        return RelevanceVector(comment_id, "sa", np.zeros(0), explained_class, 0.0, tuple(tokens))
    scores, grads = model.score_and_input_grads([seq], explained_class)
    g = grads[0]
    return RelevanceVector(
        comment_id=comment_id,
        method="sa",
        scores=(g * g).sum(axis=1),
        explained_class=explained_class,
        output=float(scores[0]),
        tokens=tuple(tokens),
    )


def relevance_ig(
    model, seq, comment_id="", explained_class=CLASS_TOP, steps=64, baseline=None, tokens=()
):
    """Integrated gradients from a baseline (default all-zero embeddings).

    Midpoint Riemann sum with `steps` points; per-token score is the sum of
    per-dimension attributions, which satisfies completeness against
    F(x) - F(baseline) up to quadrature error.
    """
    if steps < 16:
        raise ValueError("integrated gradients needs at least 16 steps")
    if len(seq) == 0:
        return RelevanceVector(comment_id, "ig", np.zeros(0), explained_class, 0.0, tuple(tokens))
    x = np.asarray(seq, dtype=np.float64)
    x0 = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    diff = x - x0
    alphas = (np.arange(steps) + 0.5) / steps
    path = [x0 + a * diff for a in alphas]
    _, grads = model.score_and_input_grads(path, explained_class)
    mean_grad = np.mean(grads, axis=0)
    attribution = diff * mean_grad
    score_x = float(model.class_scores([x], explained_class)[0])
    return RelevanceVector(
        comment_id=comment_id,
        method="ig",
        scores=attribution.sum(axis=1),
        explained_class=explained_class,
        output=score_x,
        tokens=tuple(tokens),
    )


def ig_completeness_gap(model, seq, explained_class=CLASS_TOP, steps=128):
    """(|sum(attributions) - (F(x) - F(x0))|, |F(x) - F(x0)|) for one example."""
    vec = relevance_ig(model, seq, explained_class=explained_class, steps=steps)
    x = np.asarray(seq, dtype=np.float64)
    if x.size == 0:
        x = np.zeros((1, model.dim))
    f_x = float(model.class_scores([x], explained_class)[0])
    f_0 = float(model.class_scores([np.zeros_like(x)], explained_class)[0])
    gap = f_x - f_0
    return abs(float(vec.scores.sum()) - gap), abs(gap)


def relevance_random(seq, comment_id="", explained_class=CLASS_TOP, seed=1, tokens=()):
    """I.i.d. uniform scores; deterministic for a fixed seed and comment id."""
    n = len(seq)
    rng = np.random.default_rng(derive_seed(seed, "random-relevance", comment_id))
    return RelevanceVector(
        comment_id=comment_id,
        method="random",
        scores=rng.random(n),
        explained_class=explained_class,
        output=0.0,
        tokens=tuple(tokens),
    )


def compute_relevance(model, seq, method, comment_id="", explained_class=CLASS_TOP,
                      eps=1e-3, steps=64, seed=1, tokens=()):
    if method == "lrp":
        return relevance_lrp(model, seq, comment_id, explained_class, eps=eps, tokens=tokens)
    if method == "sa":
        return relevance_sa(model, seq, comment_id, explained_class, tokens=tokens)
    if method == "ig":
        return relevance_ig(model, seq, comment_id, explained_class, steps=steps, tokens=tokens)
    if method == "random":
        return relevance_random(seq, comment_id, explained_class, seed=seed, tokens=tokens)
    raise ValueError(f"unknown relevance method {method!r}")


def relevance_to_json(vec):
    return json.dumps(
        {
            "id": vec.comment_id,
            "method": vec.method,
            "tokens": list(vec.tokens),
            "scores": [float(s) for s in vec.scores],
            "class": "top" if vec.explained_class == CLASS_TOP else "flop",
            "output": vec.output,
        },
        ensure_ascii=False,
    )


def vocabulary_relevance(vectors, aggregate="mean"):
    """Vocabulary-level ranking: aggregate per-occurrence token relevance.

    aggregate is "mean" (default) or "max".  Returns rows
    (token, aggregated_score, occurrences) sorted by score descending.
    """
    if aggregate not in ("mean", "max"):
        raise ValueError("aggregate must be 'mean' or 'max'")
    sums = defaultdict(float)
    maxes = defaultdict(lambda: -np.inf)
    counts = defaultdict(int)
    for vec in vectors:
        for token, score in zip(vec.tokens, vec.scores):
            sums[token] += float(score)
            maxes[token] = max(maxes[token], float(score))
            counts[token] += 1
    rows = []
    for token in sums:
        value = sums[token] / counts[token] if aggregate == "mean" else maxes[token]
        rows.append((token, value, counts[token]))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


def vocabulary_relevance_csv(rows):
    lines = ["token,relevance,occurrences"]
    for token, value, count in rows:
        lines.append(f"{token},{value:.8f},{count}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Word-deletion evaluation


def _delete_tokens(seq, tokens, positions, mode):
    keep = [i for i in range(len(seq)) if i not in positions]
    if mode == "remove":
        if not keep:
            return np.zeros((0, seq.shape[1])), ()
        return seq[keep], tuple(tokens[i] for i in keep)
    # "zero": keep positions, blank the embeddings
    out = seq.copy()
    out[sorted(positions)] = 0.0
    return out, tuple(tokens)


def _ranked_positions(scores, k, largest):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i) if largest else (scores[i], i))
    return set(order[:k])


def deletion_eval(model, examples, relevance_fn, max_k=10, mode="remove"):
    """Deletion curves over true positives and false negatives.

    examples: list of (comment_id, tokens, seq, label).  relevance_fn maps
    (seq, comment_id) -> RelevanceVector for the top class.  For true
    positives (label top, predicted top) the k most relevant tokens are
    deleted; for false negatives (label top, predicted flop) the k least
    relevant.  Curves report accuracy (fraction predicted top) per k, with
    the k=0 endpoints fixed at 1.0 and 0.0 by construction.
    """
    if mode not in ("remove", "zero"):
        raise ValueError("mode must be 'remove' or 'zero'")
    preds = model.predict_proba([seq for _, _, seq, _ in examples]).argmax(axis=1)
    populations = {"true_positives": [], "false_negatives": []}
    for (comment_id, tokens, seq, label), pred in zip(examples, preds):
        if label != CLASS_TOP:
            continue
        key = "true_positives" if pred == CLASS_TOP else "false_negatives"
        populations[key].append((comment_id, tokens, seq))

    curves = []
    for population, members in populations.items():
        largest = population == "true_positives"
        start = 1.0 if largest else 0.0
        curve = DeletionCurve(
            method="", population=population, points=[(0, start)], n_examples=len(members)
        )
        if members:
            relevances = [relevance_fn(seq, comment_id) for comment_id, _, seq in members]
            for k in range(1, max_k + 1):
                mutated = []
                for (comment_id, tokens, seq), vec in zip(members, relevances):
                    if k >= len(seq):
                        curve.exhausted += 1
                    positions = _ranked_positions(vec.scores, min(k, len(seq)), largest)
                    new_seq, _ = _delete_tokens(seq, tokens, positions, mode)
                    mutated.append(new_seq)
                preds_k = model.predict_proba(mutated).argmax(axis=1)
                curve.points.append((k, float(np.mean(preds_k == CLASS_TOP))))
        curves.append(curve)
    return curves


def deletion_curves_csv(curves_by_method):
    lines = ["method,population,k,accuracy"]
    for method, curves in curves_by_method.items():
        for curve in curves:
            for k, acc in curve.points:
                lines.append(f"{method},{curve.population},{k},{acc:.6f}")
    return "\n".join(lines) + "\n"
