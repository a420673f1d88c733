"""Reference skip-gram negative-sampling kernel in numpy.

This is the semantic specification the compiled kernel mirrors: one SGD
update per (center, context) pair, xorshift64* RNG for window sizes and
negative draws, linear learning-rate decay over all planned tokens.  The
input vector of a center word is the mean of its word row and its subword
bucket rows; the gradient is split evenly back onto those rows.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
_CLAMP = 30.0
_MAX_NEG_ATTEMPTS = 5
_MIN_LR_FACTOR = 1e-4


def _next_state(state):
    state ^= state >> 12
    state = (state ^ (state << 25)) & _MASK
    state ^= state >> 27
    return state


def _draw(state, n):
    state = _next_state(state)
    return state, ((state * _MULT) & _MASK) % n


def train_epoch(
    tokens,
    offsets,
    win,
    wout,
    sub_offsets,
    sub_indices,
    neg_table,
    window,
    negatives,
    lr0,
    processed_start,
    total_planned,
    rng_state,
):
    """One pass over the corpus; mutates win/wout in place.

    Returns (loss_sum, n_terms, processed, rng_state) so epochs chain the
    RNG stream and the learning-rate schedule.
    """
    token_list = [int(t) for t in tokens]
    offset_list = [int(o) for o in offsets]
    table_size = len(neg_table)
    n_vocab = wout.shape[0]

    # input rows per vocab word: the word row plus its subword bucket rows
    rows_by_word = []
    for v in range(n_vocab):
        so, se = int(sub_offsets[v]), int(sub_offsets[v + 1])
        if se > so:
            rows = np.empty(se - so + 1, dtype=np.int64)
            rows[0] = v
            rows[1:] = sub_indices[so:se]
        else:
            rows = None
        rows_by_word.append(rows)

    loss_sum = 0.0
    n_terms = 0
    processed = int(processed_start)
    state = int(rng_state)

    for s in range(len(offset_list) - 1):
        start, end = offset_list[s], offset_list[s + 1]
        for i in range(start, end):
            center = token_list[i]
            lr = lr0 * max(_MIN_LR_FACTOR, 1.0 - processed / total_planned)
            state, span = _draw(state, window)
            span += 1
            lo = max(start, i - span)
            hi = min(end, i + span + 1)
            rows = rows_by_word[center]
            for j in range(lo, hi):
                if j == i:
                    continue
                target = token_list[j]
                if rows is None:
                    hidden = win[center].copy()
                else:
                    hidden = win[rows].mean(axis=0)
                grad = np.zeros_like(hidden)
                for k in range(negatives + 1):
                    if k == 0:
                        out_idx = target
                        label = 1.0
                    else:
                        out_idx = -1
                        for _ in range(_MAX_NEG_ATTEMPTS):
                            state, pos = _draw(state, table_size)
                            cand = int(neg_table[pos])
                            if cand != target:
                                out_idx = cand
                                break
                        if out_idx < 0:
                            continue
                        label = 0.0
                    out_row = wout[out_idx]
                    score = float(hidden @ out_row)
                    score = min(_CLAMP, max(-_CLAMP, score))
                    p = 1.0 / (1.0 + math.exp(-score))
                    loss_sum += -math.log(p) if label == 1.0 else -math.log(1.0 - p)
                    n_terms += 1
                    g = lr * (label - p)
                    grad += g * out_row
                    out_row += g * hidden
                grad /= 1 if rows is None else len(rows)
                if rows is None:
                    win[center] += grad
                else:
                    # add.at accumulates repeated bucket rows like the C loop
                    np.add.at(win, rows, grad)
            processed += 1
    return loss_sum, n_terms, processed, state
