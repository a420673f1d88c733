# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled skip-gram negative-sampling kernel.

Semantics are defined by skipgram_py.train_epoch; this version runs the
same update sequence in C and releases the GIL, which also enables the
racy multi-worker mode (threads sharing the weight matrices).
"""

import numpy as np

from libc.math cimport exp, log

ctypedef unsigned long long u64

cdef u64 MULT = <u64> 0x2545F4914F6CDD1D
cdef double CLAMP = 30.0
cdef int MAX_NEG_ATTEMPTS = 5
cdef double MIN_LR_FACTOR = 1e-4


cdef inline u64 _next_state(u64 state) nogil:
    state ^= state >> 12
    state ^= state << 25
    state ^= state >> 27
    return state


def train_epoch(
    int[::1] tokens,
    long long[::1] offsets,
    double[:, ::1] win,
    double[:, ::1] wout,
    long long[::1] sub_offsets,
    int[::1] sub_indices,
    int[::1] neg_table,
    int window,
    int negatives,
    double lr0,
    long long processed_start,
    long long total_planned,
    unsigned long long rng_state,
):
    """One pass over the corpus; mutates win/wout in place."""
    cdef:
        long long n_sentences = offsets.shape[0] - 1
        long long table_size = neg_table.shape[0]
        int dim = win.shape[1]
        long long s, i, j, lo, hi, start, end, so, se, r
        long long processed = processed_start
        long long n_terms = 0
        long long span, pos
        int center, target, out_idx, cand, k, attempt, d, n_rows
        double lr, score, p, g, label, decay
        double loss_sum = 0.0
        u64 state = rng_state
        double[::1] hidden = np.zeros(dim, dtype=np.float64)
        double[::1] grad = np.zeros(dim, dtype=np.float64)

    with nogil:
        for s in range(n_sentences):
            start = offsets[s]
            end = offsets[s + 1]
            for i in range(start, end):
                center = tokens[i]
                decay = 1.0 - processed / (<double> total_planned)
                if decay < MIN_LR_FACTOR:
                    decay = MIN_LR_FACTOR
                lr = lr0 * decay
                state = _next_state(state)
                span = ((state * MULT) % <u64> window) + 1
                lo = i - span
                if lo < start:
                    lo = start
                hi = i + span + 1
                if hi > end:
                    hi = end
                so = sub_offsets[center]
                se = sub_offsets[center + 1]
                n_rows = <int> (se - so) + 1
                for j in range(lo, hi):
                    if j == i:
                        continue
                    target = tokens[j]
                    for d in range(dim):
                        hidden[d] = win[center, d]
                    for r in range(so, se):
                        for d in range(dim):
                            hidden[d] += win[sub_indices[r], d]
                    if n_rows > 1:
                        for d in range(dim):
                            hidden[d] /= n_rows
                    for d in range(dim):
                        grad[d] = 0.0
                    for k in range(negatives + 1):
                        if k == 0:
                            out_idx = target
                            label = 1.0
                        else:
                            out_idx = -1
                            for attempt in range(MAX_NEG_ATTEMPTS):
                                state = _next_state(state)
                                pos = <long long> ((state * MULT) % <u64> table_size)
                                cand = neg_table[pos]
                                if cand != target:
                                    out_idx = cand
                                    break
                            if out_idx < 0:
                                continue
                            label = 0.0
                        score = 0.0
                        for d in range(dim):
                            score += hidden[d] * wout[out_idx, d]
                        if score > CLAMP:
                            score = CLAMP
                        elif score < -CLAMP:
                            score = -CLAMP
                        p = 1.0 / (1.0 + exp(-score))
                        if label == 1.0:
                            loss_sum += -log(p)
                        else:
                            loss_sum += -log(1.0 - p)
                        n_terms += 1
                        g = lr * (label - p)
                        for d in range(dim):
                            grad[d] += g * wout[out_idx, d]
                        for d in range(dim):
                            wout[out_idx, d] += g * hidden[d]
                    if n_rows > 1:
                        for d in range(dim):
                            grad[d] /= n_rows
                    for d in range(dim):
                        win[center, d] += grad[d]
                    for r in range(so, se):
                        for d in range(dim):
                            win[sub_indices[r], d] += grad[d]
                processed += 1
    return loss_sum, n_terms, processed, state
