"""Numerically stable activations, padding, and the Adam optimizer."""

import numpy as np


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def relu(x):
    return np.maximum(x, 0.0)


def cross_entropy(probs, labels):
    """Mean negative log likelihood of integer labels under (B, 2) probs."""
    eps = 1e-12
    return float(-np.mean(np.log(probs[np.arange(len(labels)), labels] + eps)))


def pad_batch(seqs, min_len=1):
    """Stack variable-length (T, E) arrays into (B, Tmax, E) plus true lengths."""
    lengths = np.array([max(len(s), 1) for s in seqs], dtype=np.int64)
    t_max = max(int(lengths.max()), min_len)
    dim = seqs[0].shape[1]
    batch = np.zeros((len(seqs), t_max, dim), dtype=np.float64)
    for i, seq in enumerate(seqs):
        if len(seq):
            batch[i, : len(seq)] = seq
    return batch, lengths


def length_mask(lengths, t_max):
    return (np.arange(t_max)[None, :] < lengths[:, None]).astype(np.float64)


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def orthogonal(rng, shape):
    a = rng.standard_normal(shape)
    q, r = np.linalg.qr(a if shape[0] >= shape[1] else a.T)
    q *= np.sign(np.diag(r))
    return q if shape[0] >= shape[1] else q.T


class Adam:
    """Standard Adam over a dict of parameter arrays, updated in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for key, g in grads.items():
            p = self.params[key]
            m = self.m[key]
            v = self.v[key]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
