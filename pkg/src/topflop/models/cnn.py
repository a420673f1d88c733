"""Convolutional text classifier.

A single convolution layer per filter width with ReLU and max-over-time
pooling, dropout on the pooled feature vector, and a two-way softmax
output.  Pooling only considers windows that start inside the true token
sequence, so appending padding never changes the output.
"""

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .ops import glorot, pad_batch, relu, softmax


class CnnModel:
    arch = "cnn"

    def __init__(self, dim, widths=(3, 4, 5), maps=100, dropout=0.5, seed=0):
        self.dim = dim
        self.widths = tuple(widths)
        self.maps = maps
        self.dropout = dropout
        rng = np.random.default_rng(seed)
        params = {}
        for w in self.widths:
            params[f"W{w}"] = glorot(rng, (w, dim, maps), w * dim, maps)
            params[f"b{w}"] = np.zeros(maps)
        total = len(self.widths) * maps
        params["Wd"] = glorot(rng, (total, 2), total, 2)
        params["bd"] = np.zeros(2)
        self.parameters = params

    @property
    def config(self):
        return {
            "dim": self.dim,
            "widths": list(self.widths),
            "maps": self.maps,
            "dropout": self.dropout,
        }

    def _forward(self, seqs, train=False, rng=None):
        x, lengths = pad_batch(seqs, min_len=max(self.widths))
        b_size, t_max, _ = x.shape
        cache = {"x": x, "lengths": lengths, "convs": {}}
        pooled_parts = []
        for w in self.widths:
            n_pos = t_max - w + 1
            weight = self.parameters[f"W{w}"]
            z = np.zeros((b_size, n_pos, self.maps))
            for k in range(w):
                z += x[:, k : k + n_pos, :] @ weight[k]
            z += self.parameters[f"b{w}"]
            a = relu(z)
            # windows starting beyond the true sequence never win the max
            valid = np.maximum(np.minimum(lengths, t_max) - w + 1, 1)
            masked = np.where(
                np.arange(n_pos)[None, :, None] < valid[:, None, None], a, -np.inf
            )
            argmax = masked.argmax(axis=1)
            pooled = np.take_along_axis(masked, argmax[:, None, :], axis=1)[:, 0, :]
            cache["convs"][w] = {"z": z, "argmax": argmax, "n_pos": n_pos}
            pooled_parts.append(pooled)
        pooled = np.concatenate(pooled_parts, axis=1)
        if train and self.dropout > 0:
            keep = 1.0 - self.dropout
            mask = (rng.random(pooled.shape) < keep) / keep
            pooled = pooled * mask
            cache["drop_mask"] = mask
        cache["pooled"] = pooled
        logits = pooled @ self.parameters["Wd"] + self.parameters["bd"]
        probs = softmax(logits)
        cache["probs"] = probs
        return probs, cache

    def predict_proba(self, seqs):
        probs, _ = self._forward(seqs, train=False)
        return probs

    def loss_and_grads(self, seqs, y, rng=None, train=True):
        probs, cache = self._forward(seqs, train=train, rng=rng)
        n = len(y)
        eps = 1e-12
        loss = float(-np.mean(np.log(probs[np.arange(n), y] + eps)))
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        grads, _ = self._backward(dlogits, cache)
        return loss, grads

    def _backward(self, dlogits, cache, want_input_grads=False):
        pooled = cache["pooled"]
        grads = {
            "Wd": pooled.T @ dlogits,
            "bd": dlogits.sum(axis=0),
        }
        dpool = dlogits @ self.parameters["Wd"].T
        if "drop_mask" in cache:
            dpool = dpool * cache["drop_mask"]
        x = cache["x"]
        dx = np.zeros_like(x) if want_input_grads else None
        b_size = x.shape[0]
        rows = np.arange(b_size)[:, None]
        for i, w in enumerate(self.widths):
            conv = cache["convs"][w]
            dp = dpool[:, i * self.maps : (i + 1) * self.maps]
            dz = np.zeros((b_size, conv["n_pos"], self.maps))
            dz[rows, conv["argmax"], np.arange(self.maps)[None, :]] = dp
            dz *= conv["z"] > 0
            weight = self.parameters[f"W{w}"]
            dweight = np.zeros_like(weight)
            n_pos = conv["n_pos"]
            for k in range(w):
                dweight[k] = np.einsum("btd,btf->df", x[:, k : k + n_pos, :], dz)
                if want_input_grads:
                    dx[:, k : k + n_pos, :] += dz @ weight[k].T
            grads[f"W{w}"] = dweight
            grads[f"b{w}"] = dz.sum(axis=(0, 1))
        return grads, dx

    def class_scores(self, seqs, class_idx):
        """Pre-softmax logit of one class, per example."""
        probs, cache = self._forward(seqs, train=False)
        logits = cache["pooled"] @ self.parameters["Wd"] + self.parameters["bd"]
        return logits[:, class_idx]

    def score_and_input_grads(self, seqs, class_idx):
        """Logit of class_idx plus its gradient w.r.t. each input embedding.

        Returns (scores (B,), [ (T_i, dim) arrays trimmed to true length ]).
        """
        _, cache = self._forward(seqs, train=False)
        logits = cache["pooled"] @ self.parameters["Wd"] + self.parameters["bd"]
        dlogits = np.zeros_like(logits)
        dlogits[:, class_idx] = 1.0
        _, dx = self._backward(dlogits, cache, want_input_grads=True)
        lengths = cache["lengths"]
        per_example = [dx[i, : lengths[i], :].copy() for i in range(len(seqs))]
        return logits[:, class_idx], per_example

    def save(self, path, embedding_digest="", extra=None):
        save_checkpoint(
            path, self.arch, dict(self.parameters), self.config, embedding_digest, extra
        )

    @classmethod
    def from_checkpoint(cls, ck: Checkpoint):
        model = cls(
            dim=ck.config["dim"],
            widths=tuple(ck.config["widths"]),
            maps=ck.config["maps"],
            dropout=ck.config["dropout"],
        )
        for name in model.parameters:
            model.parameters[name][:] = ck.tensors[name]
        return model
