"""Bidirectional GRU classifier with manual backpropagation.

Architecture: frozen input embeddings, spatial dropout that discards whole
token positions, a bidirectional GRU layer, dropout, a dense ReLU layer,
and a two-way softmax readout built from the concatenated final hidden
states of both directions.

GRU step (per direction), h_0 = 0:
    r_t = sigmoid(x_t Wxr + h_{t-1} Uhr + br)
    z_t = sigmoid(x_t Wxz + h_{t-1} Uhz + bz)
    c_t = tanh(x_t Wxc + (r_t * h_{t-1}) Uhc + bc)
    h_t = z_t * h_{t-1} + (1 - z_t) * c_t
Padded timesteps keep the previous state, so the final state is the state
at the true sequence end regardless of batch padding.
"""

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .ops import glorot, length_mask, orthogonal, pad_batch, relu, sigmoid, softmax


class GruModel:
    arch = "gru"

    def __init__(
        self,
        dim,
        hidden=32,
        dense=16,
        spatial_dropout=0.1,
        dropout=0.1,
        seed=0,
    ):
        self.dim = dim
        self.hidden = hidden
        self.dense = dense
        self.spatial_dropout = spatial_dropout
        self.dropout = dropout
        rng = np.random.default_rng(seed)
        h = hidden
        params = {}
        for side in ("f", "b"):
            params[f"Wx_{side}"] = glorot(rng, (dim, 3 * h), dim, h)
            params[f"Uh_{side}"] = np.concatenate(
                [orthogonal(rng, (h, h)) for _ in range(3)], axis=1
            )
            params[f"b_{side}"] = np.zeros(3 * h)
        params["W1"] = glorot(rng, (2 * h, dense), 2 * h, dense)
        params["b1"] = np.zeros(dense)
        params["W2"] = glorot(rng, (dense, 2), dense, 2)
        params["b2"] = np.zeros(2)
        self.parameters = params

    @property
    def config(self):
        return {
            "dim": self.dim,
            "hidden": self.hidden,
            "dense": self.dense,
            "spatial_dropout": self.spatial_dropout,
            "dropout": self.dropout,
            "readout": "final-state-concat",
        }

    # ------------------------------------------------------------------
    # forward

    def _direction(self, x, mask, side):
        """Run one direction over (B, T, E); returns final state and caches."""
        h_size = self.hidden
        wx = self.parameters[f"Wx_{side}"]
        uh = self.parameters[f"Uh_{side}"]
        bias = self.parameters[f"b_{side}"]
        b_size, t_max, _ = x.shape
        h = np.zeros((b_size, h_size))
        steps = []
        for t in range(t_max):
            xt = x[:, t, :]
            pre_rz = xt @ wx[:, : 2 * h_size] + h @ uh[:, : 2 * h_size] + bias[: 2 * h_size]
            r = sigmoid(pre_rz[:, :h_size])
            z = sigmoid(pre_rz[:, h_size:])
            rh = r * h
            c_pre = xt @ wx[:, 2 * h_size :] + rh @ uh[:, 2 * h_size :] + bias[2 * h_size :]
            c = np.tanh(c_pre)
            h_new = z * h + (1 - z) * c
            m = mask[:, t : t + 1]
            steps.append({"h_prev": h, "r": r, "z": z, "c": c, "c_pre": c_pre, "rh": rh, "m": m})
            h = m * h_new + (1 - m) * h
        return h, steps

    def _direction_backward(self, x, steps, dh_final, side, want_input_grads):
        h_size = self.hidden
        wx = self.parameters[f"Wx_{side}"]
        uh = self.parameters[f"Uh_{side}"]
        d_wx = np.zeros_like(wx)
        d_uh = np.zeros_like(uh)
        d_b = np.zeros_like(self.parameters[f"b_{side}"])
        dx = np.zeros_like(x) if want_input_grads else None
        dh = dh_final
        for t in range(len(steps) - 1, -1, -1):
            s = steps[t]
            m = s["m"]
            dh_step = dh * m
            h_prev, r, z, c = s["h_prev"], s["r"], s["z"], s["c"]
            dz = dh_step * (h_prev - c)
            dc = dh_step * (1.0 - z)
            dh_prev = dh_step * z
            dc_pre = dc * (1.0 - c * c)
            xt = x[:, t, :]
            d_wx[:, 2 * h_size :] += xt.T @ dc_pre
            d_uh[:, 2 * h_size :] += s["rh"].T @ dc_pre
            d_b[2 * h_size :] += dc_pre.sum(axis=0)
            d_rh = dc_pre @ uh[:, 2 * h_size :].T
            dr = d_rh * h_prev
            dh_prev = dh_prev + d_rh * r
            dr_pre = dr * r * (1.0 - r)
            dz_pre = dz * z * (1.0 - z)
            drz = np.concatenate([dr_pre, dz_pre], axis=1)
            d_wx[:, : 2 * h_size] += xt.T @ drz
            d_uh[:, : 2 * h_size] += h_prev.T @ drz
            d_b[: 2 * h_size] += drz.sum(axis=0)
            dh_prev = dh_prev + drz @ uh[:, : 2 * h_size].T
            if want_input_grads:
                dx[:, t, :] = dc_pre @ wx[:, 2 * h_size :].T + drz @ wx[:, : 2 * h_size].T
            dh = dh_prev + dh * (1.0 - m)
        grads = {f"Wx_{side}": d_wx, f"Uh_{side}": d_uh, f"b_{side}": d_b}
        return grads, dx

    @staticmethod
    def _reverse(x, lengths):
        """Reverse each sequence within its true length; padding stays at the end."""
        out = np.zeros_like(x)
        for i, n in enumerate(lengths):
            out[i, :n] = x[i, n - 1 :: -1]
        return out

    def _forward(self, seqs, train=False, rng=None):
        x, lengths = pad_batch(seqs)
        mask = length_mask(lengths, x.shape[1])
        cache = {"lengths": lengths, "mask": mask}
        if train and self.spatial_dropout > 0:
            keep = 1.0 - self.spatial_dropout
            token_mask = (rng.random(mask.shape) < keep) / keep
            x = x * token_mask[:, :, None]
            cache["token_mask"] = token_mask
        x_rev = self._reverse(x, lengths)
        cache["x"] = x
        cache["x_rev"] = x_rev
        h_f, steps_f = self._direction(x, mask, "f")
        h_b, steps_b = self._direction(x_rev, mask, "b")
        cache["steps_f"] = steps_f
        cache["steps_b"] = steps_b
        h_cat = np.concatenate([h_f, h_b], axis=1)
        if train and self.dropout > 0:
            keep = 1.0 - self.dropout
            drop_mask = (rng.random(h_cat.shape) < keep) / keep
            h_cat = h_cat * drop_mask
            cache["drop_mask"] = drop_mask
        z1 = h_cat @ self.parameters["W1"] + self.parameters["b1"]
        a1 = relu(z1)
        logits = a1 @ self.parameters["W2"] + self.parameters["b2"]
        cache.update({"h_cat": h_cat, "z1": z1, "a1": a1, "logits": logits})
        return softmax(logits), cache

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
        h_size = self.hidden
        a1, z1, h_cat = cache["a1"], cache["z1"], cache["h_cat"]
        grads = {
            "W2": a1.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
        da1 = dlogits @ self.parameters["W2"].T
        dz1 = da1 * (z1 > 0)
        grads["W1"] = h_cat.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        dh_cat = dz1 @ self.parameters["W1"].T
        if "drop_mask" in cache:
            dh_cat = dh_cat * cache["drop_mask"]
        g_f, dx_f = self._direction_backward(
            cache["x"], cache["steps_f"], dh_cat[:, :h_size], "f", want_input_grads
        )
        g_b, dx_rev = self._direction_backward(
            cache["x_rev"], cache["steps_b"], dh_cat[:, h_size:], "b", want_input_grads
        )
        grads.update(g_f)
        grads.update(g_b)
        dx = None
        if want_input_grads:
            dx = dx_f + self._reverse(dx_rev, cache["lengths"])
            if "token_mask" in cache:
                dx = dx * cache["token_mask"][:, :, None]
        return grads, dx

    def class_scores(self, seqs, class_idx):
        """Pre-softmax logit of one class, per example."""
        _, cache = self._forward(seqs, train=False)
        return cache["logits"][:, class_idx]

    def score_and_input_grads(self, seqs, class_idx):
        """Logit of class_idx plus its gradient w.r.t. each input embedding."""
        _, cache = self._forward(seqs, train=False)
        logits = cache["logits"]
        dlogits = np.zeros_like(logits)
        dlogits[:, class_idx] = 1.0
        _, dx = self._backward(dlogits, cache, want_input_grads=True)
        lengths = cache["lengths"]
        per_example = [dx[i, : lengths[i], :].copy() for i in range(len(seqs))]
        return logits[:, class_idx], per_example

    def forward_states(self, seq):
        """Single-example forward pass exposing every intermediate value.

        Used by layer-wise relevance propagation, which re-walks the GRU
        recurrence backwards.  Returns arrays without batch dimension.
        """
        probs, cache = self._forward([seq], train=False)
        n = int(cache["lengths"][0])

        def _collect(steps):
            return {
                key: np.stack([s[key][0] for s in steps])[:n]
                for key in ("h_prev", "r", "z", "c", "c_pre", "rh")
            }

        states_f = _collect(cache["steps_f"])
        states_b = _collect(cache["steps_b"])
        h_f = cache["h_cat"][0, : self.hidden]
        h_b = cache["h_cat"][0, self.hidden :]
        return {
            "length": n,
            "x": cache["x"][0, :n],
            "x_rev": cache["x_rev"][0, :n],
            "forward": states_f,
            "backward": states_b,
            "h_final_f": h_f,
            "h_final_b": h_b,
            "h_cat": cache["h_cat"][0],
            "z1": cache["z1"][0],
            "a1": cache["a1"][0],
            "logits": cache["logits"][0],
            "probs": probs[0],
        }

    def save(self, path, embedding_digest="", extra=None):
        save_checkpoint(
            path, self.arch, dict(self.parameters), self.config, embedding_digest, extra
        )

    @classmethod
    def from_checkpoint(cls, ck: Checkpoint):
        model = cls(
            dim=ck.config["dim"],
            hidden=ck.config["hidden"],
            dense=ck.config["dense"],
            spatial_dropout=ck.config["spatial_dropout"],
            dropout=ck.config["dropout"],
        )
        for name in model.parameters:
            model.parameters[name][:] = ck.tensors[name]
        return model
