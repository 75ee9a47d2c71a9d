"""Position-aware convolutional matcher over the query-document similarity
matrix.

Forward pass, for similarity matrix S (query terms x doc terms):
    S_k            row-wise k-max of S (unigram view)
    S_{n,k}        per kernel size n: same-padded n x n convolution with F
                   filters, max over filters, then row-wise k-max
    S_sim          [S_k | S_{n,k}... | softmax-idf column], one row per
                   retained query term
    s_r            last hidden state of a single-unit LSTM read over the
                   rows of S_sim

Backward pass is hand-written; gradient routing through the k-max and
max-over-filters picks the stable argmax (ties resolve to the lowest index),
and everything is checked against finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .features import pacrr_features


@dataclass(frozen=True)
class PacrrConfig:
    q_len: int = 256
    d_len: int = 1024
    kernel_sizes: tuple[int, ...] = (2, 3)
    filters: int = 16
    kmax: int = 2

    def __post_init__(self):
        if self.q_len < 1 or self.d_len < 1:
            raise ValueError("q_len and d_len must be >= 1")
        if self.kmax < 1:
            raise ValueError("kmax must be >= 1")
        if self.filters < 1:
            raise ValueError("filters must be >= 1")
        if any(n < 2 for n in self.kernel_sizes):
            raise ValueError("kernel sizes must be >= 2 (the unigram view is built in)")

    @property
    def input_dim(self) -> int:
        return (1 + len(self.kernel_sizes)) * self.kmax + 1

    def as_dict(self) -> dict:
        return asdict(self)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _row_kmax(M: np.ndarray, k: int):
    """Top-k values per row, descending; rows shorter than k pad with zeros.
    Returns (values (T,k), source column indices (T,k), -1 for padding)."""
    t, d = M.shape
    order = np.argsort(-M, axis=1, kind="stable")
    if d >= k:
        idx = order[:, :k]
        vals = np.take_along_axis(M, idx, axis=1)
    else:
        vals = np.concatenate([np.take_along_axis(M, order, axis=1),
                               np.zeros((t, k - d))], axis=1)
        idx = np.concatenate([order, np.full((t, k - d), -1, dtype=order.dtype)],
                             axis=1)
    return vals, idx


def _scatter_rows(target: np.ndarray, idx: np.ndarray, grads: np.ndarray) -> None:
    valid = idx >= 0
    rows = np.broadcast_to(np.arange(idx.shape[0])[:, None], idx.shape)
    np.add.at(target, (rows[valid], idx[valid]), grads[valid])


class PacrrModel:
    """params:
        K{n} (F, n, n), c{n} (F,)       conv stacks per kernel size
        lstm_W (4, input_dim), lstm_U (4,), lstm_b (4,)
                                        gate order: input, forget, output,
                                        candidate
    """

    kind = "pacrr"

    def __init__(self, params: dict[str, np.ndarray], config: PacrrConfig):
        self.params = params
        self.config = config

    @classmethod
    def init(cls, rng: np.random.Generator, config: PacrrConfig | None = None) -> "PacrrModel":
        config = config or PacrrConfig()
        params: dict[str, np.ndarray] = {}
        for n in config.kernel_sizes:
            params[f"K{n}"] = rng.normal(0.0, 0.1, size=(config.filters, n, n))
            params[f"c{n}"] = np.zeros(config.filters)
        params["lstm_W"] = rng.normal(0.0, 0.1, size=(4, config.input_dim))
        params["lstm_U"] = rng.normal(0.0, 0.1, size=4)
        params["lstm_b"] = np.zeros(4)
        return cls(params, config)

    def _conv(self, S: np.ndarray, n: int):
        """Same-padded n x n correlation with F filters; returns the padded
        windows too for the backward pass."""
        t, d = S.shape
        pt, pl = (n - 1) // 2, (n - 1) // 2
        padded = np.zeros((t + n - 1, d + n - 1))
        padded[pt:pt + t, pl:pl + d] = S
        win = sliding_window_view(padded, (n, n))
        out = np.einsum("tdab,fab->ftd", win, self.params[f"K{n}"])
        out += self.params[f"c{n}"][:, None, None]
        return out, win, (pt, pl)

    def score(self, feats) -> tuple[float, dict]:
        """feats = (S (T, D), idf_col (T,)); returns s_r and the backward
        cache."""
        S, idf_col = feats
        if S.ndim != 2 or S.shape[0] != idf_col.shape[0]:
            raise ValueError("similarity matrix and idf column disagree on "
                             "query length")
        if S.shape[0] == 0 or S.shape[1] == 0:
            raise ValueError("empty query or document")
        k = self.config.kmax
        views = []
        s_k, idx0 = _row_kmax(S, k)
        views.append(s_k)
        conv_cache = []
        for n in self.config.kernel_sizes:
            c_out, win, pads = self._conv(S, n)
            arg_f = c_out.argmax(axis=0)
            m = np.take_along_axis(c_out, arg_f[None, :, :], axis=0)[0]
            v_n, idx_n = _row_kmax(m, k)
            views.append(v_n)
            conv_cache.append({"n": n, "win": win, "pads": pads,
                               "arg_f": arg_f, "idx": idx_n})
        x = np.concatenate(views + [idf_col[:, None]], axis=1)
        s_r, lstm_steps = self._lstm_forward(x)
        cache = {"S_shape": S.shape, "idx0": idx0, "conv": conv_cache,
                 "x": x, "steps": lstm_steps}
        return s_r, cache

    def _lstm_forward(self, x: np.ndarray):
        w, u, b = self.params["lstm_W"], self.params["lstm_U"], self.params["lstm_b"]
        h = c = 0.0
        steps = []
        for t in range(x.shape[0]):
            a = w @ x[t] + u * h + b
            i, f, o = _sigmoid(a[0]), _sigmoid(a[1]), _sigmoid(a[2])
            g = np.tanh(a[3])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            steps.append((x[t], h, c, i, f, o, g, tc))
            h, c = o * tc, c_new
        return float(h), steps

    def backward(self, cache, d_score: float) -> dict[str, np.ndarray]:
        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        d_x = self._lstm_backward(cache["steps"], d_score, grads)
        k = self.config.kmax
        d_s = np.zeros(cache["S_shape"])
        _scatter_rows(d_s, cache["idx0"], d_x[:, :k])
        for pos, conv in enumerate(cache["conv"]):
            n = conv["n"]
            d_v = d_x[:, (1 + pos) * k:(2 + pos) * k]
            d_m = np.zeros(cache["S_shape"])
            _scatter_rows(d_m, conv["idx"], d_v)
            f_count = self.config.filters
            d_c_out = np.zeros((f_count,) + cache["S_shape"])
            np.put_along_axis(d_c_out, conv["arg_f"][None, :, :],
                              d_m[None, :, :], axis=0)
            grads[f"K{n}"] += np.einsum("ftd,tdab->fab", d_c_out, conv["win"])
            grads[f"c{n}"] += d_c_out.sum(axis=(1, 2))
            t_len, d_len = cache["S_shape"]
            pt, pl = conv["pads"]
            kern = self.params[f"K{n}"]
            d_pad = np.zeros((t_len + n - 1, d_len + n - 1))
            for a in range(n):
                for bcol in range(n):
                    d_pad[a:a + t_len, bcol:bcol + d_len] += np.einsum(
                        "ftd,f->td", d_c_out, kern[:, a, bcol])
            d_s += d_pad[pt:pt + t_len, pl:pl + d_len]
        # d_s is the gradient w.r.t. the (fixed) similarity matrix; nothing
        # upstream is trainable, so it stops here.
        return grads

    def _lstm_backward(self, steps, d_score: float, grads) -> np.ndarray:
        w, u = self.params["lstm_W"], self.params["lstm_U"]
        d_x = np.zeros((len(steps), w.shape[1]))
        d_h, d_c = d_score, 0.0
        for t in range(len(steps) - 1, -1, -1):
            x, h_prev, c_prev, i, f, o, g, tc = steps[t]
            d_o = d_h * tc
            d_c = d_c + d_h * o * (1.0 - tc * tc)
            d_i, d_f, d_g = d_c * g, d_c * c_prev, d_c * i
            d_a = np.array([d_i * i * (1 - i), d_f * f * (1 - f),
                            d_o * o * (1 - o), d_g * (1 - g * g)])
            grads["lstm_W"] += np.outer(d_a, x)
            grads["lstm_U"] += d_a * h_prev
            grads["lstm_b"] += d_a
            d_x[t] = d_a @ w
            d_h = float(d_a @ u)
            d_c = d_c * f
        return d_x


def pacrr_score(query_tokens: list[str], doc_tokens: list[str], model: PacrrModel,
                provider, idf_table, doc_id: str = "", query_doc_id: str = "") -> float:
    """Convenience forward pass from raw (denoised) token lists."""
    feats = pacrr_features(query_tokens, query_doc_id, doc_tokens, doc_id,
                           provider, idf_table,
                           model.config.q_len, model.config.d_len)
    s_r, _ = model.score(feats)
    return s_r
