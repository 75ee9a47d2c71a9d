"""Relevance matching by per-query-term similarity histograms.

Each distinct query term contributes a log-count histogram of its cosine
similarities against the document's tokens; a small feed-forward net scores
each histogram and an idf-driven softmax gate weighs the terms:

    s_r = sum_i softmax(w_g * idf)_i * MLP(hist_i)

Gradients are hand-written (the whole model is a few hundred parameters;
a tensor framework would be the only heavyweight dependency in the engine)
and are validated against finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .features import dedup_terms, drmm_features


class DrmmModel:
    """MLP over (bins + 1)-long histograms with a learned idf gate scalar.

    params:
        W1 (hidden, bins+1), b1 (hidden,)   tanh layer
        W2 (hidden,), b2 (1,)               linear output head
        w_g (1,)                            gate logit scale on idf
    """

    kind = "drmm"

    def __init__(self, params: dict[str, np.ndarray], bins: int):
        self.params = params
        self.bins = bins

    @classmethod
    def init(cls, rng: np.random.Generator, bins: int = 30, hidden: int = 5) -> "DrmmModel":
        params = {
            "W1": rng.normal(0.0, 0.1, size=(hidden, bins + 1)),
            "b1": np.zeros(hidden),
            "W2": rng.normal(0.0, 0.1, size=hidden),
            "b2": np.zeros(1),
            "w_g": np.ones(1),
        }
        return cls(params, bins)

    @property
    def hidden(self) -> int:
        return self.params["b1"].shape[0]

    def score(self, feats) -> tuple[float, dict]:
        """feats = (histograms (T, bins+1), idf (T,)). Returns s_r and the
        cache needed for the backward pass."""
        hists, idf = feats
        if hists.ndim != 2 or hists.shape[1] != self.bins + 1:
            raise ValueError(f"histogram width {hists.shape} does not match "
                             f"bins={self.bins}")
        p = self.params
        z_pre = hists @ p["W1"].T + p["b1"]
        z = np.tanh(z_pre)
        out = z @ p["W2"] + p["b2"][0]
        gate = _softmax(p["w_g"][0] * idf)
        s_r = float(gate @ out)
        cache = {"hists": hists, "idf": idf, "z": z, "out": out, "gate": gate}
        return s_r, cache

    def backward(self, cache, d_score: float) -> dict[str, np.ndarray]:
        p = self.params
        hists, idf = cache["hists"], cache["idf"]
        z, out, gate = cache["z"], cache["out"], cache["gate"]
        d_out = d_score * gate
        d_gate = d_score * out
        d_logits = gate * (d_gate - float(d_gate @ gate))
        d_wg = np.array([float(d_logits @ idf)])
        d_W2 = z.T @ d_out
        d_b2 = np.array([d_out.sum()])
        d_z = np.outer(d_out, p["W2"])
        d_pre = d_z * (1.0 - z * z)
        return {
            "W1": d_pre.T @ hists,
            "b1": d_pre.sum(axis=0),
            "W2": d_W2,
            "b2": d_b2,
            "w_g": d_wg,
        }


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


def build_histogram(query_term: str, doc_tokens: list[str], word_vectors,
                    bins: int) -> np.ndarray:
    """Histogram for a single query term against a document, using static
    word vectors. Out-of-vocabulary query term -> zero histogram."""
    from .features import TypeEmbeddings, bin_similarities, sim_matrix

    provider = (word_vectors if isinstance(word_vectors, TypeEmbeddings)
                else TypeEmbeddings(word_vectors))
    q_units, q_mask, q_keys = provider.rows("", [query_term])
    d_units, d_mask, d_keys = provider.rows("", doc_tokens)
    if not q_mask[0] or not d_mask.any():
        return np.zeros(bins + 1)
    S = sim_matrix(q_units, q_mask, q_keys, d_units, d_mask, d_keys)
    return bin_similarities(S[0, d_mask], bins)


def drmm_score(query_tokens: list[str], doc_tokens: list[str], model: DrmmModel,
               provider, idf_table, doc_id: str = "", query_doc_id: str = "") -> float:
    """Convenience forward pass from raw (denoised) token lists; query terms
    are deduplicated before histogramming, so repeating a term changes
    nothing."""
    terms = dedup_terms(query_tokens) if provider.dedup else query_tokens
    feats = drmm_features(terms, query_doc_id, doc_tokens, doc_id,
                          provider, idf_table, model.bins)
    s_r, _ = model.score(feats)
    return s_r
