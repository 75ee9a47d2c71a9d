"""Term-similarity features shared by the neural matchers.

Both matchers consume cosine similarities between query and document terms.
Vectors come from one of two providers
    TypeEmbeddings   one vector per term type (static word vectors)
    TokenEmbeddings  one vector per token position (frozen contextual
                     vectors produced by an external encoder, keyed
                     doc_id + token index over the denoised sequence)
and the similarity matrix pins identical in-vocabulary terms to exactly 1.0
while pairs with an out-of-vocabulary side score 0.
"""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


class TypeEmbeddings:
    """Unit-normalized static word vectors. Zero-norm vectors count as
    out-of-vocabulary (cosine is undefined for them)."""

    dedup = True

    def __init__(self, word_vectors):
        self.dim = word_vectors.dim
        self._units: dict[str, np.ndarray] = {}
        dropped = 0
        for term, vec in word_vectors.vectors.items():
            norm = np.linalg.norm(vec)
            if norm == 0:
                dropped += 1
                continue
            self._units[term] = vec / norm
        if dropped:
            log.warning("word vectors: %d zero-norm vector(s) treated as "
                        "out-of-vocabulary", dropped)

    def rows(self, doc_id: str, tokens: list[str]):
        """(units, in-vocab mask, identity keys) aligned with tokens."""
        units = np.zeros((len(tokens), self.dim))
        mask = np.zeros(len(tokens), dtype=bool)
        for i, term in enumerate(tokens):
            vec = self._units.get(term)
            if vec is not None:
                units[i] = vec
                mask[i] = True
        return units, mask, list(tokens)


class TokenEmbeddings:
    """Per-position contextual vectors. The positions index the engine's own
    denoised token sequence, so the sequence length must match; identity keys
    are positional, so no pair gets the hard exact-match 1.0."""

    dedup = False

    def __init__(self, sequences: dict[str, np.ndarray], dim: int):
        self.dim = dim
        self._seq = sequences

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._seq

    def rows(self, doc_id: str, tokens: list[str]):
        seq = self._seq.get(doc_id)
        if seq is None:
            raise KeyError(f"no token vectors for document {doc_id!r}")
        if len(seq) != len(tokens):
            raise ValueError(f"token vectors for {doc_id!r} cover {len(seq)} "
                             f"positions but the denoised text has {len(tokens)}")
        norms = np.linalg.norm(seq, axis=1)
        mask = norms > 0
        units = np.zeros_like(seq)
        units[mask] = seq[mask] / norms[mask, None]
        return units, mask, None


def load_token_vectors(path) -> TokenEmbeddings:
    """Text format: `doc_id token_index v1 ... vdim`, one line per position;
    every document's indices must form a gap-free 0..L-1 range."""
    rows: dict[str, dict[int, np.ndarray]] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"{path}: line {line_no}: expected doc_id, "
                                 f"index and vector values")
            doc_id = parts[0]
            try:
                idx = int(parts[1])
                vec = np.array([float(x) for x in parts[2:]])
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: non-numeric field") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(f"{path}: line {line_no}: dim {len(vec)} != {dim}")
            if idx in rows.setdefault(doc_id, {}):
                raise ValueError(f"{path}: line {line_no}: duplicate position "
                                 f"{idx} for {doc_id!r}")
            rows[doc_id][idx] = vec
    if dim is None:
        raise ValueError(f"{path}: empty token vector file")
    sequences = {}
    for doc_id, by_idx in rows.items():
        if sorted(by_idx) != list(range(len(by_idx))):
            raise ValueError(f"{path}: positions for {doc_id!r} are not a "
                             f"gap-free 0..{len(by_idx) - 1} range")
        sequences[doc_id] = np.stack([by_idx[i] for i in range(len(by_idx))])
    return TokenEmbeddings(sequences, dim)


def sim_matrix(q_units, q_mask, q_keys, d_units, d_mask, d_keys) -> np.ndarray:
    """Cosine similarities, clipped to [-1, 1]; 0 where either side is
    out-of-vocabulary; exactly 1.0 for identical in-vocabulary terms."""
    S = q_units @ d_units.T
    S[~q_mask, :] = 0.0
    S[:, ~d_mask] = 0.0
    np.clip(S, -1.0, 1.0, out=S)
    if q_keys is not None and d_keys is not None:
        cols: dict[str, list[int]] = {}
        for j, key in enumerate(d_keys):
            if d_mask[j]:
                cols.setdefault(key, []).append(j)
        for i, key in enumerate(q_keys):
            if q_mask[i]:
                for j in cols.get(key, ()):
                    S[i, j] = 1.0
    return S


def bin_similarities(sims: np.ndarray, bins: int) -> np.ndarray:
    """Log-count histogram: `bins` regular bins over [-1, 1) plus a reserved
    top bin counting exact 1.0 matches; length bins + 1."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    hist = np.zeros(bins + 1)
    exact = sims == 1.0
    hist[bins] = np.count_nonzero(exact)
    rest = sims[~exact]
    if len(rest):
        idx = np.floor((rest + 1.0) / 2.0 * bins).astype(int)
        np.clip(idx, 0, bins - 1, out=idx)
        np.add.at(hist, idx, 1)
    return np.log1p(hist)


def dedup_terms(tokens: list[str]) -> list[str]:
    """Distinct terms in first-occurrence order."""
    return list(dict.fromkeys(tokens))


def drmm_features(query_terms: list[str], query_doc_id: str,
                  doc_tokens: list[str], doc_id: str,
                  provider, idf_table, bins: int):
    """Per distinct query term: a similarity histogram against every
    in-vocabulary document token, plus the term's idf for the gate.

    Out-of-vocabulary query terms keep a zero histogram. With positional
    providers each query position counts as its own term.
    """
    if not query_terms:
        raise ValueError("empty query after denoising")
    q_units, q_mask, q_keys = provider.rows(query_doc_id, query_terms)
    d_units, d_mask, d_keys = provider.rows(doc_id, doc_tokens)
    S = sim_matrix(q_units, q_mask, q_keys, d_units, d_mask, d_keys)
    hists = np.zeros((len(query_terms), bins + 1))
    for i in range(len(query_terms)):
        if q_mask[i] and d_mask.any():
            hists[i] = bin_similarities(S[i, d_mask], bins)
    idf = np.array([idf_table.idf(t) for t in query_terms])
    return hists, idf


def softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


def pacrr_features(query_tokens: list[str], query_doc_id: str,
                   doc_tokens: list[str], doc_id: str,
                   provider, idf_table, q_len: int, d_len: int):
    """Similarity matrix over the (truncated) query and document token
    sequences plus the softmax-normalized idf of the retained query terms.
    No padding rows: short queries keep one row per retained term."""
    if not query_tokens:
        raise ValueError("empty query after denoising")
    if not doc_tokens:
        raise ValueError("empty document after denoising")
    q_tokens = query_tokens[:q_len]
    d_tokens = doc_tokens[:d_len]
    q_units, q_mask, q_keys = provider.rows(query_doc_id, query_tokens)
    d_units, d_mask, d_keys = provider.rows(doc_id, doc_tokens)
    S = sim_matrix(q_units[:q_len], q_mask[:q_len],
                   None if q_keys is None else q_keys[:q_len],
                   d_units[:d_len], d_mask[:d_len],
                   None if d_keys is None else d_keys[:d_len])
    idf_col = softmax(np.array([idf_table.idf(t) for t in q_tokens]))
    return S, idf_col
