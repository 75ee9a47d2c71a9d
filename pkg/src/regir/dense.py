"""Dense pre-fetching: tf-idf weighted embedding centroids and exact cosine kNN.

Centroid of a text t over its distinct in-vocabulary terms x_i:
    cent(t) = sum_i x_i * tf(x_i, t) * idf(x_i) / sum_i tf(x_i, t) * idf(x_i)

Search is an exact full scan: pools of tens of thousands of vectors at a few
hundred dims rank in milliseconds, and approximate methods would blur the
numbers this engine exists to reproduce.

Per-document vectors produced by external encoders plug in through the same
store type; this module validates and consumes them, nothing more.
"""

from __future__ import annotations

import logging
from collections import Counter

import numpy as np

from .ranking import RankedList, top_k_from_arrays

log = logging.getLogger(__name__)


class VectorFormatError(ValueError):
    pass


class CentroidError(ValueError):
    """No in-vocabulary token, or the tf*idf weight mass is zero."""


class WordVectors:
    """term -> vector, single fixed dimensionality."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        if dim < 1:
            raise VectorFormatError("dim must be >= 1")
        for term, vec in vectors.items():
            if vec.shape != (dim,):
                raise VectorFormatError(f"vector for {term!r} has shape {vec.shape}, "
                                        f"expected ({dim},)")
        self.dim = dim
        self.vectors = vectors

    def __contains__(self, term: str) -> bool:
        return term in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, term: str) -> np.ndarray:
        return self.vectors[term]


class DocVectorStore:
    """doc_id -> vector with a free-form provenance tag (which encoder/layer
    produced the vectors)."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int, tag: str = ""):
        if dim < 1:
            raise VectorFormatError("dim must be >= 1")
        for doc_id, vec in vectors.items():
            if vec.shape != (dim,):
                raise VectorFormatError(f"vector for {doc_id!r} has shape {vec.shape}, "
                                        f"expected ({dim},)")
        self.dim = dim
        self.tag = tag
        self.vectors = vectors
        self._ids = np.array(sorted(vectors), dtype=object)
        self._matrix = (np.stack([vectors[d] for d in self._ids])
                        if len(vectors) else np.zeros((0, dim)))
        self._norms = np.linalg.norm(self._matrix, axis=1)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def get(self, doc_id: str) -> np.ndarray:
        return self.vectors[doc_id]

    def validate_against(self, corpus) -> None:
        missing = [d for d in self.vectors if d not in corpus]
        if missing:
            raise VectorFormatError(f"doc vectors reference ids absent from the "
                                    f"collection: {sorted(missing)[:5]}")


def _parse_vector_line(line: str, line_no: int, path, dim: int | None):
    parts = line.split()
    if dim is not None and len(parts) != dim + 1:
        raise VectorFormatError(f"{path}: line {line_no}: expected {dim} values "
                                f"after the key, got {len(parts) - 1}")
    if len(parts) < 2:
        raise VectorFormatError(f"{path}: line {line_no}: no vector values")
    key = parts[0]
    try:
        values = np.array([float(x) for x in parts[1:]])
    except ValueError:
        raise VectorFormatError(f"{path}: line {line_no}: non-numeric value") from None
    return key, values


def load_word_vectors(path) -> WordVectors:
    """Text format: `term v1 v2 ... vdim`, dim inferred from the first row."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            term, vec = _parse_vector_line(line, line_no, path, dim)
            if dim is None:
                dim = len(vec)
            vectors[term] = vec
    if dim is None:
        raise VectorFormatError(f"{path}: empty vector file")
    return WordVectors(vectors, dim)


def load_doc_vectors(path) -> DocVectorStore:
    """Same line format with doc_id keys; optional first line `#dim D #tag S`."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    tag = ""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line_no == 1 and line.startswith("#dim"):
                    fields = line.split()
                    try:
                        dim = int(fields[1])
                    except (IndexError, ValueError):
                        raise VectorFormatError(f"{path}: malformed header {line!r}") from None
                    if "#tag" in fields:
                        tag = " ".join(fields[fields.index("#tag") + 1:])
                continue
            doc_id, vec = _parse_vector_line(line, line_no, path, dim)
            if dim is None:
                dim = len(vec)
            vectors[doc_id] = vec
    if dim is None:
        raise VectorFormatError(f"{path}: empty vector file")
    return DocVectorStore(vectors, dim, tag)


def save_doc_vectors(store: DocVectorStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = f"#dim {store.dim}"
        if store.tag:
            header += f" #tag {store.tag}"
        fh.write(header + "\n")
        for doc_id in sorted(store.vectors):
            vals = " ".join(repr(float(v)) for v in store.vectors[doc_id])
            fh.write(f"{doc_id} {vals}\n")


def centroid(tokens: list[str], word_vectors: WordVectors, idf_table) -> np.ndarray:
    """tf-idf weighted centroid over distinct in-vocabulary terms.

    Raises CentroidError when nothing is in vocabulary or all weights cancel;
    callers decide whether that aborts or skips the document.
    """
    acc = np.zeros(word_vectors.dim)
    mass = 0.0
    for term, tf in Counter(tokens).items():
        if term not in word_vectors:
            continue
        w = tf * idf_table.idf(term)
        acc += w * word_vectors.get(term)
        mass += w
    if mass == 0.0:
        raise CentroidError("no in-vocabulary token with positive tf*idf weight")
    return acc / mass


def build_centroid_store(corpus, pipeline, word_vectors: WordVectors,
                         on_empty: str = "skip-document") -> DocVectorStore:
    """Precompute the centroid of every document (identical to computing them
    per query, cached once).

    on_empty: 'skip-document' drops fully out-of-vocabulary docs with a
    warning; 'error' aborts.
    """
    if on_empty not in ("skip-document", "error"):
        raise ValueError(f"unknown zero-vector policy {on_empty!r}")
    vectors: dict[str, np.ndarray] = {}
    skipped = []
    for doc in corpus:
        try:
            vectors[doc.doc_id] = centroid(pipeline(doc.text), word_vectors,
                                           pipeline.idf_table)
        except CentroidError:
            if on_empty == "error":
                raise
            skipped.append(doc.doc_id)
    if skipped:
        log.warning("centroid store: skipped %d document(s) with no usable "
                    "tokens, e.g. %s", len(skipped), skipped[:3])
    return DocVectorStore(vectors, word_vectors.dim, tag="w2v-cent")


def knn_search(query_vec: np.ndarray, store: DocVectorStore, k: int) -> RankedList:
    """Exact cosine top-k. Zero-norm stored vectors get similarity -1 so they
    sink below every real match; ties break by ascending doc_id."""
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (store.dim,):
        raise ValueError(f"query vector has shape {query_vec.shape}, "
                         f"store dim is {store.dim}")
    qnorm = np.linalg.norm(query_vec)
    if qnorm == 0:
        raise ValueError("zero query vector")
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(store) == 0:
        return RankedList(presorted=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = (store._matrix @ query_vec) / (store._norms * qnorm)
    sims = np.where(store._norms == 0, -1.0, sims)
    return RankedList(top_k_from_arrays(store._ids, sims, min(k, len(store))),
                      presorted=True)


def dense_prefetch(query_doc, mode: str, k: int, *, pipeline=None,
                   word_vectors: WordVectors | None = None,
                   pool_store: DocVectorStore | None = None,
                   query_store: DocVectorStore | None = None) -> RankedList:
    """One dense pre-fetch for a single query document.

    'w2v-cent' derives the query centroid from its denoised tokens and scans
    a precomputed pool centroid store. 'doc-vectors' looks the query up in a
    query-side store and scans the pool-side store (externally encoded
    vectors on both sides).
    """
    if pool_store is None:
        raise ValueError("pool vector store is required")
    if mode == "w2v-cent":
        if pipeline is None or word_vectors is None:
            raise ValueError("w2v-cent mode needs a pipeline and word vectors")
        qvec = centroid(pipeline(query_doc.text), word_vectors, pipeline.idf_table)
    elif mode == "doc-vectors":
        if query_store is None:
            raise ValueError("doc-vectors mode needs a query-side store")
        if query_doc.doc_id not in query_store:
            raise KeyError(f"no vector for query {query_doc.doc_id!r}")
        qvec = query_store.get(query_doc.doc_id)
    else:
        raise ValueError(f"unknown dense mode {mode!r}")
    return knn_search(qvec, store=pool_store, k=k)
