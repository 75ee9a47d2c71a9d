"""Ranked result lists and the TSV run-file interchange format.

Every retrieval stage produces a Run: query_id -> descending-score list of
(doc_id, score). Ties always break by ascending doc_id so independent
implementations and reruns produce identical files.
"""

from __future__ import annotations

import numpy as np


def sort_scored(pairs: list[tuple[str, float]]) -> list[tuple[str, float]]:
    """Descending score, ascending doc_id on ties."""
    return sorted(pairs, key=lambda p: (-p[1], p[0]))


def top_k_from_arrays(doc_ids: np.ndarray, scores: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Vectorized top-k with the canonical tie-break.

    lexsort's last key is primary: sort by -score, then doc_id ascending.
    """
    order = np.lexsort((doc_ids, -scores))
    top = order[: max(k, 0)]
    return [(str(doc_ids[i]), float(scores[i])) for i in top]


class RankedList(list):
    """Scored ranking for one query; items are (doc_id, score) tuples."""

    def __init__(self, items=(), *, presorted: bool = False):
        items = list(items)
        if not presorted:
            items = sort_scored(items)
        seen: set[str] = set()
        for doc_id, _ in items:
            if doc_id in seen:
                raise ValueError(f"duplicate doc_id in ranking: {doc_id!r}")
            seen.add(doc_id)
        super().__init__(items)

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self]

    def truncated(self, k: int) -> "RankedList":
        return RankedList(self[:k], presorted=True)

    def score_of(self, doc_id: str):
        for d, s in self:
            if d == doc_id:
                return s
        return None


class Run(dict):
    """query_id -> RankedList."""

    def truncated(self, k: int) -> "Run":
        out = Run()
        for q, ranking in self.items():
            out[q] = ranking.truncated(k)
        return out


def write_run(run: Run, path, comment: str = "") -> None:
    """TSV: query_id, rank (1-based), doc_id, score. Queries in sorted order,
    scores with repr-round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        for query_id in sorted(run):
            for rank, (doc_id, score) in enumerate(run[query_id], start=1):
                fh.write(f"{query_id}\t{rank}\t{doc_id}\t{score!r}\n")


def read_run(path) -> Run:
    """Inverse of write_run. Enforces contiguous 1-based ranks per query and
    non-increasing scores."""
    run = Run()
    expected_rank: dict[str, int] = {}
    last_score: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}: line {line_no}: expected 4 columns, got {len(parts)}")
            query_id, rank_s, doc_id, score_s = parts
            rank = int(rank_s)
            score = float(score_s)
            want = expected_rank.get(query_id, 1)
            if rank != want:
                raise ValueError(f"{path}: line {line_no}: rank {rank} for query "
                                 f"{query_id!r}, expected {want}")
            if query_id in last_score and score > last_score[query_id] + 1e-12:
                raise ValueError(f"{path}: line {line_no}: scores increase within "
                                 f"query {query_id!r}")
            expected_rank[query_id] = rank + 1
            last_score[query_id] = score
            run.setdefault(query_id, RankedList(presorted=True)).append((doc_id, score))
    for query_id, ranking in run.items():
        ids = ranking.doc_ids
        if len(set(ids)) != len(ids):
            raise ValueError(f"{path}: duplicate doc_id within query {query_id!r}")
    return run
