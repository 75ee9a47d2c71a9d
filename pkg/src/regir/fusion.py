"""Score fusion of two pre-fetchers: per-list min-max normalization followed
by a convex combination ens = alpha * a + (1 - alpha) * b.

Normalization is per query, never global: whole-document queries make raw
BM25 magnitudes vary by orders of magnitude between queries. A document a
component never fetched takes that component's score as 0, the floor of the
normalized range.
"""

from __future__ import annotations

from .ranking import RankedList, Run, sort_scored


def normalize_scores(ranking: RankedList) -> RankedList:
    """Min-max over the list's own scores; a constant list maps to all 1.0.
    Ordering is preserved."""
    if not ranking:
        raise ValueError("cannot normalize an empty ranking")
    scores = [s for _, s in ranking]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return RankedList([(d, 1.0) for d, _ in ranking], presorted=True)
    span = hi - lo
    return RankedList([(d, (s - lo) / span) for d, s in ranking], presorted=True)


def _check_normalized(ranking: RankedList, name: str) -> None:
    for _, s in ranking:
        if not -1e-9 <= s <= 1 + 1e-9:
            raise ValueError(f"{name} is not min-max normalized (score {s!r}); "
                             "call normalize_scores first")


def fuse(list_a: RankedList, list_b: RankedList, alpha: float, k: int) -> RankedList:
    """Top-k of the union under the convex combination. Both inputs must
    already be normalized; ties break by ascending doc_id."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_normalized(list_a, "list_a")
    _check_normalized(list_b, "list_b")
    a = dict(list_a)
    b = dict(list_b)
    fused = [(doc_id, alpha * a.get(doc_id, 0.0) + (1 - alpha) * b.get(doc_id, 0.0))
             for doc_id in set(a) | set(b)]
    return RankedList(sort_scored(fused)[:k], presorted=True)


def fuse_runs(run_a: Run, run_b: Run, alpha: float, k: int) -> Run:
    """Per-query fusion; the two runs must cover the same queries."""
    if set(run_a) != set(run_b):
        only_a = sorted(set(run_a) - set(run_b))[:3]
        only_b = sorted(set(run_b) - set(run_a))[:3]
        raise ValueError(f"query sets differ between runs (only in a: {only_a}, "
                         f"only in b: {only_b})")
    out = Run()
    for query_id in run_a:
        out[query_id] = fuse(normalize_scores(run_a[query_id]),
                             normalize_scores(run_b[query_id]), alpha, k)
    return out


def default_alpha_grid() -> list[float]:
    return [round(0.05 * i, 2) for i in range(21)]


def tune_alpha(run_a: Run, run_b: Run, qrels, alpha_grid: list[float], k: int
               ) -> tuple[float, list[tuple[float, float]]]:
    """Sweep alpha maximizing mean R@k on the given (dev) runs.

    Ties break toward smaller alpha. Returns the winner and the full
    (alpha, recall) grid for export.
    """
    from .metrics import recall_at_k

    if not alpha_grid:
        raise ValueError("alpha grid is empty")
    bad = [a for a in alpha_grid if not 0 <= a <= 1]
    if bad:
        raise ValueError(f"alpha grid values outside [0, 1]: {bad}")
    query_ids = [q for q in sorted(run_a) if qrels.relevant(q)]
    if not query_ids:
        raise ValueError("no queries with relevant documents")
    norm_a = {q: normalize_scores(run_a[q]) for q in query_ids}
    norm_b = {q: normalize_scores(run_b[q]) for q in query_ids}
    grid = []
    for alpha in alpha_grid:
        total = 0.0
        for q in query_ids:
            fused = fuse(norm_a[q], norm_b[q], alpha, k)
            total += recall_at_k(fused, qrels.relevant(q), k)
        grid.append((alpha, total / len(query_ids)))
    best_alpha, _ = max(grid, key=lambda cell: (cell[1], -cell[0]))
    return best_alpha, grid


def write_alpha_grid_csv(grid: list[tuple[float, float]], path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("alpha,recall_at_k\n")
        for alpha, recall in grid:
            fh.write(f"{alpha!r},{recall!r}\n")
