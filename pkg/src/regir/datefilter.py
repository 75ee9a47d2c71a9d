"""Publication-year distance filtering of candidate lists.

A transposing act is usually enacted within a few years of what it
transposes, so dropping candidates far from the query's year removes
near-duplicate amendments that outrank the truly related acts. The filter
can run before re-ranking (pre, with refill from a deeper list) or after
(post).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

from .ranking import RankedList, Run

log = logging.getLogger(__name__)

MODES = ("pre", "post")


@dataclass(frozen=True)
class DateWindow:
    """Keep candidates within max_distance_years of the query year.
    math.inf disables the cut."""

    max_distance_years: float
    mode: str = "post"

    def __post_init__(self):
        y = self.max_distance_years
        if y != math.inf and (y < 0 or int(y) != y):
            raise ValueError(f"max_distance_years must be a non-negative integer "
                             f"or inf, got {y}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def apply_filter(query_doc, ranking: RankedList, window: DateWindow, corpus) -> RankedList:
    """Pure order-preserving filter: drop entries whose year lies outside the
    window. Documents with unknown year (0) always pass; a query with unknown
    year disables the filter for that query with a warning."""
    if query_doc.year == 0:
        log.warning("query %s has no publication year; date filter skipped",
                    query_doc.doc_id)
        return ranking
    y = window.max_distance_years
    kept = [(doc_id, score) for doc_id, score in ranking
            if corpus.get(doc_id).year == 0
            or abs(corpus.get(doc_id).year - query_doc.year) <= y]
    return RankedList(kept, presorted=True)


def prefilter(query_doc, deep_ranking: RankedList, window: DateWindow,
              corpus, k: int) -> RankedList:
    """Pre-filtering with refill: filter the deep (depth ~2k) list, then keep
    the first k survivors, so downstream re-ranking still sees k candidates
    when the deep list has enough in-window entries."""
    return apply_filter(query_doc, deep_ranking, window, corpus).truncated(k)


def filter_run(run: Run, window: DateWindow, query_corpus, pool_corpus,
               k: int | None = None) -> Run:
    """Apply the window to every query of a run; k triggers refill semantics
    (pre mode)."""
    out = Run()
    for query_id, ranking in run.items():
        query_doc = query_corpus.get(query_id)
        filtered = apply_filter(query_doc, ranking, window, pool_corpus)
        out[query_id] = filtered.truncated(k) if k is not None else filtered
    return out


def choose_window(run: Run, qrels, query_corpus, pool_corpus,
                  grid: list[float], mode: str, k: int = 20) -> float:
    """argmax of mean R@k over candidate windows on dev data. Ties go to the
    larger (less destructive) window."""
    from .metrics import recall_at_k

    if not grid:
        raise ValueError("window grid is empty")
    query_ids = [q for q in sorted(run) if qrels.relevant(q)]
    if not query_ids:
        raise ValueError("no queries with relevant documents")
    best_y, best_recall = None, -1.0
    for y in grid:
        window = DateWindow(y, mode)
        total = 0.0
        for query_id in query_ids:
            filtered = apply_filter(query_corpus.get(query_id), run[query_id],
                                    window, pool_corpus)
            if mode == "pre":
                filtered = filtered.truncated(k)
            total += recall_at_k(filtered, qrels.relevant(query_id), k)
        recall = total / len(query_ids)
        if recall > best_recall or (recall == best_recall and best_y is not None
                                    and y > best_y):
            best_y, best_recall = y, recall
    return best_y


def year_diff_histogram(qrels, query_corpus, pool_corpus) -> Counter:
    """Histogram of year(relevant) - year(query) over all judged pairs with
    known years on both sides. On real data the mass sits near 0 with tails
    on both sides."""
    hist: Counter = Counter()
    for query_id in sorted(qrels.entries):
        q_year = query_corpus.get(query_id).year
        if q_year == 0:
            continue
        for doc_id in sorted(qrels.relevant(query_id)):
            d_year = pool_corpus.get(doc_id).year
            if d_year == 0:
                continue
            hist[d_year - q_year] += 1
    return hist


def write_year_hist_csv(hist: Counter, path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("year_diff,count\n")
        for diff in sorted(hist):
            fh.write(f"{diff},{hist[diff]}\n")
