"""Ranking metrics: R@k, binary-gain nDCG@k, R-Precision, and mean/sd
aggregation over multiple seeded runs.

Macro averages run over queries with at least one relevant document; the
rest are excluded and counted. Gains are binary, the discount is
log2(rank + 1), and the ideal DCG places min(R, k) relevant documents at the
top, matching the usual trec_eval conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .ranking import Run


def _ids(ranked) -> list[str]:
    if hasattr(ranked, "doc_ids"):
        return ranked.doc_ids
    return list(ranked)


def recall_at_k(ranked, relevant: set[str], k: int) -> float:
    if not relevant:
        raise ValueError("empty relevant set")
    if k < 1:
        raise ValueError("k must be >= 1")
    top = _ids(ranked)[:k]
    return sum(1 for d in top if d in relevant) / len(relevant)


def ndcg_at_k(ranked, relevant: set[str], k: int) -> float:
    if not relevant:
        raise ValueError("empty relevant set")
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = 0.0
    for i, doc_id in enumerate(_ids(ranked)[:k], start=1):
        if doc_id in relevant:
            dcg += 1.0 / math.log2(i + 1)
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(relevant), k) + 1))
    return dcg / ideal


def r_precision(ranked, relevant: set[str]) -> float:
    """|top-R hits| / R with R = |relevant|; short lists just contribute
    whatever prefix they have."""
    if not relevant:
        raise ValueError("empty relevant set")
    r = len(relevant)
    top = _ids(ranked)[:r]
    return sum(1 for d in top if d in relevant) / r


@dataclass
class EvalReport:
    """Per-query metric rows plus macro means. metric_names fixes column
    order for CSV export."""

    k: int
    per_query: dict[str, dict[str, float]]
    excluded_query_ids: list[str] = field(default_factory=list)

    @property
    def metric_names(self) -> list[str]:
        return [f"r_at_{self.k}", f"ndcg_at_{self.k}", "rp"]

    @property
    def macro(self) -> dict[str, float]:
        names = self.metric_names
        n = len(self.per_query)
        if n == 0:
            return {m: 0.0 for m in names}
        return {m: sum(row[m] for row in self.per_query.values()) / n for m in names}

    def __getitem__(self, metric: str) -> float:
        return self.macro[metric]


def evaluate_run(run: Run, qrels, k: int = 20) -> EvalReport:
    """Score every query in the run; queries with no relevant documents are
    excluded from the macro average and listed on the report."""
    per_query: dict[str, dict[str, float]] = {}
    excluded = []
    for query_id in sorted(run):
        relevant = qrels.relevant(query_id)
        if not relevant:
            excluded.append(query_id)
            continue
        ranking = run[query_id]
        per_query[query_id] = {
            f"r_at_{k}": recall_at_k(ranking, relevant, k),
            f"ndcg_at_{k}": ndcg_at_k(ranking, relevant, k),
            "rp": r_precision(ranking, relevant),
        }
    return EvalReport(k, per_query, excluded)


def write_eval_csv(report: EvalReport, path, comment: str = "") -> None:
    """`query_id,<metrics...>` rows in sorted query order, then a `mean`
    summary row over the included queries."""
    names = report.metric_names
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        if report.excluded_query_ids:
            fh.write(f"# excluded (no relevant docs): "
                     f"{','.join(report.excluded_query_ids)}\n")
        fh.write("query_id," + ",".join(names) + "\n")
        for query_id in sorted(report.per_query):
            row = report.per_query[query_id]
            fh.write(query_id + "," + ",".join(repr(row[m]) for m in names) + "\n")
        macro = report.macro
        fh.write("mean," + ",".join(repr(macro[m]) for m in names) + "\n")


def read_eval_csv(path) -> tuple[dict[str, dict[str, float]], dict[str, float], list[str]]:
    """Returns (per-query rows, mean row, metric names)."""
    per_query: dict[str, dict[str, float]] = {}
    mean_row: dict[str, float] = {}
    names: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if not names:
                if parts[0] != "query_id":
                    raise ValueError(f"{path}: missing header row")
                names = parts[1:]
                continue
            values = {m: float(v) for m, v in zip(names, parts[1:])}
            if parts[0] == "mean":
                mean_row = values
            else:
                per_query[parts[0]] = values
    if not names:
        raise ValueError(f"{path}: empty eval csv")
    return per_query, mean_row, names


def aggregate_runs(reports: list[EvalReport]) -> dict[str, tuple[float, float]]:
    """metric -> (mean, population sd) of the macro averages across seeded
    runs. The runs are the whole population of reported trials, hence the
    population variance."""
    if not reports:
        raise ValueError("no reports to aggregate")
    first = reports[0]
    for rep in reports[1:]:
        if set(rep.per_query) != set(first.per_query):
            raise ValueError("reports cover different query sets")
        if rep.k != first.k:
            raise ValueError("reports use different k")
    out: dict[str, tuple[float, float]] = {}
    for metric in first.metric_names:
        values = [rep.macro[metric] for rep in reports]
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        out[metric] = (mean, math.sqrt(var))
    return out


def write_summary_csv(summary: dict[str, tuple[float, float]], path,
                      comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("metric,mean,sd\n")
        for metric, (mean, sd) in summary.items():
            fh.write(f"{metric},{mean!r},{sd!r}\n")
