"""Ranking-quality metrics: NDCG@10, MAP@10, MAP@100.

Conventions match the standard TREC evaluator: NDCG gain is ``2^grade - 1``
with a ``log2(rank + 1)`` discount, MAP uses the full relevant count R (not
capped at the cutoff), and queries without any relevant document are excluded
from the means.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

DEFAULT_METRICS = ("ndcg@10", "map@10", "map@100")


@dataclass
class EvalResult:
    per_query: dict = field(default_factory=dict)  # metric -> {query_id: value}
    rerank_depth: int = 0

    def mean(self, metric):
        values = self.per_query.get(metric, {})
        if not values:
            return 0.0
        return sum(values.values()) / len(values)

    def means(self):
        return {m: self.mean(m) for m in self.per_query}


def _gain(grade):
    return (1 << grade) - 1


def ndcg_at_k(ranked_doc_ids, grades, k=10):
    """Graded NDCG; returns None when the query has no relevant document."""
    ideal = sorted((g for g in grades.values() if g > 0), reverse=True)
    if not ideal:
        return None
    dcg = 0.0
    for i, doc_id in enumerate(ranked_doc_ids[:k], start=1):
        g = grades.get(doc_id, 0)
        if g > 0:
            dcg += _gain(g) / math.log2(i + 1)
    idcg = sum(_gain(g) / math.log2(i + 1) for i, g in enumerate(ideal[:k], start=1))
    return dcg / idcg


def map_at_k(ranked_doc_ids, grades, k=10, rel_threshold=1):
    """Average precision at k, normalized by the full relevant count R."""
    relevant = {d for d, g in grades.items() if g >= rel_threshold}
    if not relevant:
        return None
    hits = 0
    total = 0.0
    for i, doc_id in enumerate(ranked_doc_ids[:k], start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def evaluate(run, qrels, rel_threshold=2, rerank_depth=0):
    """Aggregate NDCG@10 / MAP@10 / MAP@100 over the queries of ``run``."""
    if not run:
        raise ValueError("run is empty")
    result = EvalResult({m: {} for m in DEFAULT_METRICS}, rerank_depth)
    for qid, entries in run.items():
        if qid not in qrels.grades:
            warnings.warn(f"query {qid} missing from qrels; excluded", stacklevel=2)
            continue
        grades = qrels.grades[qid]
        ranked = [doc_id for doc_id, _ in entries]
        values = {
            "ndcg@10": ndcg_at_k(ranked, grades, 10),
            "map@10": map_at_k(ranked, grades, 10, rel_threshold),
            "map@100": map_at_k(ranked, grades, 100, rel_threshold),
        }
        for metric, value in values.items():
            if value is not None:
                result.per_query[metric][qid] = value
    return result


def format_table(result, csv=False):
    metrics = list(result.per_query)
    means = result.means()
    if csv:
        lines = ["metric,mean,queries"]
        for m in metrics:
            lines.append(f"{m},{means[m]:.6f},{len(result.per_query[m])}")
        return "\n".join(lines)
    width = max(len(m) for m in metrics)
    lines = [f"{'metric'.ljust(width)}  mean     queries"]
    for m in metrics:
        lines.append(f"{m.ljust(width)}  {means[m]:.4f}   {len(result.per_query[m])}")
    return "\n".join(lines)
