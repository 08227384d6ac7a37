"""Ranking metrics, significance testing, and the latency benchmark."""

from __future__ import annotations

import gc
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from scipy import stats as scipy_stats

from . import trec
from .errors import InvalidInputError
from .graph import CorpusGraph
from .relevance import Query, Ranking, Scorer, StubScorer
from .schedulers import ScheduleConfig, rerank


def recall_at(
    run_docnos: Sequence[str],
    qrels_for_query: Mapping[str, int],
    c: int,
    rel_threshold: int = 2,
) -> float:
    """|relevant in top-c| / |relevant|; 0.0 when the query has no relevant docs."""
    if c < 1:
        raise InvalidInputError("cutoff must be >= 1")
    relevant = {d for d, g in qrels_for_query.items() if g >= rel_threshold}
    if not relevant:
        return 0.0
    hits = sum(1 for d in run_docnos[:c] if d in relevant)
    return hits / len(relevant)


def ndcg_at(
    run_docnos: Sequence[str],
    qrels_for_query: Mapping[str, int],
    cutoff: int,
) -> float:
    """Exponential-gain nDCG: gain 2^grade - 1, discount log2(rank + 1)."""
    if cutoff < 1:
        raise InvalidInputError("cutoff must be >= 1")
    dcg = 0.0
    for rank, docno in enumerate(run_docnos[:cutoff], 1):
        grade = qrels_for_query.get(docno, 0)
        if grade > 0:
            dcg += (2.0**grade - 1.0) / math.log2(rank + 1)
    ideal = sorted(qrels_for_query.values(), reverse=True)[:cutoff]
    idcg = sum(
        (2.0**grade - 1.0) / math.log2(rank + 1)
        for rank, grade in enumerate(ideal, 1)
        if grade > 0
    )
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def paired_ttest_bonferroni(
    a: Sequence[float],
    b: Sequence[float],
    comparisons: int = 1,
    alpha: float = 0.05,
) -> Tuple[float, float, bool]:
    """Two-sided paired t-test; significant iff p < alpha / comparisons."""
    if len(a) != len(b):
        raise InvalidInputError("paired samples must have equal length")
    n = len(a)
    if n < 2:
        raise InvalidInputError("need at least two pairs")
    if comparisons < 1:
        raise InvalidInputError("comparisons must be >= 1")
    diffs = [x - y for x, y in zip(a, b)]
    mean = statistics.fmean(diffs)
    sd = statistics.stdev(diffs)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0, False
        t = math.inf if mean > 0 else -math.inf
        return t, 0.0, 0.0 < alpha / comparisons
    t = mean * math.sqrt(n) / sd
    p = 2.0 * float(scipy_stats.t.sf(abs(t), n - 1))
    return t, p, p < alpha / comparisons


@dataclass
class MetricReport:
    """Per-query and mean metric values; means are plain arithmetic means."""

    per_query: Dict[str, Dict[str, float]] = field(default_factory=dict)  # metric -> qid -> value
    no_relevant: List[str] = field(default_factory=list)

    def mean(self, metric: str) -> float:
        values = self.per_query[metric]
        return statistics.fmean(values.values()) if values else 0.0

    def metrics(self) -> List[str]:
        return list(self.per_query)


def evaluate_run(
    run: trec.Run,
    qrels: trec.Qrels,
    budget: int,
    ndcg_cutoffs: Sequence[int] = (10,),
    rel_threshold: int = 2,
) -> MetricReport:
    """nDCG at the requested cutoffs plus nDCG@c and Recall@c for the budget."""
    report = MetricReport()
    cutoffs = sorted(set(ndcg_cutoffs) | {budget})
    metric_names = [f"nDCG@{cut}" for cut in cutoffs] + [f"Recall@{budget}"]
    for name in metric_names:
        report.per_query[name] = {}
    for qid, per_query in sorted(qrels.items()):
        docnos = [d for d, _ in run.get(qid, [])]
        for cut in cutoffs:
            report.per_query[f"nDCG@{cut}"][qid] = ndcg_at(docnos, per_query, cut)
        report.per_query[f"Recall@{budget}"][qid] = recall_at(
            docnos, per_query, budget, rel_threshold
        )
        if not any(g >= rel_threshold for g in per_query.values()):
            report.no_relevant.append(qid)
    return report


@dataclass
class LatencyReport:
    """Mean scheduler-only overhead (ms/query) per strategy."""

    ms_per_query: Dict[str, float] = field(default_factory=dict)
    repeats: int = 5
    per_repeat: Dict[str, List[float]] = field(default_factory=dict)


def latency_bench(
    strategies: Sequence[str],
    queries: Sequence[Query],
    rankings: Mapping[str, Ranking],
    graph: Optional[CorpusGraph],
    make_cfg: Callable[[str], ScheduleConfig],
    scorer: Optional[Scorer] = None,
    repeats: int = 5,
) -> LatencyReport:
    """Wall-clock of the scheduling machinery with scorer time isolated.

    The scorer defaults to an array-lookup stub so measured time is the
    scheduler's own work. Each strategy is timed over `repeats` consecutive
    runs of the whole query set; reported value is mean ms per query.
    """
    if repeats < 1:
        raise InvalidInputError("repeats must be >= 1")
    if not queries:
        raise InvalidInputError("need at least one query")
    if scorer is None:
        if graph is None:
            raise InvalidInputError("need a graph or an explicit scorer")
        scorer = StubScorer(graph.num_docs)
    report = LatencyReport(repeats=repeats)
    configs = {strategy: make_cfg(strategy) for strategy in strategies}
    gc_was_enabled = gc.isenabled()
    gc.disable()  # keep collector pauses out of the timed sections
    try:
        for strategy, cfg in configs.items():
            # Warm-up pass excluded from timing.
            rerank(rankings[queries[0].id], scorer, queries[0], cfg, graph)
            report.per_repeat[strategy] = []
        # Strategies are interleaved within each repeat so that transient
        # machine load affects all of them comparably.
        for _ in range(repeats):
            for strategy, cfg in configs.items():
                gc.collect()
                start = time.perf_counter()
                for query in queries:
                    rerank(rankings[query.id], scorer, query, cfg, graph)
                elapsed = time.perf_counter() - start
                report.per_repeat[strategy].append(elapsed * 1000.0 / len(queries))
        for strategy in strategies:
            report.ms_per_query[strategy] = statistics.fmean(report.per_repeat[strategy])
    finally:
        if gc_was_enabled:
            gc.enable()
    return report
