"""Budget-constrained re-ranking strategies.

Implements plain re-ranking, graph adaptive re-ranking (GAR) where frontier
candidates inherit their source document's score, the GAR ablation variants
(gar-laff on a reweighted graph, gar-setaff with set-affinity priorities),
and QUAM: alternation between the initial pool and a frontier prioritized by
expected set affinity to the evolving top-s set.

All strategies share the same contract: never score a document twice, spend
at most `budget` scorer calls, and when the preferred pool is exhausted draw
from the other one, stopping only when both are empty.
"""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import setaff
from .errors import ConfigError, InvalidInputError
from .graph import CorpusGraph
from .relevance import (
    PROV_FRONTIER,
    PROV_INITIAL,
    Query,
    RankEntry,
    Ranking,
    Scorer,
    relevance_distribution,
)

STRATEGY_PLAIN = "plain"
STRATEGY_GAR = "gar"
STRATEGY_GAR_LAFF = "gar-laff"
STRATEGY_GAR_SETAFF = "gar-setaff"
STRATEGY_QUAM = "quam"
STRATEGIES = (
    STRATEGY_PLAIN,
    STRATEGY_GAR,
    STRATEGY_GAR_LAFF,
    STRATEGY_GAR_SETAFF,
    STRATEGY_QUAM,
)

POOL_R0 = "r0"
POOL_FRONTIER = "frontier"

# Default top-set size by budget.
_DEFAULT_S = {50: 10, 100: 30, 1000: 300}


def default_top_set_size(budget: int) -> int:
    if budget in _DEFAULT_S:
        return _DEFAULT_S[budget]
    return max(1, budget // 5)


@dataclass
class ScheduleConfig:
    budget: int
    batch: int = 16
    top_set_size: Optional[int] = None
    strategy: str = STRATEGY_QUAM
    estimator: str = setaff.ESTIMATOR_RANKER
    edge_mode: str = setaff.EDGE_OUT
    seed: int = 0
    capture_frontier: bool = False

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if self.top_set_size is None:
            self.top_set_size = min(self.budget, default_top_set_size(self.budget))
        if not 1 <= self.top_set_size <= self.budget:
            raise ConfigError("top_set_size must satisfy 1 <= s <= budget")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.estimator not in setaff.ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.edge_mode not in setaff.EDGE_MODES:
            raise ConfigError(f"unknown edge mode {self.edge_mode!r}")


@dataclass
class TraceStep:
    pool: str
    batch: Tuple[int, ...]
    scores: Tuple[float, ...]
    frontier_size: int
    frontier: Optional[Dict[int, float]] = None

    def to_record(self) -> dict:
        rec = {
            "pool": self.pool,
            "batch": list(self.batch),
            "scores": list(self.scores),
            "frontier_size": self.frontier_size,
        }
        if self.frontier is not None:
            rec["frontier"] = {str(d): p for d, p in sorted(self.frontier.items())}
        return rec


@dataclass
class Trace:
    steps: List[TraceStep] = field(default_factory=list)

    def scored_docs(self) -> List[int]:
        return [d for step in self.steps for d in step.batch]


def _finish(
    query_id: str,
    scored: Dict[int, float],
    provenance: Dict[int, str],
    trace: Trace,
) -> Tuple[Ranking, Trace]:
    pairs = [(d, s) for d, s in scored.items()]
    provs = [provenance[d] for d, _ in pairs]
    return Ranking.from_scores(query_id, pairs, provs), trace


class _R0Pool:
    """Draws unscored docs from the initial ranking in rank order."""

    def __init__(self, r0: Ranking):
        self.docs = r0.docs()
        self.pos = 0

    def skip_scored(self, scored: Dict[int, float]) -> None:
        while self.pos < len(self.docs) and self.docs[self.pos] in scored:
            self.pos += 1

    def exhausted(self, scored: Dict[int, float]) -> bool:
        self.skip_scored(scored)
        return self.pos >= len(self.docs)

    def draw(self, n: int, scored: Dict[int, float]) -> List[int]:
        batch: List[int] = []
        while self.pos < len(self.docs) and len(batch) < n:
            d = self.docs[self.pos]
            self.pos += 1
            if d not in scored:
                batch.append(d)
        return batch


def rerank_plain(
    r0: Ranking, scorer: Scorer, query: Query, cfg: ScheduleConfig
) -> Tuple[Ranking, Trace]:
    """Score the top min(budget, |r0|) of the pool in batches of `batch`."""
    trace = Trace()
    scored: Dict[int, float] = {}
    provenance: Dict[int, str] = {}
    pool = _R0Pool(r0)
    remaining = cfg.budget
    while remaining > 0:
        batch = pool.draw(min(cfg.batch, remaining), scored)
        if not batch:
            break
        scores = scorer.score(query, batch)
        for d, s in zip(batch, scores):
            scored[d] = s
            provenance[d] = PROV_INITIAL
        remaining -= len(batch)
        trace.steps.append(
            TraceStep(POOL_R0, tuple(batch), tuple(scores), 0, {} if cfg.capture_frontier else None)
        )
    return _finish(r0.query_id, scored, provenance, trace)


def rerank_gar(
    r0: Ranking, scorer: Scorer, query: Query, g: CorpusGraph, cfg: ScheduleConfig
) -> Tuple[Ranking, Trace]:
    """GAR: frontier docs inherit the max score of the sources that found them.

    Ties between equal inherited scores break by the neighbor's rank in its
    source's adjacency list, then by doc id.
    """
    trace = Trace()
    scored: Dict[int, float] = {}
    provenance: Dict[int, str] = {}
    pool = _R0Pool(r0)
    frontier: Dict[int, Tuple[float, int]] = {}  # doc -> (inherited score, source rank)
    remaining = cfg.budget
    prefer = POOL_R0
    while remaining > 0:
        use = _select_pool(prefer, not pool.exhausted(scored), bool(frontier))
        if use is None:
            break
        n = min(cfg.batch, remaining)
        if use == POOL_R0:
            batch = pool.draw(n, scored)
        else:
            best = heapq.nsmallest(
                min(n, len(frontier)),
                frontier.items(),
                key=lambda kv: (-kv[1][0], kv[1][1], kv[0]),
            )
            batch = [d for d, _ in best]
        scores = scorer.score(query, batch)
        for d, s in zip(batch, scores):
            scored[d] = s
            provenance[d] = PROV_INITIAL if use == POOL_R0 else PROV_FRONTIER
            frontier.pop(d, None)
        remaining -= len(batch)
        for d, s in zip(batch, scores):
            for rank, (nbr, _) in enumerate(g.neighbors(d)):
                if nbr in scored:
                    continue
                cur = frontier.get(nbr)
                if cur is None or s > cur[0] or (s == cur[0] and rank < cur[1]):
                    frontier[nbr] = (s, rank)
        snapshot = {d: sc for d, (sc, _) in frontier.items()} if cfg.capture_frontier else None
        trace.steps.append(TraceStep(use, tuple(batch), tuple(scores), len(frontier), snapshot))
        prefer = POOL_FRONTIER if use == POOL_R0 else POOL_R0
    return _finish(r0.query_id, scored, provenance, trace)


def rerank_gar_setaff(
    r0: Ranking, scorer: Scorer, query: Query, g: CorpusGraph, cfg: ScheduleConfig
) -> Tuple[Ranking, Trace]:
    """GAR's expansion rule with frontier priorities from set affinity."""
    trace = Trace()
    scored: Dict[int, float] = {}
    provenance: Dict[int, str] = {}
    pool = _R0Pool(r0)
    frontier = setaff.Frontier()
    retriever_scores = {e.doc: e.score for e in r0.entries}
    remaining = cfg.budget
    prefer = POOL_R0
    while remaining > 0:
        use = _select_pool(prefer, not pool.exhausted(scored), len(frontier) > 0)
        if use is None:
            break
        n = min(cfg.batch, remaining)
        if use == POOL_R0:
            batch = pool.draw(n, scored)
        else:
            batch = setaff.pop_top(frontier, n)
        scores = scorer.score(query, batch)
        for d, s in zip(batch, scores):
            scored[d] = s
            provenance[d] = PROV_INITIAL if use == POOL_R0 else PROV_FRONTIER
            frontier.discard(d)
        remaining -= len(batch)
        # GAR-style expansion: every scored batch doc contributes neighbors.
        for d in batch:
            for nbr, _ in g.neighbors(d):
                if nbr not in scored and nbr not in frontier:
                    frontier.add(nbr)
        r1 = Ranking.from_scores(
            r0.query_id, list(scored.items()), [provenance[d] for d in scored]
        )
        top = setaff.update_top_set(
            r1, cfg.top_set_size, cfg.estimator, retriever_scores
        )
        setaff.refresh_frontier(frontier, top, g, cfg.edge_mode)
        snapshot = dict(frontier.entries) if cfg.capture_frontier else None
        trace.steps.append(TraceStep(use, tuple(batch), tuple(scores), len(frontier), snapshot))
        prefer = POOL_FRONTIER if use == POOL_R0 else POOL_R0
    return _finish(r0.query_id, scored, provenance, trace)


def _select_pool(prefer: str, r0_avail: bool, frontier_avail: bool) -> Optional[str]:
    """Preferred pool, falling back to the other; None when both are empty."""
    if prefer == POOL_R0:
        if r0_avail:
            return POOL_R0
        if frontier_avail:
            return POOL_FRONTIER
    else:
        if frontier_avail:
            return POOL_FRONTIER
        if r0_avail:
            return POOL_R0
    return None


def rerank_quam(
    r0: Ranking, scorer: Scorer, query: Query, g_a: CorpusGraph, cfg: ScheduleConfig
) -> Tuple[Ranking, Trace]:
    """Adaptive re-ranking with set-affinity frontier priorities.

    Each iteration scores a batch from the alternating pool, moves it into the
    re-ranked pool, recomputes the top-s set, expands the frontier with the
    neighbors of batch docs that entered the top set, and reassigns every
    frontier priority from the new set. Frontier bookkeeping is vectorized
    over the graph's CSR arrays; results match the per-candidate computation.
    """
    trace = Trace()
    num_docs = g_a.num_docs
    pad_ids, pad_weights = g_a.padded_adjacency()
    scored: Dict[int, float] = {}
    provenance: Dict[int, str] = {}
    pool = _R0Pool(r0)
    retriever_scores = {e.doc: e.score for e in r0.entries}
    in_r1 = np.zeros(num_docs + 1, dtype=bool)  # extra slot absorbs the pad id
    in_frontier = np.zeros(num_docs, dtype=bool)
    frontier_size = 0
    prio = np.zeros(num_docs, dtype=np.float64)
    r1_sorted: List[Tuple[float, int]] = []  # (-score, doc), ascending
    remaining = cfg.budget
    prefer = POOL_R0
    s = cfg.top_set_size
    while remaining > 0:
        use = _select_pool(prefer, not pool.exhausted(scored), frontier_size > 0)
        if use is None:
            break
        n = min(cfg.batch, remaining)
        if use == POOL_R0:
            batch = pool.draw(n, scored)
        else:
            f_ids = np.flatnonzero(in_frontier)
            order = np.lexsort((f_ids, -prio[f_ids]))
            batch = f_ids[order[: min(n, len(f_ids))]].tolist()
        scores = scorer.score(query, batch)
        for d, sc in zip(batch, scores):
            scored[d] = sc
            provenance[d] = PROV_INITIAL if use == POOL_R0 else PROV_FRONTIER
            bisect.insort(r1_sorted, (-sc, d))
        batch_arr = np.array(batch, dtype=np.int64)
        in_r1[batch_arr] = True
        frontier_size -= int(np.count_nonzero(in_frontier[batch_arr]))
        in_frontier[batch_arr] = False
        remaining -= len(batch)
        # S <- top s of R1 by (-ranker score, id).
        members = r1_sorted[: min(s, len(r1_sorted))]
        member_docs = [d for _, d in members]
        if cfg.estimator == setaff.ESTIMATOR_RANKER:
            est_scores = [-neg for neg, _ in members]
        else:
            est_scores = [retriever_scores.get(d, 0.0) for d in member_docs]
        probs = relevance_distribution(est_scores)
        # F <- F u (neighbors of batch docs that entered S, minus R1).
        member_set = set(member_docs)
        entrants = np.array([d for d in batch if d in member_set], dtype=np.int64)
        if len(entrants):
            cand = pad_ids[entrants].ravel()
            fresh = cand[~in_r1[cand]]
            fresh = fresh[fresh < num_docs]
            newly = fresh[~in_frontier[fresh]]
            frontier_size += len(np.unique(newly))
            in_frontier[fresh] = True
        # Reassign every frontier priority from the current set.
        if cfg.edge_mode == setaff.EDGE_OUT:
            member_arr = np.array(member_docs, dtype=np.int64)
            flat_ids = pad_ids[member_arr].ravel()
            contrib = pad_weights[member_arr].ravel().astype(np.float64) * np.repeat(
                probs, g_a.k
            )
            # bincount accumulates in input order, matching the per-candidate
            # member-order summation; pad slots land in the sentinel bin.
            prio = np.bincount(flat_ids, weights=contrib, minlength=num_docs + 1)[
                :num_docs
            ]
        else:
            prio = np.zeros(num_docs, dtype=np.float64)
            top = setaff.TopSet(
                tuple(member_docs), tuple(est_scores), probs, s, cfg.estimator
            )
            for d in np.flatnonzero(in_frontier).tolist():
                prio[d] = setaff.set_affinity(d, top, g_a, cfg.edge_mode)
        snapshot = None
        if cfg.capture_frontier:
            snapshot = {int(d): float(prio[d]) for d in np.flatnonzero(in_frontier)}
        trace.steps.append(
            TraceStep(use, tuple(batch), tuple(scores), frontier_size, snapshot)
        )
        prefer = POOL_FRONTIER if use == POOL_R0 else POOL_R0
    return _finish(r0.query_id, scored, provenance, trace)


def rerank(
    r0: Ranking,
    scorer: Scorer,
    query: Query,
    cfg: ScheduleConfig,
    graph: Optional[CorpusGraph] = None,
) -> Tuple[Ranking, Trace]:
    """Dispatch on cfg.strategy. Adaptive strategies require a graph."""
    if cfg.strategy == STRATEGY_PLAIN:
        return rerank_plain(r0, scorer, query, cfg)
    if graph is None:
        raise ConfigError(f"strategy {cfg.strategy!r} requires a graph")
    if cfg.strategy in (STRATEGY_GAR, STRATEGY_GAR_LAFF):
        return rerank_gar(r0, scorer, query, graph, cfg)
    if cfg.strategy == STRATEGY_GAR_SETAFF:
        return rerank_gar_setaff(r0, scorer, query, graph, cfg)
    if cfg.strategy == STRATEGY_QUAM:
        return rerank_quam(r0, scorer, query, graph, cfg)
    raise ConfigError(f"unknown strategy {cfg.strategy!r}")
