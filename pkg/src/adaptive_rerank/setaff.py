"""Expected set-affinity scoring of frontier candidates against the top set.

The priority of a candidate d is sum over top-set members d' of
P(Rel(d')) * f(d, d'), where P(Rel(.)) is the softmax of the members'
estimator scores and f is read from the affinity graph. All arithmetic is
64-bit; absent edges contribute 0.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InvalidInputError
from .graph import CorpusGraph
from .relevance import Ranking, relevance_distribution

ESTIMATOR_RANKER = "ranker-scores"
ESTIMATOR_RETRIEVER = "retriever-scores"
ESTIMATORS = (ESTIMATOR_RANKER, ESTIMATOR_RETRIEVER)

EDGE_OUT = "out-edge"
EDGE_MAX_BOTH = "max-of-both"
EDGE_MODES = (EDGE_OUT, EDGE_MAX_BOTH)


@dataclass(frozen=True)
class TopSet:
    """Top-s re-ranked documents with their relevance distribution."""

    docs: Tuple[int, ...]
    scores: Tuple[float, ...]  # estimator scores, same order as docs
    probs: np.ndarray  # float64, sums to 1
    s: int
    estimator: str = ESTIMATOR_RANKER

    def __post_init__(self):
        if len(self.docs) > self.s:
            raise InvalidInputError("top set exceeds capacity s")
        if len(self.docs) != len(self.scores) or len(self.docs) != len(self.probs):
            raise InvalidInputError("top set fields must align")

    def __len__(self) -> int:
        return len(self.docs)


def update_top_set(
    r1: Ranking,
    s: int,
    estimator: str = ESTIMATOR_RANKER,
    retriever_scores: Optional[Mapping[int, float]] = None,
) -> TopSet:
    """Top min(s, |r1|) of the re-ranked pool with recomputed probabilities.

    With the retriever-scores estimator, documents discovered via the graph
    have no retrieval score and contribute 0.0.
    """
    if len(r1) == 0:
        raise InvalidInputError("re-ranked pool is empty")
    if s < 1:
        raise InvalidInputError("s must be >= 1")
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}")
    members = r1.entries[: min(s, len(r1))]
    docs = tuple(e.doc for e in members)
    if estimator == ESTIMATOR_RANKER:
        scores = tuple(e.score for e in members)
    else:
        lookup = retriever_scores or {}
        scores = tuple(float(lookup.get(e.doc, 0.0)) for e in members)
    probs = relevance_distribution(scores)
    return TopSet(docs, scores, probs, s, estimator)


class Frontier:
    """Candidate documents with priorities; callers keep it disjoint from R1."""

    def __init__(self, entries: Optional[Dict[int, float]] = None):
        self.entries: Dict[int, float] = dict(entries or {})

    def add(self, d: int, priority: float = 0.0) -> None:
        self.entries[d] = priority

    def discard(self, d: int) -> None:
        self.entries.pop(d, None)

    def __contains__(self, d: int) -> bool:
        return d in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _pair_affinity(g: CorpusGraph, member: int, d: int, edge_mode: str) -> float:
    if edge_mode == EDGE_OUT:
        return g.edge_weight(member, d)
    return max(g.edge_weight(member, d), g.edge_weight(d, member))


def set_affinity(d: int, top: TopSet, g: CorpusGraph, edge_mode: str = EDGE_OUT) -> float:
    """Probability-weighted affinity of candidate d to the top set."""
    if len(top) == 0:
        raise InvalidInputError("top set is empty")
    if edge_mode not in EDGE_MODES:
        raise ConfigError(f"unknown edge mode {edge_mode!r}")
    total = 0.0
    for prob, member in zip(top.probs, top.docs):
        total += float(prob) * _pair_affinity(g, member, d, edge_mode)
    return total


def member_contributions(top: TopSet, g: CorpusGraph) -> Dict[int, float]:
    """Accumulated out-edge contributions of all top-set members.

    Equivalent to set_affinity under out-edge mode for every document that is
    an out-neighbor of some member (additions happen in member order, so the
    result is bit-identical to the per-candidate sum); all other documents
    implicitly score 0.
    """
    acc: Dict[int, float] = {}
    for prob, member in zip(top.probs, top.docs):
        p = float(prob)
        for nbr, w in g.neighbors(member):
            acc[nbr] = acc.get(nbr, 0.0) + p * w
    return acc


def refresh_frontier(
    frontier: Frontier, top: TopSet, g: CorpusGraph, edge_mode: str = EDGE_OUT
) -> Frontier:
    """Reassign every frontier priority from the current top set (in place)."""
    if edge_mode not in EDGE_MODES:
        raise ConfigError(f"unknown edge mode {edge_mode!r}")
    if not frontier.entries:
        return frontier
    if edge_mode == EDGE_OUT:
        acc = member_contributions(top, g)
        for d in frontier.entries:
            frontier.entries[d] = acc.get(d, 0.0)
    else:
        for d in frontier.entries:
            frontier.entries[d] = set_affinity(d, top, g, edge_mode)
    return frontier


def pop_top(frontier: Frontier, b: int) -> List[int]:
    """Remove and return up to b docs by (-priority, ascending id)."""
    if b < 1:
        raise InvalidInputError("b must be >= 1")
    best = heapq.nsmallest(
        min(b, len(frontier)), frontier.entries.items(), key=lambda kv: (-kv[1], kv[0])
    )
    docs = [d for d, _ in best]
    for d in docs:
        del frontier.entries[d]
    return docs
