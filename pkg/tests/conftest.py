"""Shared fixtures and small helpers for the test suite."""

import numpy as np
import pytest

from adaptive_rerank.graph import CorpusGraph, DocMap
from adaptive_rerank.relevance import PROV_INITIAL, Query, Ranking


class DictScorer:
    """Deterministic scorer backed by a plain {doc: score} mapping."""

    def __init__(self, scores):
        self.scores = dict(scores)
        self.calls = []  # batches seen, for exactly-once assertions

    def score(self, query, docs):
        self.calls.append(list(docs))
        return [self.scores[d] for d in docs]


def random_graph(rng, num_docs, k, max_weight=1.0):
    """Random directed graph with out-degree <= k and weights in [0, max_weight]."""
    adjacency = []
    for d in range(num_docs):
        degree = int(rng.integers(0, k + 1))
        others = [x for x in range(num_docs) if x != d]
        nbrs = rng.choice(others, size=min(degree, len(others)), replace=False)
        weights = rng.uniform(0.0, max_weight, size=len(nbrs))
        adjacency.append(list(zip(nbrs.tolist(), weights.tolist())))
    return CorpusGraph.from_adjacency(num_docs, max(k, 1), adjacency)


@pytest.fixture
def six_doc():
    """The hand-traceable 6-doc instance: d1..d6 are internal ids 0..5.

    R_0 = [d1, d2, d3, d4] with descending retrieval scores; relevance
    scores {d1:0.9, d2:0.1, d3:0.8, d4:0.2, d5:0.95, d6:0.05}; edges
    d1->{d5:0.9, d6:0.1}, d2->{d6:0.8}.
    """
    r0 = Ranking.from_scores(
        "q1", [(0, 4.0), (1, 3.0), (2, 2.0), (3, 1.0)], PROV_INITIAL
    )
    scorer = DictScorer({0: 0.9, 1: 0.1, 2: 0.8, 3: 0.2, 4: 0.95, 5: 0.05})
    g = CorpusGraph.from_adjacency(
        6, 2, [[(4, 0.9), (5, 0.1)], [(5, 0.8)], [], [], [], []]
    )
    query = Query("q1", "")
    docmap = DocMap([f"d{i+1}" for i in range(6)])
    return r0, scorer, g, query, docmap
