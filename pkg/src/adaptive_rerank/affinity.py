"""Document-pair affinity functions, triple mining, and co-relevance stats."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Set, Tuple

from . import trec
from .errors import DataError, InsufficientPoolError, InvalidInputError
from .graph import CorpusGraph, DocMap
from .relevance import Ranking
from .text import cosine, tfidf_vectors


@dataclass(frozen=True)
class TrainingTriple:
    doc_a: int
    doc_b: int
    label: int

    def __post_init__(self):
        if self.doc_a == self.doc_b:
            raise InvalidInputError("triple endpoints must differ")
        if self.label not in (0, 1):
            raise InvalidInputError(f"label must be 0 or 1, got {self.label}")


class TfidfCosineAffinity:
    """Lexical affinity surrogate: TF-IDF cosine of the two documents."""

    def __init__(self, doc_tokens: Sequence[Sequence[str]]):
        self.vectors = tfidf_vectors(doc_tokens)

    def __call__(self, a: int, b: int) -> float:
        return cosine(self.vectors[a], self.vectors[b])


class CoRelevanceAffinity:
    """Oracle affinity: 1.0 when the pair shares a relevant query, else 0.0.

    Optional noise flips no labels but adds a small symmetric perturbation,
    clipped back into [0, 1]. Symmetric by construction.
    """

    def __init__(
        self,
        qrels: trec.Qrels,
        docmap: DocMap,
        rel_threshold: int = 1,
        noise: float = 0.0,
        seed: int = 0,
    ):
        self.noise = noise
        self.seed = seed
        self._queries_per_doc: Dict[int, Set[str]] = {}
        for qid, per_query in qrels.items():
            for docno, grade in per_query.items():
                if grade >= rel_threshold and docno in docmap:
                    self._queries_per_doc.setdefault(docmap.internal(docno), set()).add(qid)

    def co_relevant(self, a: int, b: int) -> bool:
        qa = self._queries_per_doc.get(a)
        if not qa:
            return False
        qb = self._queries_per_doc.get(b)
        return bool(qb) and not qa.isdisjoint(qb)

    def __call__(self, a: int, b: int) -> float:
        value = 1.0 if self.co_relevant(a, b) else 0.0
        if self.noise > 0.0:
            lo, hi = min(a, b), max(a, b)
            rng = random.Random(f"{self.seed}:{lo}:{hi}")
            value += rng.gauss(0.0, self.noise)
            value = min(1.0, max(0.0, value))
        return value


class CachedEdgeAffinity:
    """Reads weights from an existing graph; absent pairs score 0.0."""

    def __init__(self, graph: CorpusGraph):
        self.graph = graph

    def __call__(self, a: int, b: int) -> float:
        return self.graph.edge_weight(a, b)


def mine_triples(r0: Ranking, r1: Ranking, k: int) -> List[TrainingTriple]:
    """Pseudo co-relevance triples from a retrieval/re-ranking pair.

    Positives pair the top-k of r0 with the top-k of r1 (label 1); negatives
    pair the bottom-k of r0 with the top-k of r1 (label 0). Self-pairs are
    dropped.
    """
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if len(r0) < 2 * k:
        raise InsufficientPoolError(
            f"initial ranking has {len(r0)} docs, need at least {2 * k}"
        )
    if len(r1) < k:
        raise InsufficientPoolError(f"re-ranked pool has {len(r1)} docs, need {k}")
    r0_docs = r0.docs()
    positives = r0_docs[:k]
    negatives = r0_docs[-k:]
    top_set = r1.docs()[:k]
    triples: List[TrainingTriple] = []
    for p in positives:
        for d in top_set:
            if p != d:
                triples.append(TrainingTriple(p, d, 1))
    for n in negatives:
        for d in top_set:
            if n != d:
                triples.append(TrainingTriple(n, d, 0))
    return triples


def write_triples(triples: Iterable[TrainingTriple], docmap: DocMap, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(f"{docmap.docno(t.doc_a)}\t{docmap.docno(t.doc_b)}\t{t.label}\n")


def co_relevance_histogram(qrels: trec.Qrels, rel_threshold: int = 1) -> Dict[int, int]:
    """Histogram over queries of how many documents meet the relevance bar."""
    hist: Dict[int, int] = {}
    for per_query in qrels.values():
        n_rel = sum(1 for grade in per_query.values() if grade >= rel_threshold)
        hist[n_rel] = hist.get(n_rel, 0) + 1
    return hist


def write_histogram(hist: Dict[int, int], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("num_relevant\tnum_queries\n")
        for n_rel in sorted(hist):
            fh.write(f"{n_rel}\t{hist[n_rel]}\n")


def affinity_eval(
    aff, pairs: Sequence[Tuple[int, int, int]]
) -> Tuple[float, float]:
    """Accuracy at a 0.5 threshold and rank-based AUC over labeled pairs."""
    if not pairs:
        raise InvalidInputError("need at least one labeled pair")
    scores = [float(aff(a, b)) for a, b, _ in pairs]
    labels = [label for _, _, label in pairs]
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        raise DataError("AUC undefined: need at least one pair of each label")
    correct = sum(
        1 for s, y in zip(scores, labels) if (1 if s >= 0.5 else 0) == y
    )
    accuracy = correct / len(pairs)
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    auc = wins / (len(pos) * len(neg))
    return accuracy, auc
