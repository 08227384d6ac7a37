"""Relevance scorers, first-stage retrieval, and the top-set softmax."""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Protocol, Sequence, Set, Tuple

import numpy as np

from . import trec
from .errors import InvalidInputError
from .graph import DocMap
from .text import tokenize

PROV_INITIAL = "initial-pool"
PROV_FRONTIER = "frontier"


@dataclass(frozen=True)
class Query:
    id: str
    text: str = ""

    def __post_init__(self):
        if not self.id:
            raise InvalidInputError("query id must be non-empty")

    @property
    def tokens(self) -> List[str]:
        return tokenize(self.text)


class RankEntry(NamedTuple):
    doc: int
    score: float
    provenance: str


@dataclass
class Ranking:
    """Ordered (doc, score) list for one query, sorted by (-score, doc id)."""

    query_id: str
    entries: List[RankEntry] = field(default_factory=list)

    @classmethod
    def from_scores(
        cls,
        query_id: str,
        scored: Sequence[Tuple[int, float]],
        provenance: str | Sequence[str] = PROV_INITIAL,
    ) -> "Ranking":
        if isinstance(provenance, str):
            provs: Sequence[str] = [provenance] * len(scored)
        else:
            provs = provenance
        entries = [RankEntry(int(d), float(s), p) for (d, s), p in zip(scored, provs)]
        seen: Set[int] = set()
        for e in entries:
            if e.doc in seen:
                raise InvalidInputError(f"duplicate doc {e.doc} in ranking")
            seen.add(e.doc)
        entries.sort(key=lambda e: (-e.score, e.doc))
        return cls(query_id, entries)

    def docs(self) -> List[int]:
        return [e.doc for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_run_entries(self, docmap: DocMap) -> List[Tuple[str, float]]:
        return [(docmap.docno(e.doc), e.score) for e in self.entries]


class Scorer(Protocol):
    """Batch relevance scorer phi(q, d). Deterministic for a fixed seed."""

    def score(self, query: Query, docs: Sequence[int]) -> List[float]: ...


class Retriever(Scorer, Protocol):
    """A scorer that can also enumerate its own candidate documents."""

    def candidates(self, query: Query) -> Sequence[int]: ...


class Bm25Index:
    """In-memory inverted index with BM25 scoring (Lucene-style idf)."""

    def __init__(self, doc_tokens: Sequence[Sequence[str]], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.num_docs = len(doc_tokens)
        self.doc_lens = [len(toks) for toks in doc_tokens]
        self.avgdl = sum(self.doc_lens) / self.num_docs if self.num_docs else 0.0
        self.postings: Dict[str, Dict[int, int]] = {}
        for d, toks in enumerate(doc_tokens):
            for term, tf in Counter(toks).items():
                self.postings.setdefault(term, {})[d] = tf
        self.idf = {
            term: math.log(1.0 + (self.num_docs - len(plist) + 0.5) / (len(plist) + 0.5))
            for term, plist in self.postings.items()
        }

    def matching_docs(self, query_tokens: Sequence[str]) -> List[int]:
        docs: Set[int] = set()
        for term in query_tokens:
            docs.update(self.postings.get(term, ()))
        return sorted(docs)

    def score_doc(self, query_tokens: Sequence[str], d: int) -> float:
        if not 0 <= d < self.num_docs:
            raise InvalidInputError(f"doc id {d} out of range")
        dl = self.doc_lens[d]
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl) if self.avgdl else self.k1
        total = 0.0
        for term in query_tokens:
            plist = self.postings.get(term)
            if not plist or d not in plist:
                continue
            tf = plist[d]
            total += self.idf[term] * tf * (self.k1 + 1.0) / (tf + norm)
        return total


class Bm25Scorer:
    """Lexical retriever/scorer over a token corpus."""

    def __init__(self, doc_tokens: Sequence[Sequence[str]], k1: float = 1.2, b: float = 0.75):
        self.index = Bm25Index(doc_tokens, k1=k1, b=b)

    def score(self, query: Query, docs: Sequence[int]) -> List[float]:
        toks = query.tokens
        return [self.index.score_doc(toks, d) for d in docs]

    def candidates(self, query: Query) -> Sequence[int]:
        return self.index.matching_docs(query.tokens)


class ReplayScorer:
    """Replays scores from a precomputed TREC run file."""

    def __init__(self, run: trec.Run, docmap: DocMap):
        self.docmap = docmap
        self._scores: Dict[str, Dict[int, float]] = {}
        for qid, entries in run.items():
            per_query: Dict[int, float] = {}
            for docno, score in entries:
                per_query[docmap.internal(docno)] = score
            self._scores[qid] = per_query

    def score(self, query: Query, docs: Sequence[int]) -> List[float]:
        per_query = self._scores.get(query.id)
        if per_query is None:
            raise InvalidInputError(f"query {query.id!r} not present in replay run")
        out = []
        for d in docs:
            if d not in per_query:
                raise InvalidInputError(
                    f"doc {self.docmap.docno(d)!r} has no replay score for query {query.id!r}"
                )
            out.append(per_query[d])
        return out

    def candidates(self, query: Query) -> Sequence[int]:
        per_query = self._scores.get(query.id)
        if per_query is None:
            return []
        return sorted(per_query)


class QrelsOracleScorer:
    """Score = graded relevance plus optional zero-mean Gaussian noise.

    Noise is derived per (seed, query, doc), so scores do not depend on the
    order or batching of calls.
    """

    def __init__(self, qrels: trec.Qrels, docmap: DocMap, noise: float = 0.0, seed: int = 0):
        self.docmap = docmap
        self.noise = noise
        self.seed = seed
        self._grades: Dict[str, Dict[int, int]] = {}
        for qid, per_query in qrels.items():
            self._grades[qid] = {
                docmap.internal(docno): grade
                for docno, grade in per_query.items()
                if docno in docmap
            }

    def score(self, query: Query, docs: Sequence[int]) -> List[float]:
        grades = self._grades.get(query.id, {})
        out = []
        for d in docs:
            if not 0 <= d < len(self.docmap):
                raise InvalidInputError(f"doc id {d} out of range")
            value = float(grades.get(d, 0))
            if self.noise > 0.0:
                rng = random.Random(f"{self.seed}:{query.id}:{d}")
                value += rng.gauss(0.0, self.noise)
            out.append(value)
        return out

    def candidates(self, query: Query) -> Sequence[int]:
        return sorted(self._grades.get(query.id, {}))


class StubScorer:
    """Near-zero-cost scorer for latency isolation: array lookup per doc."""

    def __init__(self, num_docs: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self._scores = rng.random(num_docs)

    def score(self, query: Query, docs: Sequence[int]) -> List[float]:
        return self._scores[list(docs)].tolist()


def first_stage_retrieve(retriever: Retriever, query: Query, depth: int) -> Ranking:
    """Top-`depth` candidates by retriever score, provenance initial-pool."""
    if depth < 1:
        raise InvalidInputError("depth must be >= 1")
    cands = list(retriever.candidates(query))
    scores = retriever.score(query, cands) if cands else []
    scored = sorted(zip(cands, scores), key=lambda e: (-e[1], e[0]))[:depth]
    return Ranking.from_scores(query.id, scored, PROV_INITIAL)


def score_batch(
    scorer: Scorer, query: Query, docs: Sequence[int], remaining_budget: int
) -> List[Tuple[int, float]]:
    """Score the first min(|docs|, remaining_budget) docs."""
    if remaining_budget < 0:
        raise InvalidInputError("remaining_budget must be >= 0")
    if len(set(docs)) != len(docs):
        raise InvalidInputError("docs must be deduplicated")
    take = list(docs)[: min(len(docs), remaining_budget)]
    if not take:
        return []
    return list(zip(take, scorer.score(query, take)))


def relevance_distribution(scores: Sequence[float]) -> np.ndarray:
    """Softmax with max-subtraction; sums to 1 within 1e-12."""
    if len(scores) == 0:
        raise InvalidInputError("relevance distribution needs at least one score")
    arr = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("scores must be finite")
    shifted = np.exp(arr - arr.max())
    return shifted / shifted.sum()
