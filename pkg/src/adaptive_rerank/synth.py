"""Synthetic clustered corpora with planted relevance.

Documents are grouped into clusters; each query draws its relevant set from
one cluster, so relevant documents are graph-neighbors of each other with a
controllable probability (edge precision). Everything is determined by the
seed; writing a dataset twice yields byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from . import trec
from .errors import InvalidInputError
from .graph import CorpusGraph, DocMap, save_graph
from .relevance import PROV_INITIAL, Query, Ranking

WEIGHTS_AFFINITY = "affinity"
WEIGHTS_ORACLE = "oracle"
WEIGHTS_UNIFORM = "uniform"


@dataclass(frozen=True)
class SynthSpec:
    num_docs: int = 2000
    num_queries: int = 50
    cluster_size: Tuple[int, int] = (8, 12)
    relevant_per_query: Tuple[int, int] = (4, 8)
    first_stage_recall: float = 0.5
    edge_precision: float = 0.8
    graph_k: int = 16
    pool_size: int = 50
    weights: str = WEIGHTS_AFFINITY
    # When set, caps co-relevant out-edges per doc regardless of graph_k, so
    # edge precision decays with k (deeper neighbor lists are mostly noise).
    max_co_edges: Optional[int] = None
    tokens_per_doc: int = 0
    seed: int = 0

    def validate(self) -> None:
        if self.num_docs < 1 or self.num_queries < 1:
            raise InvalidInputError("num_docs and num_queries must be >= 1")
        if not 0.0 <= self.first_stage_recall <= 1.0:
            raise InvalidInputError("first_stage_recall must be in [0, 1]")
        if not 0.0 <= self.edge_precision <= 1.0:
            raise InvalidInputError("edge_precision must be in [0, 1]")
        if self.graph_k < 1:
            raise InvalidInputError("graph_k must be >= 1")
        if not 1 <= self.pool_size <= self.num_docs:
            raise InvalidInputError("pool_size must be in [1, num_docs]")
        lo, hi = self.cluster_size
        if not 1 <= lo <= hi:
            raise InvalidInputError("bad cluster_size range")
        lo, hi = self.relevant_per_query
        if not 1 <= lo <= hi:
            raise InvalidInputError("bad relevant_per_query range")
        if self.weights not in (WEIGHTS_AFFINITY, WEIGHTS_ORACLE, WEIGHTS_UNIFORM):
            raise InvalidInputError(f"unknown weights kind {self.weights!r}")
        if self.max_co_edges is not None and self.max_co_edges < 0:
            raise InvalidInputError("max_co_edges must be >= 0")
        if self.first_stage_recall == 1.0 and self.pool_size < self.relevant_per_query[1]:
            raise InvalidInputError(
                "recall target 1.0 is infeasible: pool smaller than the relevant set"
            )


@dataclass
class SynthDataset:
    spec: SynthSpec
    docmap: DocMap
    doc_tokens: Optional[List[List[str]]]
    queries: List[Query]
    qrels: trec.Qrels
    rankings: Dict[str, Ranking]  # qid -> R_0 over internal ids
    graph: CorpusGraph
    cluster_of: np.ndarray
    partners: List[Set[int]]  # co-relevant partners per doc


def _co_relevance_partners(
    rel_docs_per_query: Sequence[Sequence[int]], num_docs: int
) -> List[Set[int]]:
    partners: List[Set[int]] = [set() for _ in range(num_docs)]
    for rel in rel_docs_per_query:
        for d in rel:
            partners[d].update(rel)
    for d in range(num_docs):
        partners[d].discard(d)
    return partners


def generate(spec: SynthSpec, seed: Optional[int] = None) -> SynthDataset:
    """Fully seeded generation of corpus, queries, qrels, R_0, and graph."""
    spec.validate()
    rng = np.random.default_rng(spec.seed if seed is None else seed)

    # Clusters: contiguous id ranges with sizes drawn from the spec range.
    cluster_of = np.zeros(spec.num_docs, dtype=np.int64)
    clusters: List[np.ndarray] = []
    start = 0
    while start < spec.num_docs:
        size = int(rng.integers(spec.cluster_size[0], spec.cluster_size[1] + 1))
        end = min(start + size, spec.num_docs)
        clusters.append(np.arange(start, end, dtype=np.int64))
        cluster_of[start:end] = len(clusters) - 1
        start = end

    docnos = [f"D{d:06d}" for d in range(spec.num_docs)]
    docmap = DocMap(docnos)

    # Queries, planted relevance, and first-stage pools.
    qrels: trec.Qrels = {}
    rankings: Dict[str, Ranking] = {}
    queries: List[Query] = []
    rel_docs_per_query: List[np.ndarray] = []
    query_cluster: List[int] = []
    all_docs = np.arange(spec.num_docs, dtype=np.int64)
    for qi in range(spec.num_queries):
        qid = f"q{qi:04d}"
        ci = int(rng.integers(len(clusters)))
        cluster = clusters[ci]
        lo, hi = spec.relevant_per_query
        n_rel = min(int(rng.integers(lo, hi + 1)), len(cluster))
        rel = np.sort(rng.choice(cluster, size=n_rel, replace=False))
        rel_docs_per_query.append(rel)
        query_cluster.append(ci)
        qrels[qid] = {docnos[int(d)]: 1 for d in rel}
        if spec.first_stage_recall >= 1.0:
            included = rel
            if len(included) > spec.pool_size:
                raise InvalidInputError(
                    f"query {qid}: relevant set larger than pool at recall target 1.0"
                )
        else:
            included = rel[rng.random(n_rel) < spec.first_stage_recall]
            included = included[: spec.pool_size]
        n_fill = spec.pool_size - len(included)
        non_rel = np.setdiff1d(all_docs, rel, assume_unique=True)
        fill = rng.choice(non_rel, size=min(n_fill, len(non_rel)), replace=False)
        pool = np.concatenate([included, fill])
        scores = rng.random(len(pool))
        rankings[qid] = Ranking.from_scores(
            qid, list(zip(pool.tolist(), scores.tolist())), PROV_INITIAL
        )
        queries.append(Query(qid, ""))

    partners = _co_relevance_partners(rel_docs_per_query, spec.num_docs)

    # Affinity graph: co-relevant edges carry high weights, noise edges low.
    k = spec.graph_k
    adjacency: List[List[Tuple[int, float]]] = []
    for d in range(spec.num_docs):
        part = np.array(sorted(partners[d]), dtype=np.int64)
        if spec.max_co_edges is not None:
            n_co = min(spec.max_co_edges, len(part))
            n_noise = k - n_co
        elif spec.edge_precision >= 1.0:
            n_co = min(k, len(part))
            n_noise = 0
        else:
            n_co = min(int(round(k * spec.edge_precision)), len(part))
            n_noise = k - n_co
        chosen_co = rng.choice(part, size=n_co, replace=False) if n_co else part[:0]
        noise: List[int] = []
        if n_noise:
            banned = set(part.tolist())
            banned.add(d)
            while len(noise) < n_noise:
                draw = rng.integers(0, spec.num_docs, size=2 * n_noise)
                for cand in draw.tolist():
                    if cand not in banned:
                        banned.add(cand)
                        noise.append(cand)
                        if len(noise) == n_noise:
                            break
        if spec.weights == WEIGHTS_AFFINITY:
            # Noisy affinity estimates: co-relevant edges are usually but not
            # always heavier than noise edges.
            co_w = rng.uniform(0.2, 1.0, size=len(chosen_co))
            noise_w = rng.uniform(0.0, 0.8, size=len(noise))
        elif spec.weights == WEIGHTS_ORACLE:
            # Clean separation: co-relevant edges always outrank noise edges,
            # so pruning keeps them and precision decays with neighbor rank.
            co_w = rng.uniform(0.6, 1.0, size=len(chosen_co))
            noise_w = rng.uniform(0.0, 0.4, size=len(noise))
        else:
            co_w = np.ones(len(chosen_co))
            noise_w = np.ones(len(noise))
        row = list(zip(chosen_co.tolist(), co_w.tolist())) + list(
            zip(noise, noise_w.tolist())
        )
        adjacency.append(row)
    graph = CorpusGraph.from_adjacency(spec.num_docs, k, adjacency)

    # Optional token bags with cluster-specific vocabularies.
    doc_tokens: Optional[List[List[str]]] = None
    if spec.tokens_per_doc > 0:
        doc_tokens = []
        for d in range(spec.num_docs):
            ci = int(cluster_of[d])
            n_local = max(1, int(round(spec.tokens_per_doc * 0.7)))
            local = [f"c{ci}t{int(t)}" for t in rng.integers(0, 50, size=n_local)]
            shared = [
                f"g{int(t)}"
                for t in rng.integers(0, 200, size=spec.tokens_per_doc - n_local)
            ]
            doc_tokens.append(local + shared)
        queries = [
            Query(q.id, " ".join(f"c{query_cluster[i]}t{int(t)}" for t in rng.integers(0, 50, size=3)))
            for i, q in enumerate(queries)
        ]

    return SynthDataset(
        spec=spec,
        docmap=docmap,
        doc_tokens=doc_tokens,
        queries=queries,
        qrels=qrels,
        rankings=rankings,
        graph=graph,
        cluster_of=cluster_of,
        partners=partners,
    )


def measured_first_stage_recall(ds: SynthDataset, rel_threshold: int = 1) -> float:
    """Mean fraction of each query's relevant docs present in its pool."""
    values = []
    for qid, ranking in ds.rankings.items():
        relevant = {
            ds.docmap.internal(docno)
            for docno, g in ds.qrels[qid].items()
            if g >= rel_threshold
        }
        pool = set(ranking.docs())
        values.append(len(relevant & pool) / len(relevant))
    return float(np.mean(values))


def measured_edge_precision(ds: SynthDataset) -> float:
    """Fraction of edges joining co-relevant pairs, over docs that have partners."""
    good = total = 0
    for src, dst, _ in ds.graph.edges():
        if not ds.partners[src]:
            continue
        total += 1
        if dst in ds.partners[src]:
            good += 1
    return good / total if total else 0.0


def write_dataset(ds: SynthDataset, outdir: str, tag: str = "synth-bm25") -> None:
    """Write qrels, R_0 run, graph + id sidecar, queries, and corpus files."""
    os.makedirs(outdir, exist_ok=True)
    trec.write_qrels(ds.qrels, os.path.join(outdir, "qrels.txt"))
    run = {qid: r.to_run_entries(ds.docmap) for qid, r in ds.rankings.items()}
    trec.write_run(run, os.path.join(outdir, "r0.run"), tag=tag)
    save_graph(ds.graph, os.path.join(outdir, "graph.bin"))
    ds.docmap.save(os.path.join(outdir, "graph.bin.docs"))
    with open(os.path.join(outdir, "queries.tsv"), "w", encoding="utf-8") as fh:
        for q in ds.queries:
            fh.write(f"{q.id}\t{q.text}\n")
    with open(os.path.join(outdir, "corpus.tsv"), "w", encoding="utf-8") as fh:
        for d, docno in enumerate(ds.docmap.docnos):
            text = " ".join(ds.doc_tokens[d]) if ds.doc_tokens else ""
            fh.write(f"{docno}\t{text}\n")
