"""Command-line surface tying the modules into reproducible pipelines.

Exit codes: 0 success, 1 usage/config error, 2 data/format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from . import affinity, evaluation, graph as graph_mod, relevance, schedulers, setaff, synth, trec
from .errors import ConfigError, DataError, FormatError, InvalidInputError
from .text import tokenize


def _read_corpus(path: str) -> Tuple[List[str], List[List[str]]]:
    """Corpus TSV: one `docno<TAB>text` line per document."""
    docnos: List[str] = []
    tokens: List[List[str]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            docno, _, text = line.partition("\t")
            docnos.append(docno)
            tokens.append(tokenize(text))
    if not docnos:
        raise DataError(f"corpus file {path} is empty")
    return docnos, tokens


def _cmd_build_graph(args: argparse.Namespace) -> None:
    docnos, tokens = _read_corpus(args.corpus)
    if args.similarity == "tfidf":
        source: graph_mod.SimilaritySource = graph_mod.TfidfSimilarity(tokens)
    elif args.similarity == "bm25":
        source = _Bm25SelfSimilarity(tokens)
    else:
        raise ConfigError(f"unknown similarity kind {args.similarity!r}")
    g = graph_mod.build_knn_graph(source, len(docnos), args.k)
    graph_mod.save_graph(g, args.out)
    graph_mod.DocMap(docnos).save(args.out + ".docs")
    print(f"wrote {args.out} ({g.num_docs} docs, k={g.k})")


class _Bm25SelfSimilarity:
    """Document-as-query BM25 self-retrieval similarity."""

    def __init__(self, doc_tokens: Sequence[Sequence[str]]):
        self.doc_tokens = doc_tokens
        self.index = relevance.Bm25Index(doc_tokens)

    def similar_to(self, d: int):
        toks = list(self.doc_tokens[d])
        cands = self.index.matching_docs(toks)
        return [(c, self.index.score_doc(toks, c)) for c in cands]


def _docmap_path(args: argparse.Namespace, graph_path: Optional[str]) -> str:
    if args.docmap:
        return args.docmap
    if graph_path:
        return graph_path + ".docs"
    raise ConfigError("--docmap is required when no graph is given")


def _build_scorer(args: argparse.Namespace, docmap: graph_mod.DocMap) -> relevance.Scorer:
    if args.scorer == "replay":
        if not args.scorer_run:
            raise ConfigError("--scorer-run is required with --scorer replay")
        return relevance.ReplayScorer(trec.read_run(args.scorer_run), docmap)
    if args.scorer == "qrels-oracle":
        if not args.qrels:
            raise ConfigError("--qrels is required with --scorer qrels-oracle")
        return relevance.QrelsOracleScorer(
            trec.read_qrels(args.qrels), docmap, noise=args.noise, seed=args.seed
        )
    if args.scorer == "bm25":
        if not args.corpus:
            raise ConfigError("--corpus is required with --scorer bm25")
        docnos, tokens = _read_corpus(args.corpus)
        if docnos != docmap.docnos:
            raise DataError("corpus order does not match the graph doc map")
        return relevance.Bm25Scorer(tokens)
    raise ConfigError(f"unknown scorer {args.scorer!r}")


def _cmd_rerank(args: argparse.Namespace) -> None:
    needs_affinity = args.strategy in ("quam", "gar-laff", "gar-setaff")
    graph_path = args.affinity_graph if needs_affinity else args.graph
    if args.strategy != "plain" and not graph_path:
        flag = "--affinity-graph" if needs_affinity else "--graph"
        raise ConfigError(f"strategy {args.strategy!r} requires {flag}")
    g = graph_mod.load_graph(graph_path) if graph_path else None
    docmap = graph_mod.DocMap.load(_docmap_path(args, graph_path))
    scorer = _build_scorer(args, docmap)
    run0 = trec.read_run(args.r0)
    cfg = schedulers.ScheduleConfig(
        budget=args.budget,
        batch=args.batch,
        top_set_size=args.s,
        strategy=args.strategy,
        estimator=args.estimator,
        edge_mode=args.edge_mode,
        seed=args.seed,
        capture_frontier=bool(args.trace),
    )
    def run_query(qid: str) -> Tuple[str, relevance.Ranking, schedulers.Trace]:
        r0 = relevance.Ranking.from_scores(
            qid,
            [(docmap.internal(docno), score) for docno, score in run0[qid]],
            relevance.PROV_INITIAL,
        )
        query = relevance.Query(qid, "")
        r1, tr = schedulers.rerank(r0, scorer, query, cfg, g)
        return qid, r1, tr

    qids = sorted(run0)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(run_query, qids))
    else:
        results = [run_query(qid) for qid in qids]

    out_run = {qid: r1.to_run_entries(docmap) for qid, r1, _ in results}
    trec.write_run(out_run, args.out, tag=args.strategy)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for qid, _, tr in results:
                for step in tr.steps:
                    rec = step.to_record()
                    rec["qid"] = qid
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"wrote {args.out} ({len(results)} queries, strategy={args.strategy})")


def _cmd_evaluate(args: argparse.Namespace) -> None:
    run = trec.read_run(args.run)
    qrels = trec.read_qrels(args.qrels)
    cutoffs = [int(c) for c in args.cutoffs.split(",") if c]
    budget = args.budget or max((len(entries) for entries in run.values()), default=1)
    report = evaluation.evaluate_run(
        run, qrels, budget, ndcg_cutoffs=cutoffs, rel_threshold=args.threshold
    )
    lines = ["metric\tmean"]
    for metric in report.metrics():
        lines.append(f"{metric}\t{report.mean(metric):.6f}")
    output = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(output)
    else:
        sys.stdout.write(output)
    if args.per_query:
        with open(args.per_query, "w", encoding="utf-8") as fh:
            for metric in report.metrics():
                for qid, value in sorted(report.per_query[metric].items()):
                    fh.write(json.dumps({"qid": qid, "metric": metric, "value": value}) + "\n")
    if report.no_relevant:
        print(
            f"note: {len(report.no_relevant)} queries have no relevant docs at "
            f"threshold {args.threshold}",
            file=sys.stderr,
        )


def _cmd_bench(args: argparse.Namespace) -> None:
    spec = synth.SynthSpec(
        num_docs=args.num_docs,
        num_queries=args.num_queries,
        pool_size=min(args.budget, args.num_docs),
        graph_k=args.k,
        seed=args.seed,
    )
    ds = synth.generate(spec)
    strategies = [s for s in args.strategies.split(",") if s]
    for s in strategies:
        if s not in schedulers.STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")

    def make_cfg(strategy: str) -> schedulers.ScheduleConfig:
        return schedulers.ScheduleConfig(
            budget=args.budget,
            batch=args.batch,
            top_set_size=args.s,
            strategy=strategy,
            seed=args.seed,
        )

    report = evaluation.latency_bench(
        strategies,
        ds.queries,
        ds.rankings,
        ds.graph,
        make_cfg,
        repeats=args.repeats,
    )
    lines = ["strategy\tbudget\tms_per_query"]
    for strategy in strategies:
        lines.append(f"{strategy}\t{args.budget}\t{report.ms_per_query[strategy]:.4f}")
    output = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(output)
    else:
        sys.stdout.write(output)


def _cmd_synth(args: argparse.Namespace) -> None:
    spec = synth.SynthSpec(
        num_docs=args.num_docs,
        num_queries=args.num_queries,
        cluster_size=_parse_range(args.cluster_size),
        relevant_per_query=_parse_range(args.relevant),
        first_stage_recall=args.recall,
        edge_precision=args.edge_precision,
        graph_k=args.k,
        pool_size=args.pool,
        weights=args.weights,
        max_co_edges=args.max_co_edges,
        tokens_per_doc=args.tokens_per_doc,
        seed=args.seed,
    )
    ds = synth.generate(spec)
    synth.write_dataset(ds, args.out)
    print(f"wrote dataset to {args.out} ({spec.num_docs} docs, {spec.num_queries} queries)")


def _parse_range(text: str) -> Tuple[int, int]:
    try:
        lo, _, hi = text.partition(",")
        return int(lo), int(hi or lo)
    except ValueError:
        raise ConfigError(f"expected 'lo,hi' range, got {text!r}") from None


def _cmd_mine_triples(args: argparse.Namespace) -> None:
    run0 = trec.read_run(args.r0)
    run1 = trec.read_run(args.r1)
    docnos = sorted(
        {d for entries in run0.values() for d, _ in entries}
        | {d for entries in run1.values() for d, _ in entries}
    )
    docmap = graph_mod.DocMap(docnos)
    triples: List[affinity.TrainingTriple] = []
    for qid in sorted(run0):
        if qid not in run1:
            continue
        r0 = relevance.Ranking.from_scores(
            qid, [(docmap.internal(d), s) for d, s in run0[qid]]
        )
        r1 = relevance.Ranking.from_scores(
            qid, [(docmap.internal(d), s) for d, s in run1[qid]]
        )
        triples.extend(affinity.mine_triples(r0, r1, args.k))
    affinity.write_triples(triples, docmap, args.out)
    print(f"wrote {len(triples)} triples to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-rerank",
        description="Adaptive re-ranking over weighted document-affinity graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="build a kNN graph from a corpus TSV")
    p.add_argument("--corpus", required=True, help="TSV: docno<TAB>text")
    p.add_argument("--k", type=int, default=16, help="max out-degree")
    p.add_argument("--similarity", choices=["tfidf", "bm25"], default="tfidf")
    p.add_argument("--out", required=True, help="output graph file")
    p.set_defaults(func=_cmd_build_graph)

    p = sub.add_parser("rerank", help="re-rank an initial run under a budget")
    p.add_argument("--r0", required=True, help="initial TREC run file")
    p.add_argument("--graph", help="corpus graph for gar")
    p.add_argument("--affinity-graph", help="affinity graph for quam/gar-laff/gar-setaff")
    p.add_argument("--docmap", help="id sidecar (default: <graph>.docs)")
    p.add_argument("--scorer", choices=["replay", "qrels-oracle", "bm25"], default="replay")
    p.add_argument("--scorer-run", help="run file with replay scores")
    p.add_argument("--qrels", help="qrels for the oracle scorer")
    p.add_argument("--corpus", help="corpus TSV for the bm25 scorer")
    p.add_argument("--noise", type=float, default=0.0, help="oracle score noise stddev")
    p.add_argument("--strategy", choices=list(schedulers.STRATEGIES), default="quam")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--s", type=int, default=None, help="top-set size (default by budget)")
    p.add_argument(
        "--estimator", choices=list(setaff.ESTIMATORS), default=setaff.ESTIMATOR_RANKER
    )
    p.add_argument("--edge-mode", choices=list(setaff.EDGE_MODES), default=setaff.EDGE_OUT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="parallelism across queries")
    p.add_argument("--out", required=True, help="output run file")
    p.add_argument("--trace", help="optional JSON-lines trace dump")
    p.set_defaults(func=_cmd_rerank)

    p = sub.add_parser("evaluate", help="nDCG/Recall report for a run")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--cutoffs", default="10", help="comma-separated nDCG cutoffs")
    p.add_argument("--budget", type=int, help="budget c for nDCG@c / Recall@c")
    p.add_argument("--threshold", type=int, default=2, help="binary relevance grade")
    p.add_argument("--out", help="TSV output (default stdout)")
    p.add_argument("--per-query", help="optional per-query JSON-lines output")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench", help="scheduler-only latency benchmark")
    p.add_argument("--strategies", default="plain,gar,quam")
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--num-docs", type=int, default=5000)
    p.add_argument("--num-queries", type=int, default=10)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="TSV output (default stdout)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p.add_argument("--num-docs", type=int, default=2000)
    p.add_argument("--num-queries", type=int, default=50)
    p.add_argument("--cluster-size", default="8,12")
    p.add_argument("--relevant", default="4,8")
    p.add_argument("--recall", type=float, default=0.5)
    p.add_argument("--edge-precision", type=float, default=0.8)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--pool", type=int, default=50)
    p.add_argument(
        "--weights",
        choices=[synth.WEIGHTS_AFFINITY, synth.WEIGHTS_ORACLE, synth.WEIGHTS_UNIFORM],
        default=synth.WEIGHTS_AFFINITY,
    )
    p.add_argument("--max-co-edges", type=int, default=None)
    p.add_argument("--tokens-per-doc", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("mine-triples", help="mine pseudo co-relevance triples")
    p.add_argument("--r0", required=True, help="retriever run")
    p.add_argument("--r1", required=True, help="re-ranked run")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mine_triples)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        args.func(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
