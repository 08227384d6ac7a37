"""TREC run-file and qrels readers/writers.

Run lines: ``qid Q0 docno rank score tag`` with rank ascending from 1 and
scores descending. Qrels lines: ``qid 0 docno rel`` with integer grades.
Writers are byte-deterministic: scores use Python's shortest round-trip
float repr, so write -> read -> write is the identity.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Tuple

from .errors import DataError

RunEntries = List[Tuple[str, float]]  # (docno, score), score-descending
Run = Dict[str, RunEntries]  # qid -> entries
Qrels = Dict[str, Dict[str, int]]  # qid -> docno -> grade


def _sorted_entries(entries: Iterable[Tuple[str, float]]) -> RunEntries:
    return sorted(entries, key=lambda e: (-e[1], e[0]))


def read_run(path: str) -> Run:
    run: Run = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            qid, _, docno, _, score, _ = parts
            try:
                value = float(score)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad score {score!r}") from None
            run.setdefault(qid, []).append((docno, value))
    for qid in run:
        run[qid] = _sorted_entries(run[qid])
    return run


def write_run(run: Mapping[str, Iterable[Tuple[str, float]]], path: str, tag: str = "adaptive-rerank") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run):
            for rank, (docno, score) in enumerate(_sorted_entries(run[qid]), 1):
                fh.write(f"{qid} Q0 {docno} {rank} {score!r} {tag}\n")


def read_qrels(path: str) -> Qrels:
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            qid, _, docno, rel = parts
            try:
                grade = int(rel)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad grade {rel!r}") from None
            if grade < 0:
                raise DataError(f"{path}:{lineno}: negative grade {grade}")
            per_query = qrels.setdefault(qid, {})
            if docno in per_query:
                raise DataError(f"{path}:{lineno}: duplicate qrels entry {qid}/{docno}")
            per_query[docno] = grade
    return qrels


def write_qrels(qrels: Qrels, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(qrels):
            for docno in sorted(qrels[qid]):
                fh.write(f"{qid} 0 {docno} {qrels[qid][docno]}\n")
