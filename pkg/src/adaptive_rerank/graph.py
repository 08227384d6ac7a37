"""Weighted directed document-affinity graphs.

A graph stores, for every document, its top-k most similar documents together
with non-negative edge weights. Neighbor lists are kept sorted by
(-weight, neighbor id) so that every traversal and serialization is
deterministic. Weights are stored in 32-bit floats; downstream arithmetic is
done in 64-bit.
"""

from __future__ import annotations

import struct
import zlib
from typing import Callable, Dict, Iterable, List, Optional, Protocol, Sequence, Set, Tuple

import numpy as np

from .errors import DataError, FormatError, InvalidInputError
from .text import cosine, tfidf_vectors

Neighbor = Tuple[int, float]

MAGIC = b"QAG1"
FORMAT_VERSION = 1

AffinityFn = Callable[[int, int], float]


def _sort_key(entry: Neighbor) -> Tuple[float, int]:
    return (-entry[1], entry[0])


class CorpusGraph:
    """Immutable kNN graph in CSR layout. Safe for concurrent readers."""

    __slots__ = ("num_docs", "k", "indptr", "nbr_ids", "nbr_weights", "_padded")

    def __init__(
        self,
        num_docs: int,
        k: int,
        indptr: np.ndarray,
        nbr_ids: np.ndarray,
        nbr_weights: np.ndarray,
        validate: bool = True,
    ):
        self.num_docs = int(num_docs)
        self.k = int(k)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.nbr_ids = np.ascontiguousarray(nbr_ids, dtype=np.int64)
        self.nbr_weights = np.ascontiguousarray(nbr_weights, dtype=np.float32)
        for arr in (self.indptr, self.nbr_ids, self.nbr_weights):
            arr.setflags(write=False)
        self._padded: Optional[Tuple[np.ndarray, np.ndarray]] = None
        if validate:
            self._validate()

    @classmethod
    def from_adjacency(
        cls, num_docs: int, k: int, adjacency: Sequence[Sequence[Neighbor]]
    ) -> "CorpusGraph":
        """Build from per-node neighbor lists; sorts each list deterministically."""
        if len(adjacency) != num_docs:
            raise InvalidInputError(
                f"adjacency has {len(adjacency)} rows for {num_docs} docs"
            )
        indptr = np.zeros(num_docs + 1, dtype=np.int64)
        ids: List[int] = []
        weights: List[float] = []
        for d, nbrs in enumerate(adjacency):
            entries = [(int(n), float(np.float32(w))) for n, w in nbrs]
            entries.sort(key=_sort_key)
            indptr[d + 1] = indptr[d] + len(entries)
            ids.extend(n for n, _ in entries)
            weights.extend(w for _, w in entries)
        return cls(
            num_docs,
            k,
            indptr,
            np.array(ids, dtype=np.int64),
            np.array(weights, dtype=np.float32),
        )

    def _validate(self) -> None:
        if self.num_docs < 0:
            raise DataError("negative num_docs")
        if self.k < 0:
            raise DataError("negative k")
        if self.indptr.shape != (self.num_docs + 1,):
            raise DataError("indptr shape mismatch")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.nbr_ids):
            raise DataError("indptr does not span the edge arrays")
        if np.any(np.diff(self.indptr) < 0):
            raise DataError("indptr not monotone")
        if np.any(np.diff(self.indptr) > self.k):
            raise DataError(f"out-degree exceeds k={self.k}")
        if len(self.nbr_ids) != len(self.nbr_weights):
            raise DataError("edge array length mismatch")
        if len(self.nbr_ids):
            if self.nbr_ids.min(initial=0) < 0 or self.nbr_ids.max(initial=0) >= self.num_docs:
                raise DataError("neighbor id out of range")
            if not np.all(np.isfinite(self.nbr_weights)):
                raise DataError("non-finite edge weight")
            if np.any(self.nbr_weights < 0):
                raise DataError("negative edge weight")
        for d in range(self.num_docs):
            lo, hi = self.indptr[d], self.indptr[d + 1]
            node_ids = self.nbr_ids[lo:hi]
            node_w = self.nbr_weights[lo:hi]
            if np.any(node_ids == d):
                raise DataError(f"self-loop at doc {d}")
            prev: Optional[Tuple[float, int]] = None
            for n, w in zip(node_ids.tolist(), node_w.tolist()):
                key = (-w, n)
                if prev is not None and key <= prev:
                    raise DataError(f"neighbor list of doc {d} not strictly sorted")
                prev = key

    # -- queries ---------------------------------------------------------

    def degree(self, d: int) -> int:
        self._check_doc(d)
        return int(self.indptr[d + 1] - self.indptr[d])

    def neighbors(self, d: int, limit: Optional[int] = None) -> List[Neighbor]:
        """First min(limit, out-degree) entries of d's sorted neighbor list."""
        self._check_doc(d)
        if limit is None:
            limit = self.k
        if limit < 0:
            raise InvalidInputError("limit must be >= 0")
        lo = int(self.indptr[d])
        hi = min(int(self.indptr[d + 1]), lo + limit)
        return list(
            zip(self.nbr_ids[lo:hi].tolist(), self.nbr_weights[lo:hi].astype(float).tolist())
        )

    def neighbor_arrays(self, d: int) -> Tuple[np.ndarray, np.ndarray]:
        """Zero-copy (ids, float32 weights) views of d's neighbor list."""
        lo, hi = self.indptr[d], self.indptr[d + 1]
        return self.nbr_ids[lo:hi], self.nbr_weights[lo:hi]

    def edge_weight(self, src: int, dst: int) -> float:
        """Weight of edge src->dst, 0.0 when absent (sparse semantics)."""
        lo, hi = self.indptr[src], self.indptr[src + 1]
        ids = self.nbr_ids[lo:hi]
        pos = np.nonzero(ids == dst)[0]
        if len(pos) == 0:
            return 0.0
        return float(self.nbr_weights[lo + pos[0]])

    def padded_adjacency(self) -> Tuple[np.ndarray, np.ndarray]:
        """(num_docs, k) neighbor-id and weight matrices, padded for fast batch
        lookups. Pad slots use the sentinel id `num_docs` and weight 0. Cached.
        """
        if self._padded is None:
            n, k = self.num_docs, self.k
            ids = np.full((n, k), n, dtype=np.int64)
            weights = np.zeros((n, k), dtype=np.float32)
            degrees = np.diff(self.indptr)
            mask = np.arange(k)[None, :] < degrees[:, None]
            ids[mask] = self.nbr_ids
            weights[mask] = self.nbr_weights
            ids.setflags(write=False)
            weights.setflags(write=False)
            self._padded = (ids, weights)
        return self._padded

    def edges(self) -> Iterable[Tuple[int, int, float]]:
        for d in range(self.num_docs):
            for n, w in self.neighbors(d):
                yield d, n, w

    def _check_doc(self, d: int) -> None:
        if not 0 <= d < self.num_docs:
            raise InvalidInputError(f"doc id {d} out of range [0, {self.num_docs})")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorpusGraph):
            return NotImplemented
        return (
            self.num_docs == other.num_docs
            and self.k == other.k
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.nbr_ids, other.nbr_ids)
            and np.array_equal(self.nbr_weights, other.nbr_weights)
        )

    def __repr__(self) -> str:
        return f"CorpusGraph(num_docs={self.num_docs}, k={self.k}, edges={len(self.nbr_ids)})"


# -- similarity sources for graph construction ---------------------------


class SimilaritySource(Protocol):
    """Yields, for a document, a scored list of candidate similar documents."""

    def similar_to(self, d: int) -> Sequence[Neighbor]: ...


class EmbeddingSimilarity:
    """Dense dot-product similarity over a (num_docs, dim) matrix."""

    def __init__(self, vectors: np.ndarray):
        self.vectors = np.asarray(vectors, dtype=np.float64)

    def similar_to(self, d: int) -> Sequence[Neighbor]:
        scores = self.vectors @ self.vectors[d]
        return list(enumerate(scores.tolist()))


class TfidfSimilarity:
    """TF-IDF cosine similarity via an inverted index of shared terms."""

    def __init__(self, doc_tokens: Sequence[Sequence[str]]):
        self.vectors = tfidf_vectors(doc_tokens)
        self.postings: Dict[str, List[int]] = {}
        for d, vec in enumerate(self.vectors):
            for term in vec:
                self.postings.setdefault(term, []).append(d)

    def similar_to(self, d: int) -> Sequence[Neighbor]:
        cands: Set[int] = set()
        for term in self.vectors[d]:
            cands.update(self.postings[term])
        vec = self.vectors[d]
        return [(c, cosine(vec, self.vectors[c])) for c in sorted(cands)]


class CoRelevanceSimilarity:
    """Oracle similarity: 1.0 for documents sharing a relevant query, else absent."""

    def __init__(self, queries_per_doc: Sequence[Set[str]]):
        self.queries_per_doc = list(queries_per_doc)
        self._docs_per_query: Dict[str, List[int]] = {}
        for d, qs in enumerate(self.queries_per_doc):
            for q in qs:
                self._docs_per_query.setdefault(q, []).append(d)

    def similar_to(self, d: int) -> Sequence[Neighbor]:
        partners: Set[int] = set()
        for q in self.queries_per_doc[d]:
            partners.update(self._docs_per_query[q])
        partners.discard(d)
        return [(p, 1.0) for p in sorted(partners)]


# -- construction and transformation -------------------------------------


def build_knn_graph(source: SimilaritySource, num_docs: int, k: int) -> CorpusGraph:
    """Top-k most similar documents per node, excluding self-loops."""
    if num_docs < 1:
        raise InvalidInputError("corpus must be non-empty")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    adjacency: List[List[Neighbor]] = []
    for d in range(num_docs):
        cands = [
            (int(n), float(np.float32(w))) for n, w in source.similar_to(d) if int(n) != d
        ]
        cands.sort(key=_sort_key)
        adjacency.append(cands[:k])
    return CorpusGraph.from_adjacency(num_docs, k, adjacency)


def reweight_graph(g: CorpusGraph, aff: AffinityFn) -> CorpusGraph:
    """Replace every edge weight by aff(src, dst); same edge set, re-sorted."""
    adjacency: List[List[Neighbor]] = []
    for d in range(g.num_docs):
        row: List[Neighbor] = []
        for n, _ in g.neighbors(d):
            w = float(aff(d, n))
            if not np.isfinite(w):
                raise DataError(f"affinity for edge {d}->{n} is not finite: {w!r}")
            row.append((n, w))
        adjacency.append(row)
    return CorpusGraph.from_adjacency(g.num_docs, g.k, adjacency)


def prune_graph(g: CorpusGraph, k_new: int) -> CorpusGraph:
    """Keep each node's top-k_new neighbors by (-weight, id)."""
    if not 1 <= k_new <= g.k:
        raise InvalidInputError(f"k_new must be in [1, {g.k}], got {k_new}")
    adjacency = [g.neighbors(d, k_new) for d in range(g.num_docs)]
    return CorpusGraph.from_adjacency(g.num_docs, k_new, adjacency)


# -- binary serialization -------------------------------------------------

_HEADER = struct.Struct("<4sHQI")
_DEGREE = struct.Struct("<I")
_EDGE = struct.Struct("<Qf")
_CRC = struct.Struct("<I")


def graph_to_bytes(g: CorpusGraph) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, g.num_docs, g.k)]
    for d in range(g.num_docs):
        lo, hi = int(g.indptr[d]), int(g.indptr[d + 1])
        parts.append(_DEGREE.pack(hi - lo))
        for n, w in zip(g.nbr_ids[lo:hi].tolist(), g.nbr_weights[lo:hi].tolist()):
            parts.append(_EDGE.pack(n, w))
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def graph_from_bytes(data: bytes) -> CorpusGraph:
    if len(data) < _HEADER.size + _CRC.size:
        raise FormatError("truncated graph file", offset=len(data))
    magic, version, num_docs, k = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    body, crc_bytes = data[:-_CRC.size], data[-_CRC.size :]
    (expected_crc,) = _CRC.unpack(crc_bytes)
    if zlib.crc32(body) != expected_crc:
        raise FormatError("CRC-32 mismatch", offset=len(body))
    offset = _HEADER.size
    indptr = np.zeros(num_docs + 1, dtype=np.int64)
    ids: List[int] = []
    weights: List[float] = []
    for d in range(num_docs):
        if offset + _DEGREE.size > len(body):
            raise FormatError(f"truncated at degree of doc {d}", offset=offset)
        (degree,) = _DEGREE.unpack_from(body, offset)
        offset += _DEGREE.size
        if offset + degree * _EDGE.size > len(body):
            raise FormatError(f"truncated in edges of doc {d}", offset=offset)
        for _ in range(degree):
            n, w = _EDGE.unpack_from(body, offset)
            offset += _EDGE.size
            ids.append(n)
            weights.append(w)
        indptr[d + 1] = len(ids)
    if offset != len(body):
        raise FormatError("trailing bytes after edge data", offset=offset)
    try:
        return CorpusGraph(
            num_docs,
            k,
            indptr,
            np.array(ids, dtype=np.int64),
            np.array(weights, dtype=np.float32),
        )
    except DataError as exc:
        raise FormatError(f"invariant violation on load: {exc}") from exc


def save_graph(g: CorpusGraph, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(graph_to_bytes(g))


def load_graph(path: str) -> CorpusGraph:
    with open(path, "rb") as fh:
        return graph_from_bytes(fh.read())


# -- external doc-id sidecar ----------------------------------------------


class DocMap:
    """Bijection between dense internal ids and external document strings."""

    def __init__(self, docnos: Sequence[str]):
        self.docnos = list(docnos)
        self._index = {docno: i for i, docno in enumerate(self.docnos)}
        if len(self._index) != len(self.docnos):
            raise DataError("duplicate external doc id in doc map")

    def __len__(self) -> int:
        return len(self.docnos)

    def internal(self, docno: str) -> int:
        try:
            return self._index[docno]
        except KeyError:
            raise InvalidInputError(f"unknown doc id {docno!r}") from None

    def docno(self, internal: int) -> str:
        if not 0 <= internal < len(self.docnos):
            raise InvalidInputError(f"internal id {internal} out of range")
        return self.docnos[internal]

    def __contains__(self, docno: str) -> bool:
        return docno in self._index

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for docno in self.docnos:
                fh.write(docno + "\n")

    @classmethod
    def load(cls, path: str) -> "DocMap":
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\n") for line in fh if line.rstrip("\n")])
