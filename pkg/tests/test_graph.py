import numpy as np
import pytest

from adaptive_rerank.errors import FormatError, InvalidInputError
from adaptive_rerank.graph import (
    CorpusGraph,
    DocMap,
    EmbeddingSimilarity,
    build_knn_graph,
    graph_from_bytes,
    graph_to_bytes,
    load_graph,
    prune_graph,
    reweight_graph,
    save_graph,
)

from conftest import random_graph


class MatrixSimilarity:
    def __init__(self, sims):
        self.sims = sims

    def similar_to(self, d):
        return [(j, w) for j, w in enumerate(self.sims[d]) if j != d and w > 0]


# -- construction ---------------------------------------------------------

def test_build_knn_three_doc_example():
    # pairwise sims: (0,1)=0.8, (0,2)=0.3, (1,2)=0.5; k=1
    sims = [
        [0.0, 0.8, 0.3],
        [0.8, 0.0, 0.5],
        [0.3, 0.5, 0.0],
    ]
    g = build_knn_graph(MatrixSimilarity(sims), 3, 1)
    assert g.neighbors(0) == [(1, pytest.approx(0.8))]
    assert g.neighbors(1) == [(0, pytest.approx(0.8))]
    assert g.neighbors(2) == [(1, pytest.approx(0.5))]


def test_build_knn_single_doc():
    g = build_knn_graph(MatrixSimilarity([[0.0]]), 1, 4)
    assert g.num_docs == 1 and g.degree(0) == 0


def test_build_knn_k_at_least_n_minus_one():
    rng = np.random.default_rng(0)
    vecs = rng.random(size=(7, 5))  # non-negative sims
    g = build_knn_graph(EmbeddingSimilarity(vecs), 7, 10)
    for d in range(7):
        assert g.degree(d) == 6


def test_build_knn_empty_corpus():
    with pytest.raises(InvalidInputError):
        build_knn_graph(MatrixSimilarity([]), 0, 2)


def test_build_knn_matches_exhaustive_oracle():
    rng = np.random.default_rng(1)
    for trial in range(5):
        n = int(rng.integers(5, 60))
        k = int(rng.integers(1, 8))
        vecs = rng.random(size=(n, 6))  # non-negative sims
        g = build_knn_graph(EmbeddingSimilarity(vecs), n, k)
        sims = vecs @ vecs.T
        for d in range(n):
            pairs = [(float(sims[d, j]), j) for j in range(n) if j != d]
            pairs.sort(key=lambda t: (-t[0], t[1]))
            expect = [j for _, j in pairs[:k]]
            got = [j for j, _ in g.neighbors(d)]
            assert got == expect


def test_graph_invariants_random():
    rng = np.random.default_rng(2)
    for trial in range(20):
        n = int(rng.integers(2, 40))
        k = int(rng.integers(1, 6))
        g = random_graph(rng, n, k)
        for d in range(n):
            nbrs = g.neighbors(d)
            assert len(nbrs) <= g.k
            assert all(j != d for j, _ in nbrs)
            keys = [(-w, j) for j, w in nbrs]
            assert keys == sorted(keys)


def test_from_adjacency_rejects_bad_input():
    from adaptive_rerank.errors import DataError

    with pytest.raises(DataError):
        CorpusGraph.from_adjacency(2, 1, [[(0, 0.5)], []])  # self-loop
    with pytest.raises(DataError):
        CorpusGraph.from_adjacency(2, 1, [[(5, 0.5)], []])  # id out of range
    with pytest.raises(DataError):
        CorpusGraph.from_adjacency(2, 1, [[(1, -0.5)], []])  # negative weight
    with pytest.raises(DataError):
        CorpusGraph.from_adjacency(2, 1, [[(1, float("nan"))], []])


# -- reweight / prune -----------------------------------------------------

def test_reweight_substitution():
    g = CorpusGraph.from_adjacency(2, 1, [[(1, 0.3)], []])
    g2 = reweight_graph(g, lambda a, b: 0.9)
    assert g2.neighbors(0) == [(1, pytest.approx(0.9))]


def test_reweight_identity_is_byte_identical():
    rng = np.random.default_rng(3)
    g = random_graph(rng, 20, 4)
    g2 = reweight_graph(g, lambda a, b: g.edge_weight(a, b))
    assert graph_to_bytes(g) == graph_to_bytes(g2)


def test_reweight_resorts_neighbors():
    g = CorpusGraph.from_adjacency(3, 2, [[(1, 0.9), (2, 0.1)], [], []])
    aff = {(0, 1): 0.2, (0, 2): 0.8}
    g2 = reweight_graph(g, lambda a, b: aff[(a, b)])
    assert [j for j, _ in g2.neighbors(0)] == [2, 1]


def test_reweight_nonfinite_names_edge():
    from adaptive_rerank.errors import DataError

    g = CorpusGraph.from_adjacency(2, 1, [[(1, 0.3)], []])
    with pytest.raises(DataError, match="0->1"):
        reweight_graph(g, lambda a, b: float("inf"))


def test_prune_noop_and_top2_and_ties():
    g = CorpusGraph.from_adjacency(4, 3, [[(1, 0.9), (2, 0.5), (3, 0.1)], [], [], []])
    assert prune_graph(g, 3) == g
    g2 = prune_graph(g, 2)
    assert [j for j, _ in g2.neighbors(0)] == [1, 2]
    # tie at the cut keeps the lower doc id
    gt = CorpusGraph.from_adjacency(4, 3, [[(1, 0.9), (2, 0.5), (3, 0.5)], [], [], []])
    g3 = prune_graph(gt, 2)
    assert [j for j, _ in g3.neighbors(0)] == [1, 2]


def test_prune_rejects_bad_k():
    g = CorpusGraph.from_adjacency(2, 2, [[(1, 0.5)], []])
    with pytest.raises(InvalidInputError):
        prune_graph(g, 0)
    with pytest.raises(InvalidInputError):
        prune_graph(g, 3)


def test_prune_reweight_edge_subset():
    rng = np.random.default_rng(4)
    for trial in range(10):
        g = random_graph(rng, 25, 5)
        g2 = prune_graph(reweight_graph(g, lambda a, b: rng.random()), 2)
        edges = {(a, b) for a, b, _ in g.edges()}
        assert {(a, b) for a, b, _ in g2.edges()} <= edges


# -- neighbors ------------------------------------------------------------

def test_neighbors_limits_and_errors():
    g = CorpusGraph.from_adjacency(3, 2, [[(1, 0.9), (2, 0.1)], [], []])
    assert g.neighbors(0, 0) == []
    assert g.neighbors(0, 5) == g.neighbors(0)
    assert g.neighbors(0, 1) == [(1, pytest.approx(0.9))]
    with pytest.raises(InvalidInputError):
        g.neighbors(7)


def test_padded_adjacency_matches_neighbors():
    rng = np.random.default_rng(5)
    g = random_graph(rng, 30, 4)
    ids, weights = g.padded_adjacency()
    assert ids.shape == (30, g.k)
    for d in range(30):
        nbrs = g.neighbors(d)
        assert ids[d, : len(nbrs)].tolist() == [j for j, _ in nbrs]
        assert (ids[d, len(nbrs):] == g.num_docs).all()
        assert (weights[d, len(nbrs):] == 0).all()


# -- serialization --------------------------------------------------------

def test_roundtrip_random_graphs(tmp_path):
    rng = np.random.default_rng(6)
    for trial in range(10):
        g = random_graph(rng, int(rng.integers(1, 40)), int(rng.integers(1, 6)))
        path = tmp_path / f"g{trial}.bin"
        save_graph(g, str(path))
        assert load_graph(str(path)) == g


def test_serialization_deterministic():
    rng = np.random.default_rng(7)
    g = random_graph(rng, 15, 3)
    assert graph_to_bytes(g) == graph_to_bytes(g)


def test_empty_edge_graph_roundtrip():
    g = CorpusGraph.from_adjacency(5, 2, [[] for _ in range(5)])
    assert graph_from_bytes(graph_to_bytes(g)) == g


def test_bad_magic_truncation_and_crc():
    g = CorpusGraph.from_adjacency(3, 2, [[(1, 0.5)], [(2, 0.25)], []])
    data = graph_to_bytes(g)
    with pytest.raises(FormatError):
        graph_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        graph_from_bytes(data[:-6])
    corrupted = bytearray(data)
    corrupted[10] ^= 0xFF
    with pytest.raises(FormatError):
        graph_from_bytes(bytes(corrupted))
    # version mismatch
    versioned = bytearray(data)
    versioned[4] = 0x7F
    with pytest.raises(FormatError):
        graph_from_bytes(bytes(versioned))


# -- doc map --------------------------------------------------------------

def test_docmap_bijection_and_roundtrip(tmp_path):
    dm = DocMap(["a", "b", "c"])
    assert dm.internal("b") == 1 and dm.docno(1) == "b"
    assert "c" in dm and "z" not in dm
    path = tmp_path / "ids.docs"
    dm.save(str(path))
    dm2 = DocMap.load(str(path))
    assert dm2.docnos == dm.docnos


def test_docmap_rejects_duplicates():
    from adaptive_rerank.errors import DataError

    with pytest.raises(DataError):
        DocMap(["a", "a"])
