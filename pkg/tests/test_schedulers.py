import numpy as np
import pytest

from adaptive_rerank import schedulers, setaff
from adaptive_rerank.errors import ConfigError
from adaptive_rerank.graph import CorpusGraph, reweight_graph
from adaptive_rerank.relevance import PROV_FRONTIER, PROV_INITIAL, Query, Ranking

from conftest import DictScorer, random_graph


def make_r0(docs):
    return Ranking.from_scores(
        "q", [(d, float(len(docs) - i)) for i, d in enumerate(docs)], PROV_INITIAL
    )


def random_instance(rng, num_docs=40, pool=12):
    g = random_graph(rng, num_docs, 4)
    docs = rng.choice(num_docs, size=pool, replace=False).tolist()
    r0 = make_r0(docs)
    scorer = DictScorer({d: float(rng.random()) for d in range(num_docs)})
    return r0, scorer, g


# -- config ---------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        schedulers.ScheduleConfig(budget=0)
    with pytest.raises(ConfigError):
        schedulers.ScheduleConfig(budget=10, batch=0)
    with pytest.raises(ConfigError):
        schedulers.ScheduleConfig(budget=10, top_set_size=11)
    with pytest.raises(ConfigError):
        schedulers.ScheduleConfig(budget=10, strategy="nope")
    cfg = schedulers.ScheduleConfig(budget=50)
    assert cfg.top_set_size == 10  # budget-dependent default
    assert schedulers.ScheduleConfig(budget=100).top_set_size == 30
    assert schedulers.ScheduleConfig(budget=1000).top_set_size == 300


def test_dispatch_requires_graph():
    r0 = make_r0([0, 1])
    scorer = DictScorer({0: 1.0, 1: 0.5})
    for strategy in ("gar", "gar-laff", "gar-setaff", "quam"):
        cfg = schedulers.ScheduleConfig(budget=2, strategy=strategy)
        with pytest.raises(ConfigError):
            schedulers.rerank(r0, scorer, Query("q", ""), cfg, None)


# -- plain ----------------------------------------------------------------

def test_plain_scores_prefix_and_sorts():
    r0 = make_r0([5, 3, 8, 1])
    scorer = DictScorer({5: 0.2, 3: 0.9, 8: 0.5, 1: 0.7})
    cfg = schedulers.ScheduleConfig(budget=10, batch=2, strategy="plain")
    r1, trace = schedulers.rerank_plain(r0, scorer, Query("q", ""), cfg)
    assert r1.docs() == [3, 1, 8, 5]
    assert [len(s.batch) for s in trace.steps] == [2, 2]
    cfg1 = schedulers.ScheduleConfig(budget=1, strategy="plain")
    r1, _ = schedulers.rerank_plain(r0, scorer, Query("q", ""), cfg1)
    assert r1.docs() == [5]  # best-retrieved doc only


def test_plain_matches_brute_force_sort():
    rng = np.random.default_rng(0)
    for trial in range(10):
        r0, scorer, _ = random_instance(rng)
        c = int(rng.integers(1, 15))
        cfg = schedulers.ScheduleConfig(budget=c, batch=3, strategy="plain")
        r1, _ = schedulers.rerank_plain(r0, scorer, Query("q", ""), cfg)
        prefix = r0.docs()[:c]
        expect = sorted(prefix, key=lambda d: (-scorer.scores[d], d))
        assert r1.docs() == expect


def test_plain_empty_pool():
    cfg = schedulers.ScheduleConfig(budget=5, strategy="plain")
    r1, trace = schedulers.rerank_plain(
        Ranking.from_scores("q", []), DictScorer({}), Query("q", ""), cfg
    )
    assert len(r1) == 0 and trace.steps == []


# -- GAR ------------------------------------------------------------------

def test_gar_zero_edges_equals_plain():
    rng = np.random.default_rng(1)
    r0, scorer, _ = random_instance(rng)
    g = CorpusGraph.from_adjacency(40, 2, [[] for _ in range(40)])
    cfg = schedulers.ScheduleConfig(budget=8, batch=3, strategy="gar")
    r_gar, _ = schedulers.rerank_gar(r0, scorer, Query("q", ""), g, cfg)
    cfg_p = schedulers.ScheduleConfig(budget=8, batch=3, strategy="plain")
    r_plain, _ = schedulers.rerank_plain(r0, scorer, Query("q", ""), cfg_p)
    assert r_gar.entries == r_plain.entries


def test_gar_single_batch_equals_plain():
    rng = np.random.default_rng(2)
    r0, scorer, g = random_instance(rng)
    cfg = schedulers.ScheduleConfig(budget=6, batch=16, strategy="gar")
    r_gar, trace = schedulers.rerank_gar(r0, scorer, Query("q", ""), g, cfg)
    cfg_p = schedulers.ScheduleConfig(budget=6, batch=16, strategy="plain")
    r_plain, _ = schedulers.rerank_plain(r0, scorer, Query("q", ""), cfg_p)
    assert r_gar.entries == r_plain.entries
    assert len(trace.steps) == 1


def test_gar_six_doc_frontier(six_doc):
    r0, scorer, g, query, _ = six_doc
    cfg = schedulers.ScheduleConfig(
        budget=4, batch=2, top_set_size=2, strategy="gar", capture_frontier=True
    )
    r1, trace = schedulers.rerank_gar(r0, scorer, query, g, cfg)
    # after batch 1 ({d1,d2}): d5 inherits 0.9 from d1; d6 reached from d1
    # (0.9) and d2 (0.1), max kept
    assert trace.steps[0].batch == (0, 1)
    assert trace.steps[0].frontier == {4: 0.9, 5: 0.9}
    # frontier batch pops d5 (rank 0 in d1's list) then d6
    assert trace.steps[1].pool == schedulers.POOL_FRONTIER
    assert trace.steps[1].batch == (4, 5)
    assert r1.docs() == [4, 0, 1, 5]


# -- QUAM -----------------------------------------------------------------

def test_quam_six_doc_trace(six_doc):
    r0, scorer, g, query, _ = six_doc
    cfg = schedulers.ScheduleConfig(
        budget=4, batch=2, top_set_size=2, strategy="quam", capture_frontier=True
    )
    r1, trace = schedulers.rerank_quam(r0, scorer, query, g, cfg)
    step1, step2 = trace.steps
    assert step1.pool == schedulers.POOL_R0 and step1.batch == (0, 1)
    assert step1.frontier is not None
    assert step1.frontier[4] == pytest.approx(0.620977, abs=1e-6)
    assert step1.frontier[5] == pytest.approx(0.317018, abs=1e-6)
    assert step2.pool == schedulers.POOL_FRONTIER and step2.batch == (4, 5)
    assert r1.docs() == [4, 0, 1, 5]
    assert [e.provenance for e in r1.entries] == [
        PROV_FRONTIER, PROV_INITIAL, PROV_INITIAL, PROV_FRONTIER,
    ]


def test_quam_zero_edges_equals_plain():
    rng = np.random.default_rng(3)
    r0, scorer, _ = random_instance(rng)
    g = CorpusGraph.from_adjacency(40, 2, [[] for _ in range(40)])
    cfg = schedulers.ScheduleConfig(budget=8, batch=3, top_set_size=4, strategy="quam")
    r_q, _ = schedulers.rerank_quam(r0, scorer, Query("q", ""), g, cfg)
    cfg_p = schedulers.ScheduleConfig(budget=8, batch=3, strategy="plain")
    r_p, _ = schedulers.rerank_plain(r0, scorer, Query("q", ""), cfg_p)
    assert r_q.entries == r_p.entries


def test_quam_budget_not_above_batch_equals_plain_first_batch():
    rng = np.random.default_rng(4)
    r0, scorer, g = random_instance(rng)
    cfg = schedulers.ScheduleConfig(budget=3, batch=5, top_set_size=2, strategy="quam")
    r_q, _ = schedulers.rerank_quam(r0, scorer, Query("q", ""), g, cfg)
    expect = sorted(r0.docs()[:3], key=lambda d: (-scorer.scores[d], d))
    assert r_q.docs() == expect


def test_quam_max_of_both_equals_out_on_symmetric_graph():
    rng = np.random.default_rng(5)
    # build a symmetric graph: include both directions with equal weights
    n = 30
    adjacency = [[] for _ in range(n)]
    seen = set()
    for _ in range(60):
        a, b = int(rng.integers(n)), int(rng.integers(n))
        if a == b or (a, b) in seen:
            continue
        w = float(rng.random())
        seen.add((a, b)); seen.add((b, a))
        adjacency[a].append((b, w))
        adjacency[b].append((a, w))
    g = CorpusGraph.from_adjacency(n, max(len(r) for r in adjacency), adjacency)
    r0 = make_r0(rng.choice(n, size=10, replace=False).tolist())
    scorer = DictScorer({d: float(rng.random()) for d in range(n)})
    out = schedulers.rerank_quam(
        r0, scorer, Query("q", ""), g,
        schedulers.ScheduleConfig(budget=12, batch=3, top_set_size=4,
                                  strategy="quam", edge_mode=setaff.EDGE_OUT),
    )[0]
    both = schedulers.rerank_quam(
        r0, scorer, Query("q", ""), g,
        schedulers.ScheduleConfig(budget=12, batch=3, top_set_size=4,
                                  strategy="quam", edge_mode=setaff.EDGE_MAX_BOTH),
    )[0]
    assert out.entries == both.entries


# -- GAR variants ---------------------------------------------------------

def test_gar_laff_identity_reweight_equals_gar():
    rng = np.random.default_rng(6)
    r0, scorer, g = random_instance(rng)
    g2 = reweight_graph(g, lambda a, b: g.edge_weight(a, b))
    cfg = schedulers.ScheduleConfig(budget=10, batch=3, strategy="gar-laff")
    r_laff, _ = schedulers.rerank(r0, scorer, Query("q", ""), cfg, g2)
    cfg_g = schedulers.ScheduleConfig(budget=10, batch=3, strategy="gar")
    r_gar, _ = schedulers.rerank(r0, scorer, Query("q", ""), cfg_g, g)
    assert r_laff.entries == r_gar.entries


def test_gar_setaff_six_doc(six_doc):
    r0, scorer, g, query, _ = six_doc
    cfg = schedulers.ScheduleConfig(
        budget=4, batch=2, top_set_size=2, strategy="gar-setaff",
        capture_frontier=True,
    )
    r1, trace = schedulers.rerank_gar_setaff(r0, scorer, query, g, cfg)
    # same expansion as GAR, but priorities are set affinities
    assert trace.steps[0].frontier[4] == pytest.approx(0.620977, abs=1e-6)
    assert trace.steps[0].frontier[5] == pytest.approx(0.317018, abs=1e-6)
    assert r1.docs() == [4, 0, 1, 5]


def test_gar_setaff_singleton_set_degenerates():
    rng = np.random.default_rng(7)
    r0, scorer, g = random_instance(rng)
    cfg = schedulers.ScheduleConfig(
        budget=8, batch=2, top_set_size=1, strategy="gar-setaff",
        capture_frontier=True,
    )
    _, trace = schedulers.rerank_gar_setaff(r0, scorer, Query("q", ""), g, cfg)
    for i, step in enumerate(trace.steps):
        # with |S| = 1 the probability mass is all on the top doc, so every
        # priority is just that member's edge weight to the candidate
        scored_so_far = [d for s in trace.steps[: i + 1] for d in s.batch]
        top_doc = min(scored_so_far, key=lambda d: (-scorer.scores[d], d))
        for d, p in step.frontier.items():
            assert p == pytest.approx(g.edge_weight(top_doc, d), abs=1e-12)


# -- shared properties ----------------------------------------------------

def test_determinism_same_inputs_same_trace():
    rng = np.random.default_rng(8)
    for strategy in schedulers.STRATEGIES:
        r0, scorer, g = random_instance(np.random.default_rng(99))
        cfg = schedulers.ScheduleConfig(budget=10, batch=3, top_set_size=5,
                                        strategy=strategy, capture_frontier=True)
        a = schedulers.rerank(r0, scorer, Query("q", ""), cfg, g)
        b = schedulers.rerank(r0, scorer, Query("q", ""), cfg, g)
        assert a[0].entries == b[0].entries
        assert [s.__dict__ for s in a[1].steps] == [s.__dict__ for s in b[1].steps]


def test_containment_property():
    rng = np.random.default_rng(9)
    for trial in range(20):
        r0, scorer, g = random_instance(rng)
        strategy = ["gar", "gar-setaff", "quam"][trial % 3]
        cfg = schedulers.ScheduleConfig(budget=int(rng.integers(2, 20)),
                                        batch=int(rng.integers(1, 6)),
                                        top_set_size=2, strategy=strategy)
        r1, trace = schedulers.rerank(r0, scorer, Query("q", ""), cfg, g)
        scored_order = trace.scored_docs()
        r0_set = set(r0.docs())
        for i, d in enumerate(scored_order):
            if d in r0_set:
                continue
            earlier = set(scored_order[:i])
            assert any(d in {j for j, _ in g.neighbors(e)} for e in earlier)
