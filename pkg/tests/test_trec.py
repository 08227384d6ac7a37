import pytest

from adaptive_rerank import trec
from adaptive_rerank.errors import DataError


def test_run_roundtrip_and_rank_recompute(tmp_path):
    run = {
        "q2": [("dB", 0.25), ("dA", 1.5)],
        "q1": [("dC", -3.0)],
    }
    path = tmp_path / "out.run"
    trec.write_run(run, str(path), tag="t")
    lines = path.read_text().splitlines()
    # queries sorted, entries sorted by (-score, docno), ranks from 1
    assert lines[0].split() == ["q1", "Q0", "dC", "1", "-3.0", "t"]
    assert lines[1].split() == ["q2", "Q0", "dA", "1", "1.5", "t"]
    assert lines[2].split() == ["q2", "Q0", "dB", "2", "0.25", "t"]
    back = trec.read_run(str(path))
    assert back["q2"] == [("dA", 1.5), ("dB", 0.25)]


def test_run_double_roundtrip_byte_identical(tmp_path):
    import random

    rnd = random.Random(0)
    run = {
        f"q{i}": [(f"d{j}", rnd.uniform(-5, 5)) for j in range(20)]
        for i in range(5)
    }
    p1, p2 = tmp_path / "a.run", tmp_path / "b.run"
    trec.write_run(run, str(p1), tag="x")
    trec.write_run(trec.read_run(str(p1)), str(p2), tag="x")
    assert p1.read_bytes() == p2.read_bytes()


def test_run_malformed_line_reports_location(tmp_path):
    path = tmp_path / "bad.run"
    path.write_text("q1 Q0 d1 1 0.5 tag\nq1 Q0 d2 nonsense\n")
    with pytest.raises(DataError, match=r"bad\.run:2"):
        trec.read_run(str(path))


def test_qrels_roundtrip(tmp_path):
    qrels = {"q1": {"d1": 2, "d2": 0}, "q2": {"d9": 1}}
    path = tmp_path / "qrels.txt"
    trec.write_qrels(qrels, str(path))
    assert trec.read_qrels(str(path)) == qrels


def test_qrels_malformed(tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 d1 notanint\n")
    with pytest.raises(DataError):
        trec.read_qrels(str(path))
