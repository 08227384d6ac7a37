import pytest

from adaptive_rerank.text import cosine, tfidf_vectors, tokenize


def test_tokenize():
    assert tokenize("The CAT, sat-on 2 mats!") == ["the", "cat", "sat", "on", "2", "mats"]
    assert tokenize("") == []


def test_tfidf_cosine():
    vecs = tfidf_vectors([["a", "b"], ["a", "b"], ["c"]])
    assert cosine(vecs[0], vecs[1]) == pytest.approx(1.0)
    assert cosine(vecs[0], vecs[2]) == 0.0
    # vectors are L2-normalized
    for v in vecs:
        assert sum(x * x for x in v.values()) == pytest.approx(1.0)
