"""Tokenization and TF-IDF helpers shared by the lexical scorer and affinity."""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Dict, List, Sequence

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> List[str]:
    """Lowercase and split on non-alphanumeric characters. No stemming."""
    return _TOKEN_RE.findall(text.lower())


def tfidf_vectors(doc_tokens: Sequence[Sequence[str]]) -> List[Dict[str, float]]:
    """L2-normalized TF-IDF vectors (ltc weighting: log-tf, smoothed idf)."""
    n = len(doc_tokens)
    df: Counter = Counter()
    for toks in doc_tokens:
        df.update(set(toks))
    idf = {t: math.log((n + 1) / (c + 1)) + 1.0 for t, c in df.items()}
    vectors: List[Dict[str, float]] = []
    for toks in doc_tokens:
        tf = Counter(toks)
        vec = {t: (1.0 + math.log(c)) * idf[t] for t, c in tf.items()}
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm > 0:
            vec = {t: w / norm for t, w in vec.items()}
        vectors.append(vec)
    return vectors


def cosine(a: Dict[str, float], b: Dict[str, float]) -> float:
    if len(b) < len(a):
        a, b = b, a
    return sum(w * b.get(t, 0.0) for t, w in a.items())
