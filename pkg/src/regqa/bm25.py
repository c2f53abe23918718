"""Okapi BM25 lexical scoring over a corpus.

For a query q and passage p with term frequencies tf(t, p), length dl,
and corpus average length avgdl over N passages:

    score(q, p) = sum over query tokens t of
        idf(t) * tf(t, p) * (k1 + 1)
                 / (tf(t, p) + k1 * (1 - b + b * dl / avgdl))

    idf(t) = ln((N - df(t) + 0.5) / (df(t) + 0.5) + 1)

The +1 inside the logarithm keeps idf finite and positive for terms in
every passage. Repeated query tokens contribute once per occurrence.
Tokenization lowercases and splits on Unicode letter/digit runs with no
stemming or stopword removal, so scoring is reproducible everywhere.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Corpus, PassageRef, ScoredPassage
from .text import tokenize


@dataclass(frozen=True)
class Bm25Params:
    """Okapi parameters: k1 saturates term frequency, b scales length."""

    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


class Bm25Index:
    """Immutable inverted statistics for one corpus and parameter set."""

    def __init__(self, corpus: Corpus, params: Bm25Params = Bm25Params()) -> None:
        if len(corpus) == 0:
            raise ValueError("cannot build a BM25 index over an empty corpus")
        self.params = params
        self.refs: list[PassageRef] = []
        self.keys: list[str] = []
        self._tf: list[Counter[str]] = []
        self._doc_len: list[int] = []
        df: Counter[str] = Counter()
        for passage in corpus:
            tokens = tokenize(passage.text)
            counts = Counter(tokens)
            self.refs.append(passage.ref)
            self.keys.append(passage.ref.key)
            self._tf.append(counts)
            self._doc_len.append(len(tokens))
            df.update(counts.keys())
        self.size = len(self.refs)
        self.avgdl = sum(self._doc_len) / self.size
        self._idf = {
            term: math.log((self.size - count + 0.5) / (count + 0.5) + 1.0)
            for term, count in df.items()
        }

    def idf(self, term: str) -> float:
        """idf of a known term; unseen terms score 0 everywhere anyway."""
        return self._idf.get(
            term, math.log((self.size + 0.5) / 0.5 + 1.0)
        )

    def scores(self, query: str) -> list[float]:
        """BM25 score of every passage for ``query``, in corpus order."""
        query_tokens = tokenize(query)
        k1 = self.params.k1
        b = self.params.b
        out = []
        for tf, dl in zip(self._tf, self._doc_len):
            norm = k1 * (1.0 - b + b * (dl / self.avgdl))
            score = 0.0
            for term in query_tokens:
                freq = tf.get(term, 0)
                if freq == 0:
                    continue
                score += self.idf(term) * (freq * (k1 + 1.0)) / (freq + norm)
            out.append(score)
        return out


def build_bm25_index(corpus: Corpus, params: Bm25Params = Bm25Params()) -> Bm25Index:
    return Bm25Index(corpus, params)


def bm25_search(index: Bm25Index, query: str, k: int) -> list[ScoredPassage]:
    """Top-k passages by BM25 score.

    Ties break by descending score then ascending passage key, so the
    ordering is deterministic. If k exceeds the corpus size the whole
    corpus is returned.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = index.scores(query)
    order = sorted(range(index.size), key=lambda i: (-scores[i], index.keys[i]))
    top = order[: min(k, index.size)]
    return [
        ScoredPassage(
            ref=index.refs[i],
            raw_score=scores[i],
            normalized_score=None,
            rank=rank,
        )
        for rank, i in enumerate(top, 1)
    ]
