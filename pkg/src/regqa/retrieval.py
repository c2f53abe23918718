"""Dense search, score fusion, reranking, and the retrieval cascade.

The cascade runs three retrievers per query (BM25 plus two embedding
providers), min-max normalizes each score list, fuses them with a
weighted sum, reranks the fused head with a cross-encoder style
provider, and re-normalizes the final list so downstream filtering
operates on [0, 1] scores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .bm25 import Bm25Index, Bm25Params, bm25_search, build_bm25_index
from .corpus import (
    Corpus,
    PassageRef,
    Question,
    RetrievalRun,
    ScoredPassage,
    scored_to_entries,
)
from .errors import ProviderError
from .providers import EmbeddingProvider, RerankProvider

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FusionWeights:
    """Weights for the three-way fused score.

    Retriever x receives weight ``a``, retriever y weight ``b``, and
    retriever z the remainder 1 - (a + b), so the fused score of a
    passage is a convex combination of its normalized scores.
    """

    a: float = 0.25
    b: float = 0.20

    def __post_init__(self) -> None:
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"weight a must be in [0, 1], got {self.a}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"weight b must be in [0, 1], got {self.b}")
        if self.a + self.b > 1.0 + 1e-12:
            raise ValueError(
                f"weights must satisfy a + b <= 1, got a={self.a} b={self.b}"
            )

    @property
    def c(self) -> float:
        return 1.0 - (self.a + self.b)


@dataclass(frozen=True)
class RerankDepth:
    """How many fused candidates the reranker re-scores."""

    n: int = 50

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"rerank depth must be >= 1, got {self.n}")


def normalize_scores(scored: Sequence[ScoredPassage]) -> list[ScoredPassage]:
    """Min-max normalize one query's score list, preserving order.

    The maximum maps to 1 and the minimum to 0. A list whose scores are
    all equal normalizes to 1.0 everywhere (every passage is
    simultaneously the best and worst, and downstream weighting should
    not zero it out).
    """
    if not scored:
        raise ValueError("cannot normalize an empty score list")
    lo = min(sp.raw_score for sp in scored)
    hi = max(sp.raw_score for sp in scored)
    if hi == lo:
        return [sp.with_normalized(1.0) for sp in scored]
    span = hi - lo
    return [sp.with_normalized((sp.raw_score - lo) / span) for sp in scored]


def fuse(
    run_x: Sequence[ScoredPassage],
    run_y: Sequence[ScoredPassage],
    run_z: Sequence[ScoredPassage],
    weights: FusionWeights,
    k: int,
) -> list[ScoredPassage]:
    """Weighted fusion over the union of three normalized lists.

    A passage missing from a list contributes 0 for that retriever.
    The fused value is stored as both raw and normalized score (it is
    already a convex combination of [0, 1] values); ties break by
    descending score then ascending passage key.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    maps: list[dict[PassageRef, float]] = []
    for name, run in (("x", run_x), ("y", run_y), ("z", run_z)):
        by_ref: dict[PassageRef, float] = {}
        for sp in run:
            if sp.normalized_score is None:
                raise ValueError(
                    f"retriever {name} passage {sp.ref.key} is not normalized"
                )
            by_ref[sp.ref] = sp.normalized_score
        maps.append(by_ref)
    sx, sy, sz = maps
    union = set(sx) | set(sy) | set(sz)
    fused = []
    for ref in union:
        value = (
            weights.a * sx.get(ref, 0.0)
            + weights.b * sy.get(ref, 0.0)
            + weights.c * sz.get(ref, 0.0)
        )
        fused.append((ref, value))
    fused.sort(key=lambda item: (-item[1], item[0].key))
    return [
        ScoredPassage(ref=ref, raw_score=value, normalized_score=value, rank=rank)
        for rank, (ref, value) in enumerate(fused[:k], 1)
    ]


def rerank(
    provider: RerankProvider,
    query: str,
    candidates: Sequence[ScoredPassage],
    depth: RerankDepth,
    k: int,
    corpus: Corpus,
) -> list[ScoredPassage]:
    """Re-score the top ``depth.n`` candidates and re-sort them.

    Candidates beyond the depth keep their incoming order after the
    reranked block. The final list is truncated to ``k`` and ranks are
    reassigned from 1.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    candidates = list(candidates)
    head = candidates[: depth.n]
    tail = candidates[depth.n :]
    if head:
        texts = [corpus.get(sp.ref).text for sp in head]
        priors = [sp.raw_score for sp in head]
        try:
            scores = provider.rerank_scores(query, texts, prior_scores=priors)
        except Exception as exc:
            raise ProviderError(
                f"rerank failed for query {query!r}: {exc}"
            ) from exc
        if len(scores) != len(head):
            raise ProviderError(
                f"reranker returned {len(scores)} scores for {len(head)} passages"
            )
        rescored = []
        for sp, s in zip(head, scores):
            value = float(s)
            # Keep the normalized slot only while the score is still on a
            # [0, 1] scale (score-preserving mocks); otherwise it is stale
            # until the final re-normalization pass.
            normalized = value if 0.0 <= value <= 1.0 else None
            rescored.append(
                replace(sp, raw_score=value, normalized_score=normalized)
            )
        rescored.sort(key=lambda sp: (-sp.raw_score, sp.ref.key))
    else:
        rescored = []
    merged = rescored + tail
    return [replace(sp, rank=rank) for rank, sp in enumerate(merged[:k], 1)]


@dataclass(frozen=True)
class VectorStore:
    """Cached passage embeddings for one provider and corpus."""

    keys: tuple[str, ...]
    refs: tuple[PassageRef, ...]
    matrix: np.ndarray
    provider_id: str
    model_name: str

    @classmethod
    def build(
        cls,
        corpus: Corpus,
        provider: EmbeddingProvider,
        cache_path: Path | str | None = None,
    ) -> "VectorStore":
        """Embed the corpus, reusing a binary sidecar cache when present.

        The sidecar is keyed by provider id and model name in its file
        name and by passage key inside, so switching models or corpora
        never reuses stale vectors.
        """
        if len(corpus) == 0:
            raise ValueError("cannot build a vector store over an empty corpus")
        refs = tuple(corpus.refs())
        keys = tuple(ref.key for ref in refs)
        cached: dict[str, np.ndarray] = {}
        sidecar: Path | None = None
        if cache_path is not None:
            cache_dir = Path(cache_path)
            cache_dir.mkdir(parents=True, exist_ok=True)
            safe = f"{provider.provider_id}__{provider.model_name}".replace("/", "_")
            sidecar = cache_dir / f"embeddings__{safe}.npz"
            if sidecar.exists():
                with np.load(sidecar) as payload:
                    cached = {name: payload[name] for name in payload.files}
        missing = [i for i, key in enumerate(keys) if key not in cached]
        if missing:
            texts = [corpus.get(refs[i]).text for i in missing]
            try:
                fresh = provider.embed(texts)
            except Exception as exc:
                raise ProviderError(
                    f"embedding corpus failed ({provider.provider_id}): {exc}"
                ) from exc
            if fresh.shape[0] != len(missing):
                raise ProviderError(
                    f"embedding provider returned {fresh.shape[0]} vectors for "
                    f"{len(missing)} passages"
                )
            for row, i in enumerate(missing):
                cached[keys[i]] = np.asarray(fresh[row], dtype=np.float64)
            if sidecar is not None:
                np.savez(sidecar, **cached)
        matrix = np.vstack([cached[key] for key in keys]).astype(np.float64)
        return cls(
            keys=keys,
            refs=refs,
            matrix=matrix,
            provider_id=provider.provider_id,
            model_name=provider.model_name,
        )

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


def cosine_scores(store: VectorStore, query_vector: np.ndarray) -> np.ndarray:
    """Raw cosine similarity of the query against every stored vector."""
    query_vector = np.asarray(query_vector, dtype=np.float64)
    if query_vector.ndim != 1 or query_vector.shape[0] != store.dim:
        raise ValueError(
            f"query vector has dimension {query_vector.shape}, store expects {store.dim}"
        )
    qnorm = float(np.linalg.norm(query_vector))
    row_norms = np.linalg.norm(store.matrix, axis=1)
    dots = store.matrix @ query_vector
    denom = row_norms * qnorm
    out = np.zeros(len(dots), dtype=np.float64)
    nonzero = denom > 0
    out[nonzero] = dots[nonzero] / denom[nonzero]
    return out


def dense_search(
    provider: EmbeddingProvider,
    store: VectorStore,
    query: str,
    k: int,
) -> list[ScoredPassage]:
    """Top-k passages by cosine similarity between query and passages."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    try:
        query_vector = provider.embed([query])[0]
    except Exception as exc:
        raise ProviderError(
            f"embedding query {query!r} failed ({provider.provider_id}): {exc}"
        ) from exc
    scores = cosine_scores(store, query_vector)
    order = sorted(range(len(store.keys)), key=lambda i: (-scores[i], store.keys[i]))
    top = order[: min(k, len(store.keys))]
    return [
        ScoredPassage(
            ref=store.refs[i],
            raw_score=float(scores[i]),
            normalized_score=None,
            rank=rank,
        )
        for rank, i in enumerate(top, 1)
    ]


@dataclass(frozen=True)
class RetrievalConfig:
    """Everything the retrieval cascade needs besides providers."""

    bm25: Bm25Params = Bm25Params()
    weights: FusionWeights = FusionWeights()
    rerank_depth: RerankDepth = RerankDepth()
    pool_size: int = 100
    k: int = 10

    def __post_init__(self) -> None:
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


class RetrievalPipeline:
    """BM25 + two dense retrievers -> normalize -> fuse -> rerank -> top-k."""

    def __init__(
        self,
        corpus: Corpus,
        embedding_a: EmbeddingProvider,
        embedding_b: EmbeddingProvider,
        reranker: RerankProvider,
        config: RetrievalConfig = RetrievalConfig(),
        cache_path: Path | str | None = None,
    ) -> None:
        self.corpus = corpus
        self.config = config
        self.reranker = reranker
        self.embedding_a = embedding_a
        self.embedding_b = embedding_b
        self.index: Bm25Index = build_bm25_index(corpus, config.bm25)
        self.store_a = VectorStore.build(corpus, embedding_a, cache_path)
        self.store_b = VectorStore.build(corpus, embedding_b, cache_path)

    def component_lists(
        self, query: str
    ) -> tuple[list[ScoredPassage], list[ScoredPassage], list[ScoredPassage]]:
        """The three normalized per-retriever candidate lists for a query."""
        pool = self.config.pool_size
        lex = normalize_scores(bm25_search(self.index, query, pool))
        den_a = normalize_scores(
            dense_search(self.embedding_a, self.store_a, query, pool)
        )
        den_b = normalize_scores(
            dense_search(self.embedding_b, self.store_b, query, pool)
        )
        return lex, den_a, den_b

    def finish(
        self,
        query: str,
        components: tuple[
            list[ScoredPassage], list[ScoredPassage], list[ScoredPassage]
        ],
        weights: FusionWeights | None = None,
        depth: RerankDepth | None = None,
        k: int | None = None,
    ) -> list[ScoredPassage]:
        """Fuse, rerank, truncate, and re-normalize for the downstream filter."""
        weights = weights if weights is not None else self.config.weights
        depth = depth if depth is not None else self.config.rerank_depth
        k = k if k is not None else self.config.k
        fused = fuse(*components, weights=weights, k=max(depth.n, k))
        reranked = rerank(self.reranker, query, fused, depth, k, self.corpus)
        final = normalize_scores(reranked)
        return [replace(sp, rank=rank) for rank, sp in enumerate(final, 1)]

    def run(self, query: str) -> list[ScoredPassage]:
        return self.finish(query, self.component_lists(query))


def retrieve_all(
    pipeline: RetrievalPipeline,
    questions: Sequence[Question],
    tag: str,
    max_in_flight: int = 1,
) -> RetrievalRun:
    """Run the cascade for every question into a tagged run.

    Questions are independent, so ``max_in_flight`` > 1 evaluates them
    on a thread pool; results are collected in question order either
    way.
    """
    run = RetrievalRun(tag=tag)
    if max_in_flight > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            ranked_lists = list(
                pool.map(lambda q: pipeline.run(q.text), questions)
            )
    else:
        ranked_lists = [pipeline.run(q.text) for q in questions]
    for question, ranked in zip(questions, ranked_lists):
        run.add(question.question_id, scored_to_entries(ranked))
    return run
