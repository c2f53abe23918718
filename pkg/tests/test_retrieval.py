import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from regqa.corpus import Corpus, Passage, PassageRef, Question, ScoredPassage
from regqa.errors import ProviderError
from regqa.providers import HashEmbedding, IdentityRerank, ReversingRerank
from regqa.retrieval import (
    FusionWeights,
    RerankDepth,
    RetrievalConfig,
    RetrievalPipeline,
    VectorStore,
    cosine_scores,
    dense_search,
    fuse,
    normalize_scores,
    rerank,
    retrieve_all,
)


def _sp(key, raw, normalized=None, rank=1):
    return ScoredPassage(
        ref=PassageRef.from_key(key),
        raw_score=raw,
        normalized_score=normalized,
        rank=rank,
    )


def test_fusion_weights_validation():
    FusionWeights(0.25, 0.20)
    assert FusionWeights(0.25, 0.20).c == pytest.approx(0.55)
    with pytest.raises(ValueError):
        FusionWeights(0.8, 0.3)
    with pytest.raises(ValueError):
        FusionWeights(-0.1, 0.2)


def test_normalize_scores_maps_to_unit_interval():
    out = normalize_scores([_sp("D#1", 4.0), _sp("D#2", 2.0), _sp("D#3", 0.0)])
    assert [sp.normalized_score for sp in out] == [1.0, 0.5, 0.0]
    assert [sp.ref.key for sp in out] == ["D#1", "D#2", "D#3"]


def test_normalize_scores_all_equal_become_one():
    out = normalize_scores([_sp("D#1", 3.0), _sp("D#2", 3.0)])
    assert [sp.normalized_score for sp in out] == [1.0, 1.0]


def test_normalize_scores_empty_rejected():
    with pytest.raises(ValueError):
        normalize_scores([])


def test_fuse_hand_computed_values():
    run_x = [_sp("D#1", 1.0, 1.0), _sp("D#2", 0.5, 0.5)]
    run_y = [_sp("D#2", 1.0, 1.0)]
    run_z = [_sp("D#3", 1.0, 1.0), _sp("D#1", 0.4, 0.4)]
    out = fuse(run_x, run_y, run_z, FusionWeights(0.25, 0.20), k=10)
    by_key = {sp.ref.key: sp.raw_score for sp in out}
    assert by_key["D#1"] == pytest.approx(0.25 * 1.0 + 0.20 * 0.0 + 0.55 * 0.4)
    assert by_key["D#2"] == pytest.approx(0.25 * 0.5 + 0.20 * 1.0 + 0.55 * 0.0)
    assert by_key["D#3"] == pytest.approx(0.55 * 1.0)
    assert [sp.rank for sp in out] == [1, 2, 3]


def test_fuse_ties_break_by_passage_key():
    run_x = [_sp("D#b", 1.0, 1.0), _sp("D#a", 1.0, 1.0)]
    out = fuse(run_x, [], [], FusionWeights(1.0, 0.0), k=2)
    assert [sp.ref.key for sp in out] == ["D#a", "D#b"]


def test_fuse_degenerate_weights_reduce_to_single_retriever():
    run_x = [_sp("D#1", 1.0, 1.0), _sp("D#2", 0.7, 0.7), _sp("D#3", 0.1, 0.1)]
    run_y = [_sp("D#3", 1.0, 1.0), _sp("D#1", 0.2, 0.2)]
    out_x = fuse(run_x, run_y, [], FusionWeights(1.0, 0.0), k=10)
    assert [sp.ref.key for sp in out_x][:3] == ["D#1", "D#2", "D#3"]
    out_y = fuse(run_x, run_y, [], FusionWeights(0.0, 1.0), k=10)
    assert [sp.ref.key for sp in out_y][:2] == ["D#3", "D#1"]


def test_fuse_requires_normalized_inputs():
    with pytest.raises(ValueError, match="retriever y.*D#1"):
        fuse([], [_sp("D#1", 1.0, None)], [], FusionWeights(0.25, 0.20), k=5)


def test_fuse_truncates_to_k():
    run = [_sp(f"D#{i}", 1.0 - i / 10, 1.0 - i / 10) for i in range(5)]
    out = fuse(run, [], [], FusionWeights(1.0, 0.0), k=2)
    assert len(out) == 2


@given(
    st.lists(
        st.tuples(st.integers(0, 30), st.floats(0.0, 1.0)),
        min_size=1,
        max_size=20,
        unique_by=lambda t: t[0],
    ),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_fuse_scores_stay_in_unit_interval(items, a, b):
    if a + b > 1.0:
        a, b = a / 2, b / 2
    run = [_sp(f"D#{i}", s, s) for i, s in items]
    out = fuse(run, run, run, FusionWeights(a, b), k=50)
    for sp in out:
        assert -1e-9 <= sp.raw_score <= 1.0 + 1e-9


def _corpus3():
    return Corpus(
        [
            Passage("D", "1", "first passage text"),
            Passage("D", "2", "second passage text"),
            Passage("D", "3", "third passage text"),
        ]
    )


def test_rerank_identity_preserves_order_and_truncates():
    candidates = [
        _sp("D#1", 0.9, 0.9, 1),
        _sp("D#2", 0.5, 0.5, 2),
        _sp("D#3", 0.1, 0.1, 3),
    ]
    out = rerank(
        IdentityRerank(), "q", candidates, RerankDepth(3), k=2, corpus=_corpus3()
    )
    assert [sp.ref.key for sp in out] == ["D#1", "D#2"]
    assert [sp.rank for sp in out] == [1, 2]
    assert [sp.normalized_score for sp in out] == [0.9, 0.5]


def test_rerank_reverses_head_and_keeps_tail_order():
    candidates = [
        _sp("D#1", 0.9, 0.9, 1),
        _sp("D#2", 0.5, 0.5, 2),
        _sp("D#3", 0.1, 0.1, 3),
    ]
    out = rerank(
        ReversingRerank(), "q", candidates, RerankDepth(2), k=3, corpus=_corpus3()
    )
    # Positional scores [0, 1] flip the head; the tail block follows unchanged.
    assert [sp.ref.key for sp in out] == ["D#2", "D#1", "D#3"]
    assert out[2].raw_score == 0.1


def test_rerank_score_count_mismatch_raises():
    class Broken:
        provider_id = "broken"
        model_name = "broken"

        def rerank_scores(self, query, passages, prior_scores=None):
            return [1.0]

    candidates = [_sp("D#1", 0.9, 0.9, 1), _sp("D#2", 0.5, 0.5, 2)]
    with pytest.raises(ProviderError, match="2 passages"):
        rerank(Broken(), "q", candidates, RerankDepth(2), k=2, corpus=_corpus3())


def test_rerank_wraps_provider_failures():
    class Exploding:
        provider_id = "exploding"
        model_name = "exploding"

        def rerank_scores(self, query, passages, prior_scores=None):
            raise RuntimeError("boom")

    candidates = [_sp("D#1", 0.9, 0.9, 1)]
    with pytest.raises(ProviderError, match="q"):
        rerank(Exploding(), "q", candidates, RerankDepth(1), k=1, corpus=_corpus3())


def test_cosine_scores_zero_rows_score_zero():
    store = VectorStore(
        keys=("D#1", "D#2"),
        refs=(PassageRef("D", "1"), PassageRef("D", "2")),
        matrix=np.array([[1.0, 0.0], [0.0, 0.0]]),
        provider_id="p",
        model_name="m",
    )
    scores = cosine_scores(store, np.array([1.0, 0.0]))
    assert scores[0] == pytest.approx(1.0)
    assert scores[1] == 0.0
    with pytest.raises(ValueError):
        cosine_scores(store, np.array([1.0, 0.0, 0.0]))


class CountingEmbedding(HashEmbedding):
    def __init__(self, seed=0):
        super().__init__(seed=seed)
        self.embed_calls = 0
        self.texts_embedded = 0

    def embed(self, texts):
        self.embed_calls += 1
        self.texts_embedded += len(texts)
        return super().embed(texts)


def test_vector_store_sidecar_skips_reembedding(tmp_path):
    corpus = _corpus3()
    provider = CountingEmbedding(seed=4)
    store = VectorStore.build(corpus, provider, cache_path=tmp_path)
    assert provider.texts_embedded == 3
    again = VectorStore.build(corpus, provider, cache_path=tmp_path)
    assert provider.texts_embedded == 3
    np.testing.assert_allclose(store.matrix, again.matrix)


def test_dense_search_ranks_by_cosine():
    corpus = _corpus3()
    provider = HashEmbedding(seed=4)
    store = VectorStore.build(corpus, provider)
    out = dense_search(provider, store, "first passage text", k=3)
    assert out[0].ref.key == "D#1"
    assert out[0].raw_score == pytest.approx(1.0)
    assert [sp.rank for sp in out] == [1, 2, 3]


def test_pipeline_run_equals_component_then_finish(tiny_corpus):
    pipeline = RetrievalPipeline(
        tiny_corpus, HashEmbedding(11), HashEmbedding(23), IdentityRerank()
    )
    query = "banks submit quarterly reports"
    direct = pipeline.run(query)
    staged = pipeline.finish(query, pipeline.component_lists(query))
    assert direct == staged


def test_pipeline_output_is_renormalized(tiny_corpus):
    pipeline = RetrievalPipeline(
        tiny_corpus, HashEmbedding(11), HashEmbedding(23), IdentityRerank()
    )
    out = pipeline.run("banks submit quarterly reports")
    assert out[0].normalized_score == 1.0
    assert out[-1].normalized_score == 0.0
    assert all(0.0 <= sp.normalized_score <= 1.0 for sp in out)


def test_pipeline_respects_k(tiny_corpus):
    config = RetrievalConfig(k=2)
    pipeline = RetrievalPipeline(
        tiny_corpus, HashEmbedding(11), HashEmbedding(23), IdentityRerank(), config
    )
    assert len(pipeline.run("banks")) == 2


def test_retrieve_all_parallel_matches_sequential(tiny_corpus, tiny_questions):
    pipeline = RetrievalPipeline(
        tiny_corpus, HashEmbedding(11), HashEmbedding(23), IdentityRerank()
    )
    sequential = retrieve_all(pipeline, list(tiny_questions), "t", max_in_flight=1)
    parallel = retrieve_all(pipeline, list(tiny_questions), "t", max_in_flight=4)
    assert sequential.results == parallel.results
    assert list(sequential.results) == [q.question_id for q in tiny_questions]


def test_retrieve_all_rejects_duplicate_questions(tiny_corpus):
    pipeline = RetrievalPipeline(
        tiny_corpus, HashEmbedding(11), HashEmbedding(23), IdentityRerank()
    )
    questions = [Question("Q1", "banks?"), Question("Q1", "banks again?")]
    with pytest.raises(ValueError):
        retrieve_all(pipeline, questions, "t")
