import json

import httpx
import numpy as np
import pytest

from regqa.errors import ConfigError, ProviderError, ScriptExhaustedError
from regqa.providers import (
    CachedEmbedding,
    CachedNli,
    EchoLlm,
    HashEmbedding,
    IdentityNli,
    IdentityRerank,
    KeywordObligationClassifier,
    MockKind,
    MockSpec,
    NegationNli,
    NliScores,
    ProviderConfig,
    RemoteChat,
    RemoteEmbedding,
    RemoteNli,
    RemoteReranker,
    ReversingRerank,
    ScoreCache,
    ScriptEntry,
    ScriptedLlm,
    make_mock,
    validate_nli_scores,
)


def test_nli_scores_bounds():
    NliScores(0.5, 0.25, 0.25)
    with pytest.raises(ValueError):
        NliScores(1.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        NliScores(0.5, -0.1, 0.6)


def test_validate_nli_scores_normalized_sum():
    validate_nli_scores([NliScores(0.5, 0.25, 0.25)], normalized=True)
    validate_nli_scores([NliScores(0.9, 0.9, 0.9)], normalized=False)
    with pytest.raises(ProviderError):
        validate_nli_scores([NliScores(0.9, 0.9, 0.9)], normalized=True)


def test_identity_nli_exact_match_entails():
    nli = IdentityNli()
    (scores,) = nli.nli_batch([("Banks must  report.", "Banks must report.")])
    assert scores.as_tuple() == (1.0, 0.0, 0.0)


def test_identity_nli_disjoint_is_neutral():
    nli = IdentityNli()
    (scores,) = nli.nli_batch([("alpha beta", "gamma delta")])
    assert scores.as_tuple() == (0.0, 0.0, 1.0)


def test_identity_nli_token_subset_entails():
    nli = IdentityNli()
    (scores,) = nli.nli_batch(
        [("Banks must report to the supervisor yearly.", "banks report yearly")]
    )
    assert scores.entail == 1.0
    assert scores.contradict == 0.0


def test_identity_nli_partial_overlap_and_no_contradiction():
    nli = IdentityNli()
    (scores,) = nli.nli_batch([("alpha beta", "alpha gamma")])
    assert scores.entail == pytest.approx(0.5)
    assert scores.contradict == 0.0
    assert scores.neutral == pytest.approx(0.5)


def test_negation_nli_detects_not_prefix():
    nli = NegationNli()
    pairs = [
        ("Banks must report.", "NOT Banks must report."),
        ("NOT Banks must report.", "Banks must report."),
    ]
    for scores in nli.nli_batch(pairs):
        assert scores.contradict == 1.0


def test_keyword_classifier_detects_modal_tokens():
    clf = KeywordObligationClassifier()
    labels = clf.classify_obligations(
        [
            "Banks must report.",
            "The board shall review.",
            "Mustard is a condiment.",
            "Background text only.",
        ]
    )
    assert labels == [(True, 1.0), (True, 1.0), (False, 0.0), (False, 0.0)]


def test_echo_llm_returns_user_content():
    llm = EchoLlm()
    assert llm.chat("system", "user words") == "user words"
    with pytest.raises(ProviderError):
        llm.chat("system", "   ")


def test_scripted_llm_consumes_in_order():
    llm = ScriptedLlm(["first", "second"])
    assert llm.chat("s", "u") == "first"
    assert llm.chat("s", "u") == "second"
    assert llm.calls == 2
    with pytest.raises(ScriptExhaustedError):
        llm.chat("s", "u")


def test_scripted_llm_match_pins_entries():
    llm = ScriptedLlm(
        [
            ScriptEntry("about beta", match="beta"),
            ScriptEntry("about alpha", match="alpha"),
        ]
    )
    assert llm.chat("s", "question on alpha") == "about alpha"
    assert llm.chat("s", "question on beta") == "about beta"
    with pytest.raises(ScriptExhaustedError):
        llm.chat("s", "question on alpha")


def test_scripted_llm_from_path(tmp_path):
    path = tmp_path / "script.jsonl"
    path.write_text(
        json.dumps("plain response")
        + "\n"
        + json.dumps({"response": "pinned", "match": "needle"})
        + "\n"
    )
    llm = ScriptedLlm.from_path(path)
    assert llm.chat("s", "anything") == "plain response"
    assert llm.chat("s", "find the needle here") == "pinned"


def test_scripted_llm_from_path_rejects_bad_entry(tmp_path):
    path = tmp_path / "script.jsonl"
    path.write_text('{"reply": "missing response key"}\n')
    with pytest.raises(ConfigError, match="response"):
        ScriptedLlm.from_path(path)


def test_hash_embedding_is_deterministic_and_unit_norm():
    emb_a = HashEmbedding(seed=11)
    emb_b = HashEmbedding(seed=11)
    first = emb_a.embed(["banks must report"])
    second = emb_b.embed(["banks must report"])
    np.testing.assert_array_equal(first, second)
    assert np.linalg.norm(first[0]) == pytest.approx(1.0)


def test_hash_embedding_seeds_differ():
    a = HashEmbedding(seed=11).embed(["banks must report"])[0]
    b = HashEmbedding(seed=23).embed(["banks must report"])[0]
    assert not np.allclose(a, b)


def test_hash_embedding_is_a_token_bag():
    emb = HashEmbedding(seed=5)
    forward, backward = emb.embed(["alpha beta", "beta alpha"])
    np.testing.assert_allclose(forward, backward)


def test_hash_embedding_empty_text_is_zero():
    emb = HashEmbedding(seed=5)
    row = emb.embed(["!!!"])[0]
    np.testing.assert_array_equal(row, np.zeros(emb.dim))


def test_hash_embedding_rejects_tiny_dim():
    with pytest.raises(ValueError):
        HashEmbedding(dim=1)


def test_identity_rerank_returns_priors():
    rr = IdentityRerank()
    assert rr.rerank_scores("q", ["a", "b"], [0.7, 0.3]) == [0.7, 0.3]
    with pytest.raises(ValueError):
        rr.rerank_scores("q", ["a", "b"], None)
    with pytest.raises(ValueError):
        rr.rerank_scores("q", ["a", "b"], [0.7])


def test_reversing_rerank_scores_by_position():
    rr = ReversingRerank()
    assert rr.rerank_scores("q", ["a", "b", "c"]) == [0.0, 1.0, 2.0]


def test_make_mock_builds_every_kind():
    built = {
        kind: make_mock(MockSpec(kind), script=["canned"])
        for kind in MockKind
    }
    assert isinstance(built[MockKind.HASH_EMBEDDING], HashEmbedding)
    assert isinstance(built[MockKind.IDENTITY_NLI], IdentityNli)
    assert isinstance(built[MockKind.NEGATION_NLI], NegationNli)
    assert isinstance(
        built[MockKind.KEYWORD_OBLIGATION], KeywordObligationClassifier
    )
    assert isinstance(built[MockKind.ECHO_LLM], EchoLlm)
    assert isinstance(built[MockKind.SCRIPTED_LLM], ScriptedLlm)
    assert isinstance(built[MockKind.IDENTITY_RERANK], IdentityRerank)
    assert isinstance(built[MockKind.REVERSING_RERANK], ReversingRerank)


def test_make_mock_scripted_requires_script():
    with pytest.raises(ConfigError):
        make_mock(MockSpec(MockKind.SCRIPTED_LLM))


class CountingNli(IdentityNli):
    def __init__(self):
        super().__init__()
        self.batches = 0
        self.pairs_scored = 0

    def nli_batch(self, pairs):
        self.batches += 1
        self.pairs_scored += len(pairs)
        return super().nli_batch(pairs)


def test_cached_nli_returns_inner_values_and_skips_repeats(tmp_path):
    inner = CountingNli()
    cached = CachedNli(inner, ScoreCache(tmp_path))
    pairs = [("a b", "a b"), ("a b", "c d")]
    first = [s.as_tuple() for s in cached.nli_batch(pairs)]
    second = [s.as_tuple() for s in cached.nli_batch(pairs)]
    assert first == second == [s.as_tuple() for s in IdentityNli().nli_batch(pairs)]
    assert inner.pairs_scored == 2


def test_score_cache_persists_across_instances(tmp_path):
    inner = CountingNli()
    CachedNli(inner, ScoreCache(tmp_path)).nli_batch([("x y", "x y")])
    reloaded = CachedNli(inner, ScoreCache(tmp_path))
    reloaded.nli_batch([("x y", "x y")])
    assert inner.pairs_scored == 1


def test_cached_nli_mixed_hit_miss_alignment(tmp_path):
    inner = CountingNli()
    cache = ScoreCache(tmp_path)
    cached = CachedNli(inner, cache)
    cached.nli_batch([("a b", "a b")])
    out = cached.nli_batch([("fresh pair", "zz"), ("a b", "a b")])
    assert out[1].entail == 1.0
    assert inner.pairs_scored == 2


def test_cached_embedding_matches_inner(tmp_path):
    inner = HashEmbedding(seed=3)
    cached = CachedEmbedding(HashEmbedding(seed=3), ScoreCache(tmp_path))
    texts = ["one two", "three"]
    np.testing.assert_allclose(cached.embed(texts), inner.embed(texts))
    np.testing.assert_allclose(cached.embed(texts), inner.embed(texts))


# ---------------------------------------------------------------------------
# Remote adapters against a mock transport
# ---------------------------------------------------------------------------


def _config(**overrides):
    base = dict(
        provider_id="remote-test",
        endpoint="https://api.example.test/v1",
        model_name="model-x",
        retry_backoff=0.0,
    )
    base.update(overrides)
    return ProviderConfig(**base)


def test_remote_embedding_happy_path():
    def handler(request):
        payload = json.loads(request.content)
        assert payload["model"] == "model-x"
        data = [
            {"embedding": [float(i), 0.0]} for i, _ in enumerate(payload["input"])
        ]
        return httpx.Response(200, json={"data": data})

    provider = RemoteEmbedding(_config(), transport=httpx.MockTransport(handler))
    out = provider.embed(["a", "b", "c"])
    assert out.shape == (3, 2)
    assert out[2][0] == 2.0


def test_remote_embedding_batches_requests():
    calls = []

    def handler(request):
        payload = json.loads(request.content)
        calls.append(len(payload["input"]))
        return httpx.Response(
            200, json={"data": [{"embedding": [1.0]} for _ in payload["input"]]}
        )

    provider = RemoteEmbedding(
        _config(batch_size=2), transport=httpx.MockTransport(handler)
    )
    provider.embed(["a", "b", "c"])
    assert calls == [2, 1]


def test_remote_auth_header_and_missing_env(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("Authorization")
        return httpx.Response(200, json={"data": [{"embedding": [1.0]}]})

    provider = RemoteEmbedding(
        _config(auth_ref="REGQA_TEST_KEY"), transport=httpx.MockTransport(handler)
    )
    monkeypatch.delenv("REGQA_TEST_KEY", raising=False)
    with pytest.raises(ProviderError, match="REGQA_TEST_KEY"):
        provider.embed(["a"])
    monkeypatch.setenv("REGQA_TEST_KEY", "sekrit")
    provider.embed(["a"])
    assert seen["auth"] == "Bearer sekrit"


def test_remote_retries_server_errors_then_succeeds():
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) < 3:
            return httpx.Response(503, text="busy")
        return httpx.Response(200, json={"data": [{"embedding": [1.0]}]})

    provider = RemoteEmbedding(
        _config(max_retries=3), transport=httpx.MockTransport(handler)
    )
    provider.embed(["a"])
    assert len(attempts) == 3


def test_remote_client_error_fails_without_retry():
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(400, text="bad request")

    provider = RemoteEmbedding(
        _config(max_retries=3), transport=httpx.MockTransport(handler)
    )
    with pytest.raises(ProviderError, match="400"):
        provider.embed(["a"])
    assert len(attempts) == 1


def test_remote_exhausted_retries_raise():
    def handler(request):
        return httpx.Response(500, text="down")

    provider = RemoteEmbedding(
        _config(max_retries=1), transport=httpx.MockTransport(handler)
    )
    with pytest.raises(ProviderError, match="attempts"):
        provider.embed(["a"])


def test_remote_reranker_aligns_by_index():
    def handler(request):
        return httpx.Response(
            200,
            json={
                "results": [
                    {"index": 1, "relevance_score": 0.9},
                    {"index": 0, "relevance_score": 0.1},
                ]
            },
        )

    provider = RemoteReranker(_config(), transport=httpx.MockTransport(handler))
    assert provider.rerank_scores("q", ["a", "b"]) == [0.1, 0.9]


def test_remote_reranker_rejects_missing_documents():
    def handler(request):
        return httpx.Response(
            200, json={"results": [{"index": 0, "relevance_score": 0.5}]}
        )

    provider = RemoteReranker(_config(), transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderError, match="missing"):
        provider.rerank_scores("q", ["a", "b"])


def test_remote_nli_parses_and_validates_sum():
    def handler(request):
        payload = json.loads(request.content)
        n = len(payload["pairs"])
        return httpx.Response(
            200,
            json={
                "scores": [
                    {"entailment": 0.7, "contradiction": 0.2, "neutral": 0.1}
                ]
                * n
            },
        )

    provider = RemoteNli(_config(), transport=httpx.MockTransport(handler))
    (scores,) = provider.nli_batch([("p", "h")])
    assert scores.as_tuple() == (0.7, 0.2, 0.1)


def test_remote_chat_reads_completion_and_rejects_empty():
    def handler(request):
        payload = json.loads(request.content)
        text = "" if "empty" in payload["messages"][1]["content"] else "fine"
        return httpx.Response(
            200, json={"choices": [{"message": {"content": text}}]}
        )

    provider = RemoteChat(_config(), transport=httpx.MockTransport(handler))
    assert provider.chat("sys", "say something") == "fine"
    with pytest.raises(ProviderError):
        provider.chat("sys", "empty please")


def test_remote_truncates_long_texts():
    seen = {}

    def handler(request):
        payload = json.loads(request.content)
        seen["lengths"] = [len(t) for t in payload["input"]]
        return httpx.Response(
            200, json={"data": [{"embedding": [1.0]} for _ in payload["input"]]}
        )

    provider = RemoteEmbedding(
        _config(max_text_chars=5), transport=httpx.MockTransport(handler)
    )
    provider.embed(["abcdefghij", "ok"])
    assert seen["lengths"] == [5, 2]
