"""Model provider contracts, deterministic mocks, and remote adapters.

Every external model (embeddings, reranker, NLI scorers, obligation
classifier, chat LLM) sits behind one of the small interfaces below, so
the pipeline logic never knows whether it is talking to a remote
endpoint or to an offline mock. Mocks are pure functions of
(kind, seed, input) and are the basis of every offline test.

Batch calls must return one result per input in input order; that
alignment is the load-bearing invariant of this module.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import httpx
import numpy as np

from .errors import ConfigError, ProviderError, ScriptExhaustedError
from .text import collapse_whitespace, tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NliScores:
    """Entailment, contradiction, and neutral probabilities for one pair."""

    entail: float
    contradict: float
    neutral: float

    def __post_init__(self) -> None:
        for name, value in (
            ("entail", self.entail),
            ("contradict", self.contradict),
            ("neutral", self.neutral),
        ):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} score {value} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.entail, self.contradict, self.neutral)


def validate_nli_scores(
    scores: Sequence[NliScores], normalized: bool, tol: float = 1e-6
) -> None:
    """Check the sum-to-one constraint for providers that declare it."""
    if not normalized:
        return
    for s in scores:
        total = s.entail + s.contradict + s.neutral
        if abs(total - 1.0) > tol:
            raise ProviderError(
                f"provider declared normalized scores but entail+contradict+neutral={total}"
            )


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for a remote provider.

    ``auth_ref`` names an environment variable holding the credential;
    the credential itself is never stored or serialized.
    """

    provider_id: str
    endpoint: str
    model_name: str
    auth_ref: str | None = None
    timeout: float = 30.0
    max_retries: int = 3
    batch_size: int = 32
    retry_backoff: float = 0.5
    max_text_chars: int | None = None

    def __post_init__(self) -> None:
        if not self.provider_id:
            raise ValueError("provider_id must be non-empty")
        if not self.endpoint:
            raise ValueError("endpoint must be non-empty")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class MockKind(Enum):
    """The deterministic offline provider behaviours."""

    IDENTITY_NLI = "IDENTITY_NLI"
    NEGATION_NLI = "NEGATION_NLI"
    KEYWORD_OBLIGATION = "KEYWORD_OBLIGATION"
    ECHO_LLM = "ECHO_LLM"
    SCRIPTED_LLM = "SCRIPTED_LLM"
    HASH_EMBEDDING = "HASH_EMBEDDING"
    IDENTITY_RERANK = "IDENTITY_RERANK"
    REVERSING_RERANK = "REVERSING_RERANK"


@dataclass(frozen=True)
class MockSpec:
    """Which mock to build and the seed that parameterizes it."""

    kind: MockKind
    seed: int = 0


# ---------------------------------------------------------------------------
# Interfaces
# ---------------------------------------------------------------------------


class EmbeddingProvider:
    """Maps texts to fixed-dimension vectors."""

    provider_id: str = "embedding"
    model_name: str = "unknown"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError


class RerankProvider:
    """Scores passages for relevance to a query.

    ``prior_scores`` carries the candidates' current scores so that
    score-preserving mocks can exist; remote rerankers ignore it.
    """

    provider_id: str = "rerank"
    model_name: str = "unknown"

    def rerank_scores(
        self,
        query: str,
        passages: Sequence[str],
        prior_scores: Sequence[float] | None = None,
    ) -> list[float]:
        raise NotImplementedError


class NliProvider:
    """Scores (premise, hypothesis) pairs."""

    provider_id: str = "nli"
    model_name: str = "unknown"
    normalized: bool = True

    def nli_batch(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        raise NotImplementedError


class ObligationClassifier:
    """Labels sentences as obligations with a confidence."""

    provider_id: str = "obligation"
    model_name: str = "unknown"

    def classify_obligations(
        self, sentences: Sequence[str]
    ) -> list[tuple[bool, float]]:
        raise NotImplementedError


class ChatProvider:
    """Produces a completion for a (system, user) prompt pair."""

    provider_id: str = "chat"
    model_name: str = "unknown"

    def chat(
        self,
        system_prompt: str,
        user_content: str,
        temperature: float = 0.0,
        seed: int | None = None,
    ) -> str:
        raise NotImplementedError


@dataclass
class ProviderBundle:
    """All provider slots the pipeline can consume.

    ``coverage_nli`` may differ from ``nli`` because obligation coverage
    and pair scoring are distinct model slots; when only one is
    configured the same provider fills both.
    """

    embedding_a: EmbeddingProvider
    embedding_b: EmbeddingProvider
    reranker: RerankProvider
    nli: NliProvider
    coverage_nli: NliProvider
    obligation_classifier: ObligationClassifier
    llm: ChatProvider


# ---------------------------------------------------------------------------
# Mocks
# ---------------------------------------------------------------------------


class HashEmbedding(EmbeddingProvider):
    """Deterministic bag-of-token-direction embeddings.

    Each token maps to a pseudo-random unit direction derived from
    sha256(seed, token); a text embeds as the L2-normalized sum of its
    token directions. Identical texts therefore embed identically, and
    texts sharing tokens have higher cosine similarity.
    """

    def __init__(self, seed: int = 0, dim: int = 64) -> None:
        if dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        self.seed = seed
        self.dim = dim
        self.provider_id = "mock-hash-embedding"
        self.model_name = f"hash-{seed}-{dim}"
        self._directions: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _direction(self, token: str) -> np.ndarray:
        with self._lock:
            cached = self._directions.get(token)
        if cached is not None:
            return cached
        digest = hashlib.sha256(f"{self.seed}\x00{token}".encode("utf-8")).digest()
        rng = np.random.Generator(
            np.random.PCG64(int.from_bytes(digest[:16], "big"))
        )
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        with self._lock:
            self._directions[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed requires at least one text")
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = tokenize(text)
            if not tokens:
                continue
            vec = np.zeros(self.dim, dtype=np.float64)
            for tok in tokens:
                vec += self._direction(tok)
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out[i] = vec
        return out


class IdentityNli(NliProvider):
    """Token-overlap NLI used to make scoring verifiable by hand.

    Identical texts (after whitespace collapse) entail with probability
    1.0; disjoint token sets are fully neutral; otherwise entailment is
    the fraction of hypothesis tokens present in the premise. The mock
    never emits contradiction.
    """

    provider_id = "mock-identity-nli"
    model_name = "identity"
    normalized = True

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def _score_pair(self, premise: str, hypothesis: str) -> NliScores:
        if collapse_whitespace(premise) == collapse_whitespace(hypothesis):
            return NliScores(1.0, 0.0, 0.0)
        premise_tokens = set(tokenize(premise))
        hypothesis_tokens = set(tokenize(hypothesis))
        if not premise_tokens or not hypothesis_tokens:
            return NliScores(0.0, 0.0, 1.0)
        overlap = len(premise_tokens & hypothesis_tokens) / len(hypothesis_tokens)
        return NliScores(overlap, 0.0, 1.0 - overlap)

    def nli_batch(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        return [self._score_pair(p, h) for p, h in pairs]


class NegationNli(IdentityNli):
    """Identity NLI plus a negation rule: "NOT " + text contradicts text."""

    provider_id = "mock-negation-nli"
    model_name = "negation"

    def _score_pair(self, premise: str, hypothesis: str) -> NliScores:
        p = collapse_whitespace(premise)
        h = collapse_whitespace(hypothesis)
        if h == f"NOT {p}" or p == f"NOT {h}":
            return NliScores(0.0, 1.0, 0.0)
        return super()._score_pair(premise, hypothesis)


class KeywordObligationClassifier(ObligationClassifier):
    """Marks sentences containing "must" or "shall" as obligations."""

    provider_id = "mock-keyword-obligation"
    model_name = "keyword"
    _KEYWORDS = frozenset({"must", "shall"})

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def classify_obligations(
        self, sentences: Sequence[str]
    ) -> list[tuple[bool, float]]:
        labels = []
        for sentence in sentences:
            hit = bool(self._KEYWORDS & set(tokenize(sentence)))
            labels.append((hit, 1.0 if hit else 0.0))
        return labels


class EchoLlm(ChatProvider):
    """Returns the user content verbatim."""

    provider_id = "mock-echo-llm"
    model_name = "echo"

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def chat(
        self,
        system_prompt: str,
        user_content: str,
        temperature: float = 0.0,
        seed: int | None = None,
    ) -> str:
        if not user_content.strip():
            raise ProviderError("echo chat received empty user content")
        return user_content


@dataclass(frozen=True)
class ScriptEntry:
    """One canned completion, optionally pinned to prompts containing ``match``."""

    response: str
    match: str | None = None

    def __post_init__(self) -> None:
        if not self.response.strip():
            raise ValueError("script entry response must be non-empty")


class ScriptedLlm(ChatProvider):
    """Replays canned completions in order.

    Each call consumes the first unconsumed entry whose ``match`` string
    (if any) occurs in the concatenated prompt; entries without a match
    string accept any prompt. A call that finds no entry raises
    ``ScriptExhaustedError``. A fresh instance with the same script
    replays identically, which makes full pipeline runs reproducible.
    """

    provider_id = "mock-scripted-llm"
    model_name = "scripted"

    def __init__(
        self, script: Iterable[ScriptEntry | str], seed: int = 0
    ) -> None:
        self.seed = seed
        self._entries = [
            entry if isinstance(entry, ScriptEntry) else ScriptEntry(str(entry))
            for entry in script
        ]
        self._consumed = [False] * len(self._entries)
        self._calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_path(cls, path: Path | str, seed: int = 0) -> "ScriptedLlm":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                record = json.loads(line)
                if isinstance(record, str):
                    entries.append(ScriptEntry(record))
                elif isinstance(record, dict) and "response" in record:
                    entries.append(
                        ScriptEntry(str(record["response"]), record.get("match"))
                    )
                else:
                    raise ConfigError(
                        f"{path}:{lineno}: script entry needs a 'response' field"
                    )
        return cls(entries, seed=seed)

    @property
    def calls(self) -> int:
        return self._calls

    def chat(
        self,
        system_prompt: str,
        user_content: str,
        temperature: float = 0.0,
        seed: int | None = None,
    ) -> str:
        prompt = f"{system_prompt}\n{user_content}"
        with self._lock:
            self._calls += 1
            for i, entry in enumerate(self._entries):
                if self._consumed[i]:
                    continue
                if entry.match is None or entry.match in prompt:
                    self._consumed[i] = True
                    return entry.response
        raise ScriptExhaustedError(
            f"scripted chat exhausted after {len(self._entries)} entries "
            f"(call {self._calls} found no matching entry)"
        )


class IdentityRerank(RerankProvider):
    """Returns the supplied prior scores unchanged."""

    provider_id = "mock-identity-rerank"
    model_name = "identity"

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def rerank_scores(
        self,
        query: str,
        passages: Sequence[str],
        prior_scores: Sequence[float] | None = None,
    ) -> list[float]:
        if prior_scores is None:
            raise ValueError("identity reranker requires prior scores")
        if len(prior_scores) != len(passages):
            raise ValueError("prior scores must align with passages")
        return [float(s) for s in prior_scores]


class ReversingRerank(RerankProvider):
    """Scores passages by input position so the order inverts."""

    provider_id = "mock-reversing-rerank"
    model_name = "reversing"

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def rerank_scores(
        self,
        query: str,
        passages: Sequence[str],
        prior_scores: Sequence[float] | None = None,
    ) -> list[float]:
        return [float(i) for i in range(len(passages))]


def make_mock(
    spec: MockSpec,
    dim: int = 64,
    script: Iterable[ScriptEntry | str] | None = None,
    script_path: Path | str | None = None,
):
    """Build the provider for a mock spec."""
    kind = spec.kind
    if kind is MockKind.HASH_EMBEDDING:
        return HashEmbedding(seed=spec.seed, dim=dim)
    if kind is MockKind.IDENTITY_NLI:
        return IdentityNli(seed=spec.seed)
    if kind is MockKind.NEGATION_NLI:
        return NegationNli(seed=spec.seed)
    if kind is MockKind.KEYWORD_OBLIGATION:
        return KeywordObligationClassifier(seed=spec.seed)
    if kind is MockKind.ECHO_LLM:
        return EchoLlm(seed=spec.seed)
    if kind is MockKind.SCRIPTED_LLM:
        if script_path is not None:
            return ScriptedLlm.from_path(script_path, seed=spec.seed)
        if script is not None:
            return ScriptedLlm(script, seed=spec.seed)
        raise ConfigError("scripted chat mock needs a script or script_path")
    if kind is MockKind.IDENTITY_RERANK:
        return IdentityRerank(seed=spec.seed)
    if kind is MockKind.REVERSING_RERANK:
        return ReversingRerank(seed=spec.seed)
    raise ConfigError(f"unknown mock kind {kind!r}")


# ---------------------------------------------------------------------------
# Score cache
# ---------------------------------------------------------------------------


class ScoreCache:
    """Content-addressed cache for provider results.

    Keys are sha256 digests of (provider_id, model_name, operation,
    payload). Entries live in memory and, when a directory is given,
    are appended to a JSON-lines file that is reloaded on construction.
    Reads are lock-free once loaded; writes are serialized.
    """

    def __init__(self, directory: Path | str | None = None) -> None:
        self._mem: dict[str, object] = {}
        self._lock = threading.Lock()
        self._path: Path | None = None
        if directory is not None:
            directory = Path(directory)
            directory.mkdir(parents=True, exist_ok=True)
            self._path = directory / "score_cache.jsonl"
            if self._path.exists():
                with open(self._path, encoding="utf-8") as fh:
                    for line in fh:
                        if not line.strip():
                            continue
                        record = json.loads(line)
                        self._mem[record["key"]] = record["value"]

    @staticmethod
    def key(
        provider_id: str, model_name: str, operation: str, payload: object
    ) -> str:
        blob = json.dumps(
            [provider_id, model_name, operation, payload],
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def get(self, key: str) -> object | None:
        return self._mem.get(key)

    def put(self, key: str, value: object) -> None:
        with self._lock:
            self._mem[key] = value
            if self._path is not None:
                with open(self._path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(
                        json.dumps(
                            {"key": key, "value": value}, ensure_ascii=False
                        )
                        + "\n"
                    )

    def __len__(self) -> int:
        return len(self._mem)


class CachedNli(NliProvider):
    """Caches per-pair NLI scores; cached and fresh paths return the same values."""

    def __init__(self, inner: NliProvider, cache: ScoreCache) -> None:
        self.inner = inner
        self.cache = cache
        self.provider_id = inner.provider_id
        self.model_name = inner.model_name
        self.normalized = inner.normalized

    def nli_batch(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        keys = [
            ScoreCache.key(self.provider_id, self.model_name, "nli", list(pair))
            for pair in pairs
        ]
        results: list[NliScores | None] = []
        misses: list[int] = []
        for i, key in enumerate(keys):
            hit = self.cache.get(key)
            if hit is None:
                results.append(None)
                misses.append(i)
            else:
                results.append(NliScores(*hit))
        if misses:
            fresh = self.inner.nli_batch([pairs[i] for i in misses])
            if len(fresh) != len(misses):
                raise ProviderError(
                    f"nli provider returned {len(fresh)} results for {len(misses)} pairs"
                )
            for i, scores in zip(misses, fresh):
                self.cache.put(keys[i], list(scores.as_tuple()))
                results[i] = scores
        return [r for r in results if r is not None]


class CachedEmbedding(EmbeddingProvider):
    """Caches per-text embeddings."""

    def __init__(self, inner: EmbeddingProvider, cache: ScoreCache) -> None:
        self.inner = inner
        self.cache = cache
        self.provider_id = inner.provider_id
        self.model_name = inner.model_name

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        keys = [
            ScoreCache.key(self.provider_id, self.model_name, "embed", text)
            for text in texts
        ]
        vectors: list[np.ndarray | None] = []
        misses: list[int] = []
        for i, key in enumerate(keys):
            hit = self.cache.get(key)
            if hit is None:
                vectors.append(None)
                misses.append(i)
            else:
                vectors.append(np.asarray(hit, dtype=np.float64))
        if misses:
            fresh = self.inner.embed([texts[i] for i in misses])
            if fresh.shape[0] != len(misses):
                raise ProviderError(
                    f"embedding provider returned {fresh.shape[0]} vectors "
                    f"for {len(misses)} texts"
                )
            for row, i in enumerate(misses):
                self.cache.put(keys[i], [float(x) for x in fresh[row]])
                vectors[i] = fresh[row]
        return np.vstack([v for v in vectors if v is not None])


# ---------------------------------------------------------------------------
# Remote adapters
# ---------------------------------------------------------------------------


class RemoteClient:
    """Shared HTTP plumbing: auth header, retries with backoff, JSON post."""

    def __init__(
        self, config: ProviderConfig, transport: httpx.BaseTransport | None = None
    ) -> None:
        self.config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_ref:
            secret = os.environ.get(self.config.auth_ref)
            if not secret:
                raise ProviderError(
                    f"environment variable {self.config.auth_ref!r} is not set "
                    f"for provider {self.config.provider_id!r}"
                )
            headers["Authorization"] = f"Bearer {secret}"
        return headers

    def post_json(self, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt > 0 and self.config.retry_backoff > 0:
                time.sleep(self.config.retry_backoff * (2 ** (attempt - 1)))
            try:
                response = self._client.post(
                    self.config.endpoint, json=payload, headers=self._headers()
                )
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = ProviderError(
                    f"{self.config.provider_id}: server error {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise ProviderError(
                    f"{self.config.provider_id}: request rejected "
                    f"({response.status_code}): {response.text[:200]}"
                )
            try:
                return response.json()
            except json.JSONDecodeError as exc:
                raise ProviderError(
                    f"{self.config.provider_id}: response is not JSON"
                ) from exc
        raise ProviderError(
            f"{self.config.provider_id}: failed after "
            f"{self.config.max_retries + 1} attempts: {last_error}"
        )

    def close(self) -> None:
        self._client.close()


def _truncate_texts(texts: Sequence[str], config: ProviderConfig) -> list[str]:
    if config.max_text_chars is None:
        return [str(t) for t in texts]
    out = []
    for t in texts:
        if len(t) > config.max_text_chars:
            logger.warning(
                "truncating %d-char text to provider limit %d (%s)",
                len(t),
                config.max_text_chars,
                config.provider_id,
            )
            t = t[: config.max_text_chars]
        out.append(t)
    return out


def _chunks(items: Sequence, size: int) -> Iterable[Sequence]:
    for i in range(0, len(items), size):
        yield items[i : i + size]


class RemoteEmbedding(EmbeddingProvider):
    """POSTs {model, input: [texts]} and reads {data: [{embedding}...]}."""

    def __init__(
        self, config: ProviderConfig, transport: httpx.BaseTransport | None = None
    ) -> None:
        self.config = config
        self.provider_id = config.provider_id
        self.model_name = config.model_name
        self._client = RemoteClient(config, transport)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed requires at least one text")
        texts = _truncate_texts(texts, self.config)
        rows: list[list[float]] = []
        for chunk in _chunks(texts, self.config.batch_size):
            data = self._client.post_json(
                {"model": self.config.model_name, "input": list(chunk)}
            )
            try:
                vectors = [item["embedding"] for item in data["data"]]
            except (KeyError, TypeError) as exc:
                raise ProviderError(
                    f"{self.provider_id}: malformed embedding response"
                ) from exc
            if len(vectors) != len(chunk):
                raise ProviderError(
                    f"{self.provider_id}: got {len(vectors)} vectors for "
                    f"{len(chunk)} texts"
                )
            rows.extend(vectors)
        return np.asarray(rows, dtype=np.float64)


class RemoteReranker(RerankProvider):
    """POSTs {model, query, documents} and reads {results: [{index, relevance_score}]}."""

    def __init__(
        self, config: ProviderConfig, transport: httpx.BaseTransport | None = None
    ) -> None:
        self.config = config
        self.provider_id = config.provider_id
        self.model_name = config.model_name
        self._client = RemoteClient(config, transport)

    def rerank_scores(
        self,
        query: str,
        passages: Sequence[str],
        prior_scores: Sequence[float] | None = None,
    ) -> list[float]:
        passages = _truncate_texts(passages, self.config)
        data = self._client.post_json(
            {
                "model": self.config.model_name,
                "query": query,
                "documents": list(passages),
            }
        )
        scores = [0.0] * len(passages)
        seen = [False] * len(passages)
        try:
            for item in data["results"]:
                index = int(item["index"])
                scores[index] = float(item["relevance_score"])
                seen[index] = True
        except (KeyError, TypeError, IndexError) as exc:
            raise ProviderError(
                f"{self.provider_id}: malformed rerank response"
            ) from exc
        if not all(seen):
            raise ProviderError(
                f"{self.provider_id}: rerank response missing "
                f"{seen.count(False)} of {len(passages)} documents"
            )
        return scores


class RemoteNli(NliProvider):
    """POSTs {model, pairs} and reads {scores: [{entailment, contradiction, neutral}]}."""

    def __init__(
        self,
        config: ProviderConfig,
        normalized: bool = True,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.config = config
        self.provider_id = config.provider_id
        self.model_name = config.model_name
        self.normalized = normalized
        self._client = RemoteClient(config, transport)

    def nli_batch(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        out: list[NliScores] = []
        for chunk in _chunks(list(pairs), self.config.batch_size):
            data = self._client.post_json(
                {
                    "model": self.config.model_name,
                    "pairs": [[p, h] for p, h in chunk],
                }
            )
            try:
                scores = [
                    NliScores(
                        float(item["entailment"]),
                        float(item["contradiction"]),
                        float(item["neutral"]),
                    )
                    for item in data["scores"]
                ]
            except (KeyError, TypeError) as exc:
                raise ProviderError(
                    f"{self.provider_id}: malformed nli response"
                ) from exc
            if len(scores) != len(chunk):
                raise ProviderError(
                    f"{self.provider_id}: got {len(scores)} scores for "
                    f"{len(chunk)} pairs"
                )
            validate_nli_scores(scores, self.normalized)
            out.extend(scores)
        return out


class RemoteObligationClassifier(ObligationClassifier):
    """POSTs {model, sentences} and reads {labels: [{is_obligation, confidence}]}."""

    def __init__(
        self, config: ProviderConfig, transport: httpx.BaseTransport | None = None
    ) -> None:
        self.config = config
        self.provider_id = config.provider_id
        self.model_name = config.model_name
        self._client = RemoteClient(config, transport)

    def classify_obligations(
        self, sentences: Sequence[str]
    ) -> list[tuple[bool, float]]:
        out: list[tuple[bool, float]] = []
        for chunk in _chunks(list(sentences), self.config.batch_size):
            data = self._client.post_json(
                {"model": self.config.model_name, "sentences": list(chunk)}
            )
            try:
                labels = [
                    (bool(item["is_obligation"]), float(item["confidence"]))
                    for item in data["labels"]
                ]
            except (KeyError, TypeError) as exc:
                raise ProviderError(
                    f"{self.provider_id}: malformed classifier response"
                ) from exc
            if len(labels) != len(chunk):
                raise ProviderError(
                    f"{self.provider_id}: got {len(labels)} labels for "
                    f"{len(chunk)} sentences"
                )
            out.extend(labels)
        return out


class RemoteChat(ChatProvider):
    """POSTs chat messages and reads {choices: [{message: {content}}]}."""

    def __init__(
        self, config: ProviderConfig, transport: httpx.BaseTransport | None = None
    ) -> None:
        self.config = config
        self.provider_id = config.provider_id
        self.model_name = config.model_name
        self._client = RemoteClient(config, transport)

    def chat(
        self,
        system_prompt: str,
        user_content: str,
        temperature: float = 0.0,
        seed: int | None = None,
    ) -> str:
        payload: dict = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_content},
            ],
            "temperature": temperature,
        }
        if seed is not None:
            payload["seed"] = seed
        data = self._client.post_json(payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(
                f"{self.provider_id}: malformed chat response"
            ) from exc
        if not isinstance(content, str) or not content.strip():
            raise ProviderError(f"{self.provider_id}: empty chat completion")
        return content
