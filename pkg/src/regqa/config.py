"""Run configuration: JSON loading, validation, and provider wiring.

A run config is a single JSON file. Relative paths inside it resolve
against the config file's own directory, so a config can travel with
its fixture data. Unknown keys are rejected rather than ignored;
silently dropping a misspelled knob is worse than failing fast.

Every provider slot defaults to a deterministic offline mock, so a
config with no ``providers`` section runs end to end with no network
and no credentials.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .corpus import StrategyTag
from .errors import ConfigError
from .generation import FilterConfig, LocConfig, ReturnPolicy, VrrConfig
from .providers import (
    CachedEmbedding,
    CachedNli,
    MockKind,
    MockSpec,
    ProviderBundle,
    ProviderConfig,
    RemoteChat,
    RemoteEmbedding,
    RemoteNli,
    RemoteObligationClassifier,
    RemoteReranker,
    ScoreCache,
    make_mock,
)
from .repass import DEFAULT_OBLIGATION_CUT, CoverageThreshold
from .retrieval import FusionWeights, RerankDepth, RetrievalConfig

CONFIG_VERSION = 1

_PROVIDER_SLOTS = (
    "embedding_a",
    "embedding_b",
    "reranker",
    "nli",
    "coverage_nli",
    "obligation_classifier",
    "llm",
)

# Default mock seeds differ per embedding slot so the two dense
# retrievers disagree, which is what fusion is for.
_DEFAULT_PROVIDER_SPECS: dict[str, dict[str, Any]] = {
    "embedding_a": {"mock": "hash_embedding", "seed": 11},
    "embedding_b": {"mock": "hash_embedding", "seed": 23},
    "reranker": {"mock": "identity_rerank"},
    "nli": {"mock": "identity_nli"},
    "obligation_classifier": {"mock": "keyword_obligation"},
    "llm": {"mock": "echo_llm"},
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs beyond the command-line verbs."""

    corpus_path: Path
    questions_path: Path
    run_tag: str = "regqa"
    seed: int = 0
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    passage_filter: FilterConfig = field(default_factory=FilterConfig)
    strategy: StrategyTag = StrategyTag.VRR
    loc: LocConfig = field(default_factory=LocConfig)
    vrr: VrrConfig = field(default_factory=VrrConfig)
    tau: float = 0.70
    obligation_cut: float = DEFAULT_OBLIGATION_CUT
    gen_temperature: float = 0.7
    edit_temperature: float = 0.0
    max_in_flight: int = 1
    provider_specs: Mapping[str, Any] = field(default_factory=dict)
    prompts_path: Path | None = None
    cache_dir: Path | None = None

    def __post_init__(self) -> None:
        if not self.run_tag:
            raise ValueError("run_tag must be non-empty")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if not 0.0 <= self.obligation_cut <= 1.0:
            raise ValueError(
                f"obligation_cut must be in [0, 1], got {self.obligation_cut}"
            )
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {self.max_in_flight}")


def _check_keys(mapping: Mapping[str, Any], allowed: set[str], context: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {', '.join(unknown)}")


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: Path | str) -> RunConfig:
    """Read and validate a JSON run config."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return parse_config(raw, base_dir=path.parent, context=str(path))


def parse_config(
    raw: Mapping[str, Any], base_dir: Path, context: str = "config"
) -> RunConfig:
    _check_keys(
        raw,
        {
            "version",
            "corpus",
            "questions",
            "run_tag",
            "seed",
            "retrieval",
            "filter",
            "strategy",
            "loc",
            "vrr",
            "tau",
            "obligation_cut",
            "gen_temperature",
            "edit_temperature",
            "max_in_flight",
            "providers",
            "prompts",
            "cache_dir",
        },
        context,
    )
    version = raw.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(
            f"{context}: expected version {CONFIG_VERSION}, got {version!r}"
        )
    for required in ("corpus", "questions"):
        if required not in raw:
            raise ConfigError(f"{context}: missing required key '{required}'")

    retrieval_raw = raw.get("retrieval", {})
    _check_keys(
        retrieval_raw,
        {"pool_size", "k", "fusion_a", "fusion_b", "rerank_depth"},
        f"{context}.retrieval",
    )
    filter_raw = raw.get("filter", {})
    _check_keys(filter_raw, {"threshold", "max_drop"}, f"{context}.filter")
    loc_raw = raw.get("loc", {})
    _check_keys(loc_raw, {"max_tries"}, f"{context}.loc")
    vrr_raw = raw.get("vrr", {})
    _check_keys(
        vrr_raw,
        {"num_alternatives", "rounds", "return_policy", "verify_only"},
        f"{context}.vrr",
    )
    providers_raw = raw.get("providers", {})
    _check_keys(providers_raw, set(_PROVIDER_SLOTS), f"{context}.providers")

    tau_value = float(raw.get("tau", 0.70))
    try:
        tau = CoverageThreshold(tau_value)
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc

    try:
        strategy = StrategyTag(str(raw.get("strategy", "VRR")).upper())
    except ValueError as exc:
        raise ConfigError(
            f"{context}: unknown strategy {raw.get('strategy')!r}"
        ) from exc

    try:
        policy = ReturnPolicy(str(vrr_raw.get("return_policy", "BEST_SEEN")).upper())
    except ValueError as exc:
        raise ConfigError(
            f"{context}: unknown return_policy {vrr_raw.get('return_policy')!r}"
        ) from exc

    specs: dict[str, Any] = {}
    for slot, spec in providers_raw.items():
        if spec is None:
            continue
        if not isinstance(spec, dict):
            raise ConfigError(f"{context}.providers.{slot} must be an object")
        specs[slot] = _normalize_provider_spec(spec, slot, base_dir, context)

    try:
        return RunConfig(
            corpus_path=_resolve(base_dir, raw["corpus"]),
            questions_path=_resolve(base_dir, raw["questions"]),
            run_tag=str(raw.get("run_tag", "regqa")),
            seed=int(raw.get("seed", 0)),
            retrieval=RetrievalConfig(
                weights=FusionWeights(
                    a=float(retrieval_raw.get("fusion_a", 0.25)),
                    b=float(retrieval_raw.get("fusion_b", 0.20)),
                ),
                rerank_depth=RerankDepth(
                    n=int(retrieval_raw.get("rerank_depth", 50))
                ),
                pool_size=int(retrieval_raw.get("pool_size", 100)),
                k=int(retrieval_raw.get("k", 10)),
            ),
            passage_filter=FilterConfig(
                threshold=float(filter_raw.get("threshold", 0.90)),
                max_drop=float(filter_raw.get("max_drop", 0.10)),
            ),
            strategy=strategy,
            loc=LocConfig(max_tries=int(loc_raw.get("max_tries", 3)), tau=tau),
            vrr=VrrConfig(
                num_alternatives=int(vrr_raw.get("num_alternatives", 5)),
                rounds=int(vrr_raw.get("rounds", 4)),
                return_policy=policy,
                tau=tau,
                verify_only=bool(vrr_raw.get("verify_only", False)),
            ),
            tau=tau_value,
            obligation_cut=float(raw.get("obligation_cut", DEFAULT_OBLIGATION_CUT)),
            gen_temperature=float(raw.get("gen_temperature", 0.7)),
            edit_temperature=float(raw.get("edit_temperature", 0.0)),
            max_in_flight=int(raw.get("max_in_flight", 1)),
            provider_specs=specs,
            prompts_path=(
                _resolve(base_dir, raw["prompts"]) if raw.get("prompts") else None
            ),
            cache_dir=(
                _resolve(base_dir, raw["cache_dir"]) if raw.get("cache_dir") else None
            ),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _normalize_provider_spec(
    spec: Mapping[str, Any], slot: str, base_dir: Path, context: str
) -> dict[str, Any]:
    where = f"{context}.providers.{slot}"
    if ("mock" in spec) == ("remote" in spec):
        raise ConfigError(f"{where}: exactly one of 'mock' or 'remote' is required")
    if "mock" in spec:
        _check_keys(
            spec, {"mock", "seed", "dim", "script_path", "script"}, where
        )
        out = dict(spec)
        if "script_path" in out:
            out["script_path"] = _resolve(base_dir, out["script_path"])
        return out
    remote = spec["remote"]
    if not isinstance(remote, dict):
        raise ConfigError(f"{where}.remote must be an object")
    _check_keys(
        remote,
        {
            "provider_id",
            "endpoint",
            "model_name",
            "auth_ref",
            "timeout",
            "max_retries",
            "batch_size",
            "retry_backoff",
            "max_text_chars",
            "normalized",
        },
        f"{where}.remote",
    )
    extra_keys = set(spec) - {"mock", "remote"}
    if extra_keys:
        raise ConfigError(f"{where}: unknown keys: {', '.join(sorted(extra_keys))}")
    return {"remote": dict(remote)}


def parse_provider_flag(value: str, base_dir: Path | None = None) -> dict[str, Any]:
    """Parse a ``kind`` or ``kind:arg`` command-line provider override.

    The arg is a seed for embedding mocks and a script path for the
    scripted chat mock; other mocks take no arg.
    """
    kind, _, arg = value.partition(":")
    kind = kind.strip().lower()
    try:
        MockKind(kind.upper())
    except ValueError as exc:
        known = ", ".join(sorted(k.value.lower() for k in MockKind))
        raise ConfigError(f"unknown mock kind {kind!r}; known kinds: {known}") from exc
    spec: dict[str, Any] = {"mock": kind}
    if arg:
        if kind == "scripted_llm":
            path = Path(arg)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            spec["script_path"] = path
        else:
            try:
                spec["seed"] = int(arg)
            except ValueError as exc:
                raise ConfigError(
                    f"mock arg for {kind} must be an integer seed, got {arg!r}"
                ) from exc
    return spec


def _build_one(slot: str, spec: Mapping[str, Any]):
    if "remote" in spec:
        remote = dict(spec["remote"])
        normalized = bool(remote.pop("normalized", True))
        try:
            config = ProviderConfig(**remote)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"providers.{slot}.remote: {exc}") from exc
        if slot in ("embedding_a", "embedding_b"):
            return RemoteEmbedding(config)
        if slot == "reranker":
            return RemoteReranker(config)
        if slot in ("nli", "coverage_nli"):
            return RemoteNli(config, normalized=normalized)
        if slot == "obligation_classifier":
            return RemoteObligationClassifier(config)
        return RemoteChat(config)
    mock_name = str(spec["mock"]).upper()
    try:
        kind = MockKind(mock_name)
    except ValueError as exc:
        raise ConfigError(f"providers.{slot}: unknown mock {spec['mock']!r}") from exc
    return make_mock(
        MockSpec(kind=kind, seed=int(spec.get("seed", 0))),
        dim=int(spec.get("dim", 64)),
        script=spec.get("script"),
        script_path=spec.get("script_path"),
    )


def build_providers(cfg: RunConfig) -> ProviderBundle:
    """Construct the provider bundle, filling unset slots with mocks.

    An unset ``coverage_nli`` stays None so the scorer falls back to
    the pairwise NLI provider. With a cache directory configured, the
    NLI and embedding providers are wrapped so repeated texts and pairs
    are scored once.
    """
    specs = dict(_DEFAULT_PROVIDER_SPECS)
    specs.update(cfg.provider_specs)
    built = {slot: _build_one(slot, spec) for slot, spec in specs.items()}
    bundle = ProviderBundle(
        embedding_a=built["embedding_a"],
        embedding_b=built["embedding_b"],
        reranker=built["reranker"],
        nli=built["nli"],
        coverage_nli=built.get("coverage_nli"),
        obligation_classifier=built["obligation_classifier"],
        llm=built["llm"],
    )
    if cfg.cache_dir is not None:
        cache = ScoreCache(cfg.cache_dir)
        bundle = replace(
            bundle,
            embedding_a=CachedEmbedding(bundle.embedding_a, cache),
            embedding_b=CachedEmbedding(bundle.embedding_b, cache),
            nli=CachedNli(bundle.nli, cache),
            coverage_nli=(
                CachedNli(bundle.coverage_nli, cache)
                if bundle.coverage_nli is not None
                else None
            ),
        )
    return bundle
