"""Regulatory question answering: hybrid retrieval, reference-free
scoring, and obligation-aware answer generation."""

from .bm25 import Bm25Index, Bm25Params, bm25_search, build_bm25_index
from .config import RunConfig, build_providers, load_config
from .corpus import (
    AnswerRecord,
    Corpus,
    Passage,
    PassageRef,
    Question,
    QuestionSet,
    RetrievalRun,
    RunEntry,
    ScoredPassage,
    StrategyTag,
    load_corpus,
    load_questions,
    read_answers,
    read_run,
    write_answers,
    write_corpus,
    write_questions,
    write_run,
)
from .errors import (
    ConfigError,
    FormatError,
    ProviderError,
    RegqaError,
    ScriptExhaustedError,
)
from .generation import (
    ABSTENTION_TEXT,
    AnswerCandidate,
    BaselineVariant,
    FilterConfig,
    LocConfig,
    ReturnPolicy,
    VrrConfig,
    VrrOutcome,
    filter_passages,
    generate_baseline,
    generate_loc,
    generate_noc,
    generate_vrr,
    generate_vrr_batch,
)
from .prompts import PromptLibrary
from .providers import (
    MockKind,
    MockSpec,
    NliScores,
    ProviderBundle,
    ProviderConfig,
    make_mock,
)
from .ranking_eval import evaluate_run, map_at_k, recall_at_k
from .repass import (
    CoverageThreshold,
    Obligation,
    RePASsReport,
    RepassScorer,
    extract_obligations,
    obligation_coverage,
    repass,
)
from .retrieval import (
    FusionWeights,
    RerankDepth,
    RetrievalConfig,
    RetrievalPipeline,
    fuse,
    normalize_scores,
    rerank,
    retrieve_all,
)
from .text import SentenceSource, SentenceSplit, segment_sentences, tokenize

__version__ = "0.1.0"

__all__ = [
    "ABSTENTION_TEXT",
    "AnswerCandidate",
    "AnswerRecord",
    "BaselineVariant",
    "Bm25Index",
    "Bm25Params",
    "ConfigError",
    "Corpus",
    "CoverageThreshold",
    "FilterConfig",
    "FormatError",
    "FusionWeights",
    "LocConfig",
    "MockKind",
    "MockSpec",
    "NliScores",
    "Obligation",
    "Passage",
    "PassageRef",
    "PromptLibrary",
    "ProviderBundle",
    "ProviderConfig",
    "ProviderError",
    "Question",
    "QuestionSet",
    "RePASsReport",
    "RegqaError",
    "RepassScorer",
    "RerankDepth",
    "RetrievalConfig",
    "RetrievalPipeline",
    "RetrievalRun",
    "ReturnPolicy",
    "RunConfig",
    "RunEntry",
    "ScoredPassage",
    "ScriptExhaustedError",
    "SentenceSource",
    "SentenceSplit",
    "StrategyTag",
    "VrrConfig",
    "VrrOutcome",
    "bm25_search",
    "build_bm25_index",
    "build_providers",
    "evaluate_run",
    "extract_obligations",
    "filter_passages",
    "fuse",
    "generate_baseline",
    "generate_loc",
    "generate_noc",
    "generate_vrr",
    "generate_vrr_batch",
    "load_config",
    "load_corpus",
    "load_questions",
    "map_at_k",
    "normalize_scores",
    "obligation_coverage",
    "read_answers",
    "read_run",
    "recall_at_k",
    "repass",
    "rerank",
    "retrieve_all",
    "segment_sentences",
    "tokenize",
    "write_answers",
    "write_corpus",
    "write_questions",
    "write_run",
]
