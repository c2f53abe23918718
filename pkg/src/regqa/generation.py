"""Answer generation strategies and the refinement loop.

Three strategies share the same preprocessing (score filtering plus
obligation extraction):

* NOC concatenates the extracted obligations verbatim with no model
  call. It exists to demonstrate that the reference-free metric can be
  gamed: under an exact-match scorer it reaches the maximum score.
* LOC answers each obligation independently with an LLM rewrite,
  retrying up to a call budget until the rewrite covers its obligation,
  then concatenates the per-obligation answers.
* VRR generates several alternatives, keeps the best-scoring one
  (verification), then alternates contradiction removal and missing
  obligation insertion for a fixed number of rounds (refinement),
  re-scoring after every step.

When nothing survives the score filter, strategies emit a fixed
abstention sentence instead of hallucinating an answer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .corpus import Corpus, Passage, Question, ScoredPassage
from .errors import ProviderError
from .prompts import PromptLibrary
from .providers import ChatProvider, NliProvider, ObligationClassifier
from .repass import (
    DEFAULT_OBLIGATION_CUT,
    CoverageThreshold,
    Obligation,
    RePASsReport,
    RepassScorer,
    extract_obligations,
    obligation_coverage,
    passage_premises,
    _score_matrix,
)
from .text import SentenceSource, SentenceSplit, segment_sentences

logger = logging.getLogger(__name__)

ABSTENTION_TEXT = "No sufficiently relevant regulatory passages were retrieved."


@dataclass(frozen=True)
class FilterConfig:
    """Prefix filter over the ranked, normalized score list.

    A passage is kept while its score is at least ``threshold`` and the
    drop from the previously kept passage is at most ``max_drop``; the
    scan stops at the first violation.
    """

    threshold: float = 0.90
    max_drop: float = 0.10

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if not 0.0 <= self.max_drop <= 1.0:
            raise ValueError(f"max_drop must be in [0, 1], got {self.max_drop}")


@dataclass(frozen=True)
class LocConfig:
    """Per-obligation rewrite budget and coverage threshold."""

    max_tries: int = 3
    tau: CoverageThreshold = CoverageThreshold()

    def __post_init__(self) -> None:
        if self.max_tries < 1:
            raise ValueError(f"max_tries must be >= 1, got {self.max_tries}")


class ReturnPolicy(Enum):
    """Which refinement candidate the VRR strategy returns."""

    BEST_SEEN = "BEST_SEEN"
    FINAL = "FINAL"


@dataclass(frozen=True)
class VrrConfig:
    """Verification and refinement settings."""

    num_alternatives: int = 5
    rounds: int = 4
    return_policy: ReturnPolicy = ReturnPolicy.BEST_SEEN
    tau: CoverageThreshold = CoverageThreshold()
    verify_only: bool = False

    def __post_init__(self) -> None:
        if self.num_alternatives < 1:
            raise ValueError(
                f"num_alternatives must be >= 1, got {self.num_alternatives}"
            )
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")


class BaselineVariant(Enum):
    """What context the single-shot baseline receives."""

    PASSAGES = "PASSAGES"
    OBLIGATIONS = "OBLIGATIONS"
    OBLIGATIONS_TAILORED = "OBLIGATIONS_TAILORED"


class Provenance(Enum):
    """Which operation produced a candidate's current text."""

    GENERATED = "GENERATED"
    CONTRADICTION_PRUNED = "CONTRADICTION_PRUNED"
    OBLIGATION_INSERTED = "OBLIGATION_INSERTED"


@dataclass(frozen=True)
class AnswerCandidate:
    """An answer text, its sentence split, and optionally its score report."""

    text: str
    split: SentenceSplit
    report: RePASsReport | None = None
    provenance: Provenance = Provenance.GENERATED


def make_candidate(
    text: str,
    provenance: Provenance = Provenance.GENERATED,
    report: RePASsReport | None = None,
) -> AnswerCandidate:
    return AnswerCandidate(
        text=text,
        split=segment_sentences(text, SentenceSource.ANSWER),
        report=report,
        provenance=provenance,
    )


def filter_passages(
    ranked: Sequence[ScoredPassage], cfg: FilterConfig
) -> list[ScoredPassage]:
    """Longest prefix satisfying the threshold and consecutive-drop rules."""
    kept: list[ScoredPassage] = []
    previous: float | None = None
    for sp in ranked:
        if sp.normalized_score is None:
            raise ValueError(f"passage {sp.ref.key} has no normalized score")
        score = sp.normalized_score
        if score < cfg.threshold:
            break
        if previous is not None and previous - score > cfg.max_drop:
            break
        kept.append(sp)
        previous = score
    return kept


def preprocess(
    ranked: Sequence[ScoredPassage],
    corpus: Corpus,
    cfg: FilterConfig,
    classifier: ObligationClassifier,
    obligation_cut: float = DEFAULT_OBLIGATION_CUT,
) -> tuple[list[Passage], list[Obligation]]:
    """Filter the ranked list, then extract generation-context obligations.

    Obligation-free passages contribute their whole text as a single
    pseudo-obligation here, so the generation context never silently
    drops a retrieved passage.
    """
    kept = filter_passages(ranked, cfg)
    passages = [corpus.get(sp.ref) for sp in kept]
    obligations = extract_obligations(
        passages,
        classifier,
        keep_empty_as_passage=True,
        decision_threshold=obligation_cut,
    )
    return passages, obligations


# ---------------------------------------------------------------------------
# Prompt rendering
# ---------------------------------------------------------------------------


def _obligations_block(obligations: Sequence[Obligation]) -> str:
    return "\n".join(f"- {o.text}" for o in obligations)


def _passages_block(passages: Sequence[Passage]) -> str:
    return "\n".join(f"- {p.text}" for p in passages)


def render_verify_prompt(question: Question, obligations: Sequence[Obligation]) -> str:
    return (
        f"Question: {question.text}\n\n"
        f"Obligations:\n{_obligations_block(obligations)}"
    )


def render_insertion_prompt(
    question: Question, answer_text: str, missing: Sequence[Obligation]
) -> str:
    return (
        f"Question: {question.text}\n\n"
        f"Answer: {answer_text}\n\n"
        f"Missing Obligations:\n{_obligations_block(missing)}"
    )


def render_rewrite_prompt(
    question: Question, obligation: Obligation, passage: Passage
) -> str:
    return (
        f"Question: {question.text}\n\n"
        f"Obligation: {obligation.text}\n\n"
        f"Passage: {passage.text}"
    )


def render_baseline_prompt(
    question: Question,
    passages: Sequence[Passage],
    obligations: Sequence[Obligation],
    variant: BaselineVariant,
) -> str:
    if variant is BaselineVariant.PASSAGES:
        return (
            f"Question: {question.text}\n\nPassages:\n{_passages_block(passages)}"
        )
    return (
        f"Question: {question.text}\n\n"
        f"Obligations:\n{_obligations_block(obligations)}"
    )


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


def generate_noc(obligations: Sequence[Obligation]) -> AnswerCandidate:
    """Concatenate the obligations verbatim, in order, with no model call."""
    if not obligations:
        raise ValueError("no obligations to concatenate; strategy inapplicable")
    return make_candidate(" ".join(o.text for o in obligations))


def generate_loc(
    question: Question,
    obligations: Sequence[Obligation],
    corpus: Corpus,
    llm: ChatProvider,
    coverage_nli: NliProvider,
    cfg: LocConfig,
    prompts: PromptLibrary,
    temperature: float = 0.0,
    seed: int | None = None,
) -> AnswerCandidate:
    """Answer each obligation independently, then concatenate.

    Each obligation gets up to ``cfg.max_tries`` rewrite calls; the loop
    stops early once the rewrite covers its obligation at tau, and the
    last attempt is kept either way.
    """
    if not obligations:
        raise ValueError("no obligations to answer; strategy inapplicable")
    parts: list[str] = []
    for index, obligation in enumerate(obligations):
        passage = corpus.get(obligation.source_passage)
        user = render_rewrite_prompt(question, obligation, passage)
        attempt_text = ""
        for _ in range(cfg.max_tries):
            try:
                attempt_text = llm.chat(
                    prompts.obligation_rewrite,
                    user,
                    temperature=temperature,
                    seed=seed,
                )
            except ProviderError as exc:
                raise ProviderError(
                    f"rewrite failed for obligation {index} of "
                    f"{question.question_id}: {exc}"
                ) from exc
            coverage = obligation_coverage(
                segment_sentences(attempt_text, SentenceSource.ANSWER),
                [obligation],
                coverage_nli,
                cfg.tau,
            )
            if coverage.ocs >= 1.0:
                break
        parts.append(attempt_text)
    return make_candidate(" ".join(parts))


def generate_baseline(
    question: Question,
    passages: Sequence[Passage],
    obligations: Sequence[Obligation],
    llm: ChatProvider,
    prompts: PromptLibrary,
    variant: BaselineVariant = BaselineVariant.OBLIGATIONS_TAILORED,
    temperature: float = 0.0,
    seed: int | None = None,
) -> AnswerCandidate:
    """Single LLM call over the chosen context variant."""
    if variant is BaselineVariant.PASSAGES and not passages:
        raise ValueError("no passages for baseline context; strategy inapplicable")
    if variant is not BaselineVariant.PASSAGES and not obligations:
        raise ValueError("no obligations for baseline context; strategy inapplicable")
    system = (
        prompts.obligations_context
        if variant is BaselineVariant.OBLIGATIONS_TAILORED
        else prompts.baseline
    )
    user = render_baseline_prompt(question, passages, obligations, variant)
    return make_candidate(llm.chat(system, user, temperature=temperature, seed=seed))


ScoreFn = Callable[[str], RePASsReport]


def vrr_verify(
    question: Question,
    obligations: Sequence[Obligation],
    passages: Sequence[Passage],
    llm: ChatProvider,
    scorer: RepassScorer,
    cfg: VrrConfig,
    prompts: PromptLibrary,
    temperature: float = 0.7,
    seed: int | None = None,
) -> AnswerCandidate:
    """Generate alternatives and keep the best-scoring one.

    Individual generation failures are tolerated; if every alternative
    fails the verification step fails. Ties pick the lowest-index
    alternative.
    """
    if not obligations:
        raise ValueError("no obligations for verification; strategy inapplicable")
    user = render_verify_prompt(question, obligations)
    best: AnswerCandidate | None = None
    failures: list[str] = []
    for index in range(cfg.num_alternatives):
        try:
            text = llm.chat(
                prompts.obligations_context,
                user,
                temperature=temperature,
                seed=seed,
            )
        except ProviderError as exc:
            failures.append(f"alternative {index}: {exc}")
            continue
        report = scorer.score(text, passages)
        candidate = make_candidate(text, report=report)
        if best is None or report.repass > best.report.repass:
            best = candidate
    if best is None:
        raise ProviderError(
            f"all {cfg.num_alternatives} generations failed for "
            f"{question.question_id}: " + "; ".join(failures)
        )
    return best


def dataset_mean_contradiction(candidates: Sequence[AnswerCandidate]) -> float:
    """Mean contradiction score over the current candidate set."""
    if not candidates:
        raise ValueError("cannot average contradiction over zero candidates")
    total = 0.0
    for candidate in candidates:
        if candidate.report is None:
            raise ValueError("every candidate needs a score report")
        total += candidate.report.cs
    return total / len(candidates)


def remove_contradictions(
    candidate: AnswerCandidate,
    passages: Sequence[Passage],
    mean_cs: float,
    nli: NliProvider,
) -> AnswerCandidate:
    """Drop sentences whose contradiction score exceeds the dataset mean.

    If every sentence would be dropped the single least-contradicting
    sentence survives, so the answer never becomes empty. When nothing
    is dropped the candidate is returned unchanged (same object, report
    intact).
    """
    premises = passage_premises(passages)
    matrix = _score_matrix(premises.sentences, candidate.split.sentences, nli)
    per_sentence = [
        max(score.contradict for score in row) for row in matrix
    ]
    kept = [
        sentence
        for sentence, c in zip(candidate.split.sentences, per_sentence)
        if c <= mean_cs
    ]
    if len(kept) == len(candidate.split.sentences):
        return candidate
    if not kept:
        best_index = min(
            range(len(per_sentence)), key=lambda i: per_sentence[i]
        )
        kept = [candidate.split.sentences[best_index]]
    return make_candidate(" ".join(kept), Provenance.CONTRADICTION_PRUNED)


def insert_obligations(
    candidate: AnswerCandidate,
    question: Question,
    passages: Sequence[Passage],
    llm: ChatProvider,
    coverage_nli: NliProvider,
    classifier: ObligationClassifier,
    tau: CoverageThreshold,
    prompts: PromptLibrary,
    temperature: float = 0.0,
    seed: int | None = None,
    obligation_cut: float = DEFAULT_OBLIGATION_CUT,
) -> AnswerCandidate:
    """Rewrite the answer to integrate obligations it does not yet cover.

    Obligations are extracted in metric mode (no pseudo-obligations)
    because coverage of the real obligation set is what the refinement
    is trying to improve. With nothing missing the candidate is
    returned unchanged.
    """
    obligations = extract_obligations(
        passages, classifier, keep_empty_as_passage=False,
        decision_threshold=obligation_cut,
    )
    coverage = obligation_coverage(candidate.split, obligations, coverage_nli, tau)
    if not coverage.missing:
        return candidate
    user = render_insertion_prompt(question, candidate.text, coverage.missing)
    text = llm.chat(
        prompts.obligation_insertion, user, temperature=temperature, seed=seed
    )
    return make_candidate(text, Provenance.OBLIGATION_INSERTED)


# ---------------------------------------------------------------------------
# VRR driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryStep:
    """One logged refinement step: label plus the four score components."""

    label: str
    es: float
    cs: float
    ocs: float
    repass: float


@dataclass
class VrrOutcome:
    """Final candidate plus the full step trajectory for one question."""

    question_id: str
    candidate: AnswerCandidate
    retrieved: tuple = ()
    trajectory: list[TrajectoryStep] = field(default_factory=list)
    abstained: bool = False


@dataclass
class _VrrState:
    question: Question
    passages: list[Passage]
    obligations: list[Obligation]
    candidate: AnswerCandidate | None
    steps: list[tuple[str, AnswerCandidate]] = field(default_factory=list)


def _log_step(state: _VrrState, label: str, candidate: AnswerCandidate) -> None:
    state.candidate = candidate
    state.steps.append((label, candidate))


def generate_vrr_batch(
    items: Sequence[tuple[Question, Sequence[ScoredPassage]]],
    corpus: Corpus,
    llm: ChatProvider,
    scorer: RepassScorer,
    classifier: ObligationClassifier,
    cfg: VrrConfig,
    filter_cfg: FilterConfig,
    prompts: PromptLibrary,
    gen_temperature: float = 0.7,
    edit_temperature: float = 0.0,
    seed: int | None = None,
    obligation_cut: float = DEFAULT_OBLIGATION_CUT,
) -> list[VrrOutcome]:
    """Run verification and refinement over a batch of questions.

    The contradiction threshold of each removal round is the mean
    contradiction score over the whole batch's current candidates, so
    all questions complete a step before any question starts the next
    one. Trajectory steps are labeled Verify, then Ref.Contr.k and
    Ref.Obl.k per round.
    """
    states: list[_VrrState] = []
    for question, ranked in items:
        passages, obligations = preprocess(
            ranked, corpus, filter_cfg, classifier, obligation_cut
        )
        state = _VrrState(question, passages, obligations, None)
        if passages:
            candidate = vrr_verify(
                question,
                obligations,
                passages,
                llm,
                scorer,
                cfg,
                prompts,
                temperature=gen_temperature,
                seed=seed,
            )
            _log_step(state, "Verify", candidate)
        states.append(state)

    active = [s for s in states if s.candidate is not None]
    rounds = 0 if cfg.verify_only else cfg.rounds
    for round_index in range(1, rounds + 1):
        if not active:
            break
        mean_cs = dataset_mean_contradiction([s.candidate for s in active])
        for state in active:
            pruned = remove_contradictions(
                state.candidate, state.passages, mean_cs, scorer.nli
            )
            if pruned is not state.candidate:
                pruned = make_candidate(
                    pruned.text,
                    pruned.provenance,
                    scorer.score(pruned.text, state.passages),
                )
            _log_step(state, f"Ref.Contr.{round_index}", pruned)
        for state in active:
            inserted = insert_obligations(
                state.candidate,
                state.question,
                state.passages,
                llm,
                scorer.coverage_nli if scorer.coverage_nli is not None else scorer.nli,
                classifier,
                cfg.tau,
                prompts,
                temperature=edit_temperature,
                seed=seed,
                obligation_cut=obligation_cut,
            )
            if inserted is not state.candidate:
                inserted = make_candidate(
                    inserted.text,
                    inserted.provenance,
                    scorer.score(inserted.text, state.passages),
                )
            _log_step(state, f"Ref.Obl.{round_index}", inserted)

    outcomes: list[VrrOutcome] = []
    for state in states:
        refs = tuple(p.ref for p in state.passages)
        if state.candidate is None:
            outcomes.append(
                VrrOutcome(
                    question_id=state.question.question_id,
                    candidate=make_candidate(ABSTENTION_TEXT),
                    retrieved=refs,
                    trajectory=[],
                    abstained=True,
                )
            )
            continue
        if cfg.return_policy is ReturnPolicy.BEST_SEEN:
            chosen = state.steps[0][1]
            for _, candidate in state.steps[1:]:
                if candidate.report.repass > chosen.report.repass:
                    chosen = candidate
        else:
            chosen = state.steps[-1][1]
        trajectory = [
            TrajectoryStep(
                label=label,
                es=candidate.report.es,
                cs=candidate.report.cs,
                ocs=candidate.report.ocs,
                repass=candidate.report.repass,
            )
            for label, candidate in state.steps
        ]
        outcomes.append(
            VrrOutcome(
                question_id=state.question.question_id,
                candidate=chosen,
                retrieved=refs,
                trajectory=trajectory,
            )
        )
    return outcomes


def generate_vrr(
    question: Question,
    ranked: Sequence[ScoredPassage],
    corpus: Corpus,
    llm: ChatProvider,
    scorer: RepassScorer,
    classifier: ObligationClassifier,
    cfg: VrrConfig,
    filter_cfg: FilterConfig,
    prompts: PromptLibrary,
    gen_temperature: float = 0.7,
    edit_temperature: float = 0.0,
    seed: int | None = None,
    obligation_cut: float = DEFAULT_OBLIGATION_CUT,
) -> VrrOutcome:
    """Single-question convenience wrapper over the batch driver.

    With a batch of one the contradiction threshold degenerates to the
    question's own score.
    """
    return generate_vrr_batch(
        [(question, ranked)],
        corpus,
        llm,
        scorer,
        classifier,
        cfg,
        filter_cfg,
        prompts,
        gen_temperature=gen_temperature,
        edit_temperature=edit_temperature,
        seed=seed,
        obligation_cut=obligation_cut,
    )[0]
