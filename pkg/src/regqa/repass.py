"""Reference-free answer scoring against retrieved passages (RePASs).

An answer is scored purely against the passages it cites, with no gold
answer involved. Three components are computed at sentence level:

* entailment score Es: for each answer sentence, the maximum
  probability that some passage sentence entails it; Es is the mean
  over answer sentences.
* contradiction score Cs: the same construction using the
  contradiction probability.
* obligation coverage OCs: the fraction of obligations extracted from
  the passages that are entailed by at least one answer sentence at or
  above a threshold tau; here the answer sentence is the premise and
  the obligation the hypothesis. A passage set with no obligations is
  vacuously covered (OCs = 1.0).

The aggregate is RePASs = (Es + (1 - Cs) + OCs) / 3. Pair scoring and
coverage checking are separate provider slots because they are distinct
models in deployment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Passage, PassageRef
from .errors import ProviderError
from .providers import NliProvider, NliScores, ObligationClassifier, validate_nli_scores
from .text import (
    SentenceSource,
    SentenceSplit,
    collapse_whitespace,
    segment_sentences,
)

# Obligation classifier decision threshold: a sentence counts as an
# obligation when its confidence reaches this cut.
DEFAULT_OBLIGATION_CUT = 0.5


@dataclass(frozen=True)
class CoverageThreshold:
    """Minimum entailment probability for an obligation to count as covered."""

    tau: float = 0.70

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")


@dataclass(frozen=True)
class Obligation:
    """A sentence a regulated entity must comply with, tied to its passage."""

    text: str
    source_passage: PassageRef
    classifier_confidence: float

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("obligation text must be non-empty")
        if not 0.0 <= self.classifier_confidence <= 1.0:
            raise ValueError(
                f"classifier confidence {self.classifier_confidence} outside [0, 1]"
            )


@dataclass(frozen=True)
class SentenceEvidence:
    """Per answer sentence: best entailing and best contradicting premise."""

    sentence: str
    entail_premise: str
    entail: float
    contradict_premise: str
    contradict: float


@dataclass(frozen=True)
class CoveredObligation:
    """An obligation plus the answer sentence that covers it."""

    obligation: Obligation
    sentence: str
    confidence: float


@dataclass(frozen=True)
class CoverageResult:
    """Obligation coverage score with per-obligation evidence."""

    ocs: float
    covered: tuple[CoveredObligation, ...]
    missing: tuple[Obligation, ...]


def aggregate_repass(es: float, cs: float, ocs: float) -> float:
    """Combine the three components; contradiction enters inverted."""
    return (es + (1.0 - cs) + ocs) / 3.0


@dataclass(frozen=True)
class RePASsReport:
    """Component scores, the aggregate, and sentence-level evidence."""

    es: float
    cs: float
    ocs: float
    repass: float
    per_answer_sentence: tuple[SentenceEvidence, ...]
    covered_obligations: tuple[CoveredObligation, ...]

    def __post_init__(self) -> None:
        expected = aggregate_repass(self.es, self.cs, self.ocs)
        if abs(self.repass - expected) > 1e-9:
            raise ValueError(
                f"aggregate {self.repass} inconsistent with components "
                f"(expected {expected})"
            )


def _score_matrix(
    premises: Sequence[str], hypotheses: Sequence[str], nli: NliProvider
) -> list[list[NliScores]]:
    """Score all (premise, hypothesis) pairs in one aligned batch.

    Returns a matrix indexed [hypothesis][premise].
    """
    pairs = [(p, h) for h in hypotheses for p in premises]
    try:
        flat = nli.nli_batch(pairs)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"nli batch of {len(pairs)} pairs failed: {exc}") from exc
    if len(flat) != len(pairs):
        raise ProviderError(
            f"nli provider returned {len(flat)} scores for {len(pairs)} pairs"
        )
    validate_nli_scores(flat, nli.normalized)
    width = len(premises)
    return [flat[i * width : (i + 1) * width] for i in range(len(hypotheses))]


def entailment_score(
    answer: SentenceSplit, premises: SentenceSplit, nli: NliProvider
) -> tuple[float, list[tuple[str, float]]]:
    """Mean over answer sentences of the best entailing premise.

    Returns (Es, evidence) where evidence holds the argmax premise and
    its probability for each answer sentence in order.
    """
    matrix = _score_matrix(premises.sentences, answer.sentences, nli)
    evidence = []
    for row in matrix:
        best_index = max(range(len(row)), key=lambda j: row[j].entail)
        evidence.append((premises.sentences[best_index], row[best_index].entail))
    es = sum(e for _, e in evidence) / len(evidence)
    return es, evidence


def contradiction_score(
    answer: SentenceSplit, premises: SentenceSplit, nli: NliProvider
) -> tuple[float, list[tuple[str, float]]]:
    """Mean over answer sentences of the best contradicting premise."""
    matrix = _score_matrix(premises.sentences, answer.sentences, nli)
    evidence = []
    for row in matrix:
        best_index = max(range(len(row)), key=lambda j: row[j].contradict)
        evidence.append(
            (premises.sentences[best_index], row[best_index].contradict)
        )
    cs = sum(c for _, c in evidence) / len(evidence)
    return cs, evidence


def extract_obligations(
    passages: Sequence[Passage],
    classifier: ObligationClassifier,
    keep_empty_as_passage: bool = False,
    decision_threshold: float = DEFAULT_OBLIGATION_CUT,
) -> list[Obligation]:
    """Classify passage sentences and return the obligations in order.

    The classifier reports (label, confidence) per sentence; extraction
    decides on confidence >= ``decision_threshold`` so the cut is
    adjustable without retraining. With ``keep_empty_as_passage`` a
    passage yielding no obligations contributes its whole text as a
    single pseudo-obligation (generation context mode); without it such
    passages contribute nothing (metric mode).
    """
    obligations: list[Obligation] = []
    for passage in passages:
        split = segment_sentences(passage.text, SentenceSource.PASSAGE)
        try:
            labels = classifier.classify_obligations(split.sentences)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(
                f"obligation classification failed for passage "
                f"{passage.ref.key}: {exc}"
            ) from exc
        if len(labels) != len(split.sentences):
            raise ProviderError(
                f"classifier returned {len(labels)} labels for "
                f"{len(split.sentences)} sentences of {passage.ref.key}"
            )
        found = [
            Obligation(sentence, passage.ref, float(confidence))
            for sentence, (_, confidence) in zip(split.sentences, labels)
            if confidence >= decision_threshold
        ]
        if found:
            obligations.extend(found)
        elif keep_empty_as_passage:
            obligations.append(
                Obligation(collapse_whitespace(passage.text), passage.ref, 0.0)
            )
    return obligations


def obligation_coverage(
    answer: SentenceSplit,
    obligations: Sequence[Obligation],
    nli: NliProvider,
    tau: CoverageThreshold = CoverageThreshold(),
) -> CoverageResult:
    """Which obligations are entailed by at least one answer sentence.

    The answer sentence acts as premise and the obligation as
    hypothesis. Zero obligations yield OCs = 1.0 by convention: an
    answer cannot miss an obligation that does not exist.
    """
    if not obligations:
        return CoverageResult(1.0, (), ())
    matrix = _score_matrix(
        answer.sentences, [o.text for o in obligations], nli
    )
    covered: list[CoveredObligation] = []
    missing: list[Obligation] = []
    for obligation, row in zip(obligations, matrix):
        best_index = max(range(len(row)), key=lambda j: row[j].entail)
        best = row[best_index].entail
        if best >= tau.tau:
            covered.append(
                CoveredObligation(
                    obligation, answer.sentences[best_index], best
                )
            )
        else:
            missing.append(obligation)
    ocs = len(covered) / len(obligations)
    return CoverageResult(ocs, tuple(covered), tuple(missing))


def passage_premises(passages: Sequence[Passage]) -> SentenceSplit:
    """All sentences of the passage set, in passage order."""
    if not passages:
        raise ValueError("premise passage set must be non-empty")
    sentences: list[str] = []
    for passage in passages:
        sentences.extend(
            segment_sentences(passage.text, SentenceSource.PASSAGE).sentences
        )
    return SentenceSplit(tuple(sentences), SentenceSource.PASSAGE)


def repass(
    answer_text: str,
    passages: Sequence[Passage],
    nli: NliProvider,
    classifier: ObligationClassifier,
    coverage_nli: NliProvider | None = None,
    tau: CoverageThreshold = CoverageThreshold(),
    obligation_cut: float = DEFAULT_OBLIGATION_CUT,
) -> RePASsReport:
    """Score one answer against its passage set."""
    if not answer_text.strip():
        raise ValueError("cannot score an empty answer")
    if not passages:
        raise ValueError("cannot score against an empty passage set")
    coverage_nli = coverage_nli if coverage_nli is not None else nli
    answer = segment_sentences(answer_text, SentenceSource.ANSWER)
    premises = passage_premises(passages)
    matrix = _score_matrix(premises.sentences, answer.sentences, nli)
    evidence: list[SentenceEvidence] = []
    for sentence, row in zip(answer.sentences, matrix):
        best_entail = max(range(len(row)), key=lambda j: row[j].entail)
        best_contra = max(range(len(row)), key=lambda j: row[j].contradict)
        evidence.append(
            SentenceEvidence(
                sentence=sentence,
                entail_premise=premises.sentences[best_entail],
                entail=row[best_entail].entail,
                contradict_premise=premises.sentences[best_contra],
                contradict=row[best_contra].contradict,
            )
        )
    es = sum(e.entail for e in evidence) / len(evidence)
    cs = sum(e.contradict for e in evidence) / len(evidence)
    obligations = extract_obligations(
        passages, classifier, keep_empty_as_passage=False,
        decision_threshold=obligation_cut,
    )
    coverage = obligation_coverage(answer, obligations, coverage_nli, tau)
    return RePASsReport(
        es=es,
        cs=cs,
        ocs=coverage.ocs,
        repass=aggregate_repass(es, cs, coverage.ocs),
        per_answer_sentence=tuple(evidence),
        covered_obligations=coverage.covered,
    )


@dataclass
class RepassScorer:
    """Bundles the scoring providers and thresholds for repeated use."""

    nli: NliProvider
    classifier: ObligationClassifier
    coverage_nli: NliProvider | None = None
    tau: CoverageThreshold = CoverageThreshold()
    obligation_cut: float = DEFAULT_OBLIGATION_CUT

    def score(self, answer_text: str, passages: Sequence[Passage]) -> RePASsReport:
        return repass(
            answer_text,
            passages,
            nli=self.nli,
            classifier=self.classifier,
            coverage_nli=self.coverage_nli,
            tau=self.tau,
            obligation_cut=self.obligation_cut,
        )


def report_to_record(
    question_id: str, strategy: str, report: RePASsReport
) -> dict:
    """Flatten a report into one JSON-serializable record."""
    return {
        "question_id": question_id,
        "strategy": strategy,
        "es": report.es,
        "cs": report.cs,
        "ocs": report.ocs,
        "repass": report.repass,
        "sentences": [
            {
                "sentence": e.sentence,
                "entail_premise": e.entail_premise,
                "entail": e.entail,
                "contradict_premise": e.contradict_premise,
                "contradict": e.contradict,
            }
            for e in report.per_answer_sentence
        ],
        "covered_obligations": [
            {
                "obligation": c.obligation.text,
                "source_passage": c.obligation.source_passage.key,
                "sentence": c.sentence,
                "confidence": c.confidence,
            }
            for c in report.covered_obligations
        ],
    }


def write_report_records(records: Sequence[dict], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
