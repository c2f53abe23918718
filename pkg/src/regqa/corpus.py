"""Domain records and file formats.

Corpora, question sets, and answer records are stored as line-delimited
JSON (one record per line). Retrieval runs use a six-column whitespace
separated text format, one ranked passage per line:

    question_id Q0 document_id#passage_id rank score run_tag

The second column is the constant literal ``Q0``. Scores are written
with full repr precision so that parsing a written run reproduces the
original run exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import FormatError

# Maximum retrieved refs an answer record may carry when exported for
# shared-task submission.
SUBMISSION_MAX_RETRIEVED = 10

RUN_COLUMN_LITERAL = "Q0"


def _validate_identifier(value: str, fieldname: str) -> str:
    """Reject ids that would break the '#' join or whitespace-separated files."""
    if not isinstance(value, str) or not value:
        raise ValueError(f"{fieldname} must be a non-empty string")
    if "#" in value:
        raise ValueError(f"{fieldname} {value!r} must not contain '#'")
    if any(c.isspace() for c in value):
        raise ValueError(f"{fieldname} {value!r} must not contain whitespace")
    return value


@dataclass(frozen=True)
class PassageRef:
    """A (document_id, passage_id) pair identifying one passage."""

    document_id: str
    passage_id: str

    def __post_init__(self) -> None:
        _validate_identifier(self.document_id, "document_id")
        _validate_identifier(self.passage_id, "passage_id")

    @property
    def key(self) -> str:
        """The joined form used in run files and answer records."""
        return f"{self.document_id}#{self.passage_id}"

    @classmethod
    def from_key(cls, key: str) -> "PassageRef":
        parts = key.split("#")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise FormatError(
                f"passage key {key!r} is not of the form document_id#passage_id"
            )
        return cls(parts[0], parts[1])


@dataclass(frozen=True)
class Passage:
    """One retrievable unit of regulatory text."""

    document_id: str
    passage_id: str
    text: str

    def __post_init__(self) -> None:
        _validate_identifier(self.document_id, "document_id")
        _validate_identifier(self.passage_id, "passage_id")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError(
                f"passage {self.document_id}#{self.passage_id} has empty text"
            )

    @property
    def ref(self) -> PassageRef:
        return PassageRef(self.document_id, self.passage_id)


class Corpus:
    """An ordered collection of passages with exact-key lookup."""

    def __init__(self, passages: Iterable[Passage]) -> None:
        self._passages: list[Passage] = []
        self._by_ref: dict[PassageRef, Passage] = {}
        for p in passages:
            ref = p.ref
            if ref in self._by_ref:
                raise ValueError(f"duplicate passage {ref.key} in corpus")
            self._by_ref[ref] = p
            self._passages.append(p)

    def __len__(self) -> int:
        return len(self._passages)

    def __iter__(self) -> Iterator[Passage]:
        return iter(self._passages)

    def __contains__(self, ref: PassageRef) -> bool:
        return ref in self._by_ref

    def get(self, ref: PassageRef) -> Passage:
        try:
            return self._by_ref[ref]
        except KeyError:
            raise KeyError(f"passage {ref.key} not in corpus") from None

    def refs(self) -> list[PassageRef]:
        return [p.ref for p in self._passages]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self._passages == other._passages


@dataclass(frozen=True)
class Question:
    """A question, optionally annotated with gold passage refs."""

    question_id: str
    text: str
    gold_refs: tuple[PassageRef, ...] | None = None

    def __post_init__(self) -> None:
        _validate_identifier(self.question_id, "question_id")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError(f"question {self.question_id} has empty text")


class QuestionSet:
    """An ordered collection of questions with id lookup."""

    def __init__(self, questions: Iterable[Question]) -> None:
        self._questions: list[Question] = []
        self._by_id: dict[str, Question] = {}
        for q in questions:
            if q.question_id in self._by_id:
                raise ValueError(f"duplicate question_id {q.question_id!r}")
            self._by_id[q.question_id] = q
            self._questions.append(q)

    def __len__(self) -> int:
        return len(self._questions)

    def __iter__(self) -> Iterator[Question]:
        return iter(self._questions)

    def __contains__(self, question_id: str) -> bool:
        return question_id in self._by_id

    def get(self, question_id: str) -> Question:
        try:
            return self._by_id[question_id]
        except KeyError:
            raise KeyError(f"question {question_id!r} not in question set") from None

    def validate_against(self, corpus: Corpus) -> None:
        """Raise if any gold ref points outside ``corpus``."""
        dangling = [
            ref.key
            for q in self._questions
            for ref in (q.gold_refs or ())
            if ref not in corpus
        ]
        if dangling:
            raise ValueError(
                "gold refs not present in corpus: " + ", ".join(sorted(set(dangling)))
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuestionSet):
            return NotImplemented
        return self._questions == other._questions


class StrategyTag(Enum):
    """Which generation strategy produced an answer."""

    NOC = "NOC"
    LOC = "LOC"
    VRR = "VRR"
    BASELINE = "BASELINE"


@dataclass(frozen=True)
class AnswerRecord:
    """A generated answer tied to the passages it was generated from."""

    question_id: str
    retrieved: tuple[PassageRef, ...]
    answer_text: str
    strategy: StrategyTag

    def __post_init__(self) -> None:
        _validate_identifier(self.question_id, "question_id")
        if not isinstance(self.answer_text, str) or not self.answer_text.strip():
            raise ValueError(f"answer for {self.question_id} has empty text")


@dataclass(frozen=True)
class ScoredPassage:
    """A passage with its score at some stage of the retrieval cascade.

    ``raw_score`` is the score assigned by the most recent stage (BM25,
    cosine, fused weight, or reranker). ``normalized_score`` is the
    per-query min-max normalized value consumed downstream; it is None
    until a normalization pass fills it.
    """

    ref: PassageRef
    raw_score: float
    normalized_score: float | None
    rank: int

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.normalized_score is not None and not (
            -1e-9 <= self.normalized_score <= 1 + 1e-9
        ):
            raise ValueError(
                f"normalized score {self.normalized_score} outside [0, 1]"
            )

    def with_normalized(self, value: float) -> "ScoredPassage":
        return replace(self, normalized_score=value)


@dataclass(frozen=True)
class RunEntry:
    """One ranked passage of one question inside a retrieval run."""

    ref: PassageRef
    rank: int
    score: float

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("rank must be >= 1")


@dataclass
class RetrievalRun:
    """Per-question ranked passage lists plus the run tag."""

    tag: str
    results: dict[str, list[RunEntry]] = field(default_factory=dict)

    def add(self, question_id: str, entries: list[RunEntry]) -> None:
        if question_id in self.results:
            raise ValueError(f"question {question_id!r} already present in run")
        self.results[question_id] = list(entries)


def scored_to_entries(scored: Iterable[ScoredPassage]) -> list[RunEntry]:
    """Convert pipeline output to run entries, carrying the normalized score."""
    entries = []
    for sp in scored:
        if sp.normalized_score is None:
            raise ValueError(f"passage {sp.ref.key} has no normalized score")
        entries.append(RunEntry(sp.ref, sp.rank, sp.normalized_score))
    return entries


# ---------------------------------------------------------------------------
# Line-delimited JSON readers and writers
# ---------------------------------------------------------------------------


def _iter_records(path: Path | str) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid record: {exc}") from exc
            if not isinstance(record, dict):
                raise FormatError(f"{path}:{lineno}: record is not an object")
            yield lineno, record


def _require(record: dict, fieldname: str, path: Path | str, lineno: int) -> object:
    if fieldname not in record:
        raise FormatError(f"{path}:{lineno}: missing field {fieldname!r}")
    return record[fieldname]


def load_corpus(path: Path | str) -> Corpus:
    """Parse a corpus file; an empty file yields an empty corpus."""
    passages = []
    for lineno, record in _iter_records(path):
        try:
            passages.append(
                Passage(
                    document_id=str(_require(record, "document_id", path, lineno)),
                    passage_id=str(_require(record, "passage_id", path, lineno)),
                    text=str(_require(record, "text", path, lineno)),
                )
            )
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return Corpus(passages)


def write_corpus(corpus: Corpus, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in corpus:
            fh.write(
                json.dumps(
                    {
                        "document_id": p.document_id,
                        "passage_id": p.passage_id,
                        "text": p.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_questions(path: Path | str) -> QuestionSet:
    questions = []
    for lineno, record in _iter_records(path):
        gold = record.get("gold_refs")
        refs: tuple[PassageRef, ...] | None = None
        if gold is not None:
            if not isinstance(gold, list):
                raise FormatError(f"{path}:{lineno}: gold_refs must be a list")
            parsed = []
            for item in gold:
                if not (isinstance(item, list) and len(item) == 2):
                    raise FormatError(
                        f"{path}:{lineno}: gold ref {item!r} is not a [document_id, passage_id] pair"
                    )
                parsed.append(PassageRef(str(item[0]), str(item[1])))
            refs = tuple(parsed)
        try:
            questions.append(
                Question(
                    question_id=str(_require(record, "question_id", path, lineno)),
                    text=str(_require(record, "text", path, lineno)),
                    gold_refs=refs,
                )
            )
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return QuestionSet(questions)


def write_questions(questions: QuestionSet, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in questions:
            record: dict = {"question_id": q.question_id, "text": q.text}
            if q.gold_refs is not None:
                record["gold_refs"] = [
                    [r.document_id, r.passage_id] for r in q.gold_refs
                ]
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_answers(path: Path | str) -> list[AnswerRecord]:
    records = []
    for lineno, record in _iter_records(path):
        strategy_raw = str(_require(record, "strategy", path, lineno))
        try:
            strategy = StrategyTag(strategy_raw)
        except ValueError:
            raise FormatError(
                f"{path}:{lineno}: unknown strategy {strategy_raw!r}"
            ) from None
        retrieved_raw = _require(record, "retrieved", path, lineno)
        if not isinstance(retrieved_raw, list):
            raise FormatError(f"{path}:{lineno}: retrieved must be a list")
        try:
            refs = tuple(PassageRef.from_key(str(k)) for k in retrieved_raw)
            records.append(
                AnswerRecord(
                    question_id=str(_require(record, "question_id", path, lineno)),
                    retrieved=refs,
                    answer_text=str(_require(record, "answer", path, lineno)),
                    strategy=strategy,
                )
            )
        except (ValueError, FormatError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_answers(
    records: Iterable[AnswerRecord], path: Path | str, submission: bool = False
) -> None:
    """Write answer records; ``submission=True`` enforces the ref cap."""
    records = list(records)
    if submission:
        for rec in records:
            if len(rec.retrieved) > SUBMISSION_MAX_RETRIEVED:
                raise ValueError(
                    f"answer for {rec.question_id} carries {len(rec.retrieved)} refs, "
                    f"submission allows at most {SUBMISSION_MAX_RETRIEVED}"
                )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "question_id": rec.question_id,
                        "retrieved": [r.key for r in rec.retrieved],
                        "answer": rec.answer_text,
                        "strategy": rec.strategy.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# Run file format
# ---------------------------------------------------------------------------


def write_run(run: RetrievalRun, path: Path | str) -> None:
    """Write a run in the six-column format, one line per ranked passage."""
    if not run.tag or any(c.isspace() for c in run.tag):
        raise ValueError(f"run tag {run.tag!r} must be non-empty without whitespace")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for question_id, entries in run.results.items():
            last_rank = 0
            for entry in entries:
                if entry.rank <= last_rank:
                    raise ValueError(
                        f"run entries for {question_id!r} are not rank-sorted"
                    )
                last_rank = entry.rank
                fh.write(
                    f"{question_id} {RUN_COLUMN_LITERAL} {entry.ref.key} "
                    f"{entry.rank} {entry.score!r} {run.tag}\n"
                )


def read_run(path: Path | str) -> RetrievalRun:
    """Parse a run file, enforcing column count and per-question rank order."""
    path = Path(path)
    tag: str | None = None
    results: dict[str, list[RunEntry]] = {}
    last_rank: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            cols = line.split()
            if len(cols) != 6:
                raise FormatError(
                    f"{path}:{lineno}: expected 6 columns, found {len(cols)}"
                )
            question_id, _literal, key, rank_raw, score_raw, line_tag = cols
            try:
                rank = int(rank_raw)
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: rank {rank_raw!r} is not an integer"
                ) from None
            try:
                score = float(score_raw)
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: score {score_raw!r} is not a number"
                ) from None
            if tag is None:
                tag = line_tag
            elif line_tag != tag:
                raise FormatError(
                    f"{path}:{lineno}: run tag {line_tag!r} differs from {tag!r}"
                )
            if rank <= last_rank.get(question_id, 0):
                raise FormatError(
                    f"{path}:{lineno}: rank {rank} for {question_id!r} does not "
                    f"increase monotonically"
                )
            last_rank[question_id] = rank
            try:
                entry = RunEntry(PassageRef.from_key(key), rank, score)
            except (ValueError, FormatError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            results.setdefault(question_id, []).append(entry)
    return RetrievalRun(tag=tag if tag is not None else "untagged", results=results)
