"""Recall@k and MAP@k for retrieval runs against gold annotations.

Per question, recall@k is the fraction of gold passages present in the
top k. Average precision at k sums precision@i over the relevant ranks
i <= k and divides by min(|gold|, k), so a question whose gold set
exceeds k can still reach 1.0. Aggregates are arithmetic means over the
questions in the run (macro average). A question with an empty
retrieval list scores 0 on both metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import QuestionSet, RetrievalRun


@dataclass(frozen=True)
class QuestionEval:
    """One question's metric values."""

    recall: float
    average_precision: float


@dataclass(frozen=True)
class RetrievalEvalResult:
    """Aggregate and per-question retrieval metrics at one cutoff."""

    recall_at_k: float
    map_at_k: float
    k: int
    per_question: dict[str, QuestionEval]


def evaluate_run(
    run: RetrievalRun, gold: QuestionSet, k: int
) -> RetrievalEvalResult:
    """Score every question in the run against its gold refs."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not run.results:
        raise ValueError("cannot evaluate an empty run")
    per_question: dict[str, QuestionEval] = {}
    for question_id, entries in run.results.items():
        if question_id not in gold:
            raise ValueError(
                f"run question {question_id!r} is absent from the gold set"
            )
        refs = gold.get(question_id).gold_refs
        if not refs:
            raise ValueError(f"question {question_id!r} has no gold refs")
        gold_set = set(refs)
        top = [entry.ref for entry in entries[:k]]
        hits = len(gold_set & set(top))
        recall = hits / len(gold_set)
        found = 0
        precision_sum = 0.0
        credited = set()
        for i, ref in enumerate(top, 1):
            if ref in gold_set and ref not in credited:
                credited.add(ref)
                found += 1
                precision_sum += found / i
        average_precision = precision_sum / min(len(gold_set), k)
        per_question[question_id] = QuestionEval(recall, average_precision)
    n = len(per_question)
    return RetrievalEvalResult(
        recall_at_k=sum(q.recall for q in per_question.values()) / n,
        map_at_k=sum(q.average_precision for q in per_question.values()) / n,
        k=k,
        per_question=per_question,
    )


def recall_at_k(run: RetrievalRun, gold: QuestionSet, k: int) -> RetrievalEvalResult:
    return evaluate_run(run, gold, k)


def map_at_k(run: RetrievalRun, gold: QuestionSet, k: int) -> RetrievalEvalResult:
    return evaluate_run(run, gold, k)


def write_metrics_report(
    result: RetrievalEvalResult, jsonl_path: Path | str, text_path: Path | str
) -> None:
    """Emit the flat metrics report: aggregates first, then question rows."""
    with open(jsonl_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            json.dumps(
                {
                    "record": "aggregate",
                    "metric": "recall",
                    "k": result.k,
                    "value": result.recall_at_k,
                }
            )
            + "\n"
        )
        fh.write(
            json.dumps(
                {
                    "record": "aggregate",
                    "metric": "map",
                    "k": result.k,
                    "value": result.map_at_k,
                }
            )
            + "\n"
        )
        for question_id, q in result.per_question.items():
            fh.write(
                json.dumps(
                    {
                        "record": "question",
                        "question_id": question_id,
                        "recall": q.recall,
                        "average_precision": q.average_precision,
                    }
                )
                + "\n"
            )
    lines = [
        f"recall@{result.k} {result.recall_at_k:.4f}",
        f"map@{result.k}    {result.map_at_k:.4f}",
        "",
        f"{'question':24s} {'recall':>8s} {'ap':>8s}",
    ]
    for question_id, q in result.per_question.items():
        lines.append(
            f"{question_id:24s} {q.recall:8.4f} {q.average_precision:8.4f}"
        )
    Path(text_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
