from pathlib import Path

import pytest

from regqa import Corpus, Passage, PassageRef, Question, QuestionSet

TOY_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "toy"


@pytest.fixture
def toy_dir() -> Path:
    return TOY_DIR


@pytest.fixture
def tiny_corpus() -> Corpus:
    return Corpus(
        [
            Passage(
                "REG-A",
                "1",
                "Banks must submit quarterly reports. "
                "The board shall review capital adequacy.",
            ),
            Passage(
                "REG-A",
                "2",
                "Institutions must maintain a liquidity buffer above the floor.",
            ),
            Passage(
                "REG-B",
                "1",
                "This section describes general supervisory context.",
            ),
        ]
    )


@pytest.fixture
def tiny_questions() -> QuestionSet:
    return QuestionSet(
        [
            Question(
                "Q1",
                "What reporting must banks submit quarterly?",
                (PassageRef("REG-A", "1"),),
            ),
            Question(
                "Q2",
                "What liquidity buffer must institutions maintain?",
                (PassageRef("REG-A", "2"),),
            ),
        ]
    )
