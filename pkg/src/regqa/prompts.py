"""System prompts used by the generation strategies.

Prompts load from a versioned JSON file so they can be swapped without
code changes; the built-in defaults below are the production set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

PROMPT_VERSION = 1

_DEFAULTS = {
    "baseline": (
        "You are a regulatory compliance assistant. Provide a detailed answer "
        "for the question that fully integrates all the obligations and best "
        "practices from the given passages. Ensure your response is cohesive "
        "and directly addresses the question. Synthesize the information from "
        "all passages into a single, unified answer."
    ),
    "obligations_context": (
        "You are a regulatory compliance assistant. Your task is to provide a "
        "brief but concise and detailed answer to the Question, ensuring that "
        "all Obligations are fully addressed. Directly integrate each "
        "obligation into the response, ensuring no obligation is missed or "
        "implied. Avoid adding information beyond what is explicitly stated "
        "in the Obligations, and cite specific rules when necessary. Use the "
        "exact terminology and structure from the obligations where "
        "applicable, to ensure high alignment and logical consistency. Focus "
        "solely on the provided obligations to craft a response that is "
        "well-structured, concise, and free of contradictions."
    ),
    "obligation_insertion": (
        "You are a regulatory compliance assistant. Your task is to integrate "
        "the following Obligations that are missing from the Answer. You may "
        "change sentences or add new ones to cover all Obligations. Avoid "
        "adding changes or sentences that contradict the Answer and/or the "
        "Obligations."
    ),
    "obligation_rewrite": (
        "You are a regulatory compliance assistant. Your task is to construct "
        "a brief but concise response that addresses the Question by focusing "
        "exclusively on the specified Obligation. Ensure your response "
        "clearly identifies and explains the obligation, including any "
        "relevant conditions or restrictions. Avoid addressing unrelated "
        "aspects of the Question, and limit your response strictly to what is "
        "explicitly stated in the provided passage."
    ),
}

_REQUIRED_KEYS = tuple(sorted(_DEFAULTS))


@dataclass(frozen=True)
class PromptLibrary:
    """The four system prompts plus the file format version."""

    version: int
    baseline: str
    obligations_context: str
    obligation_insertion: str
    obligation_rewrite: str

    @classmethod
    def default(cls) -> "PromptLibrary":
        return cls(version=PROMPT_VERSION, **_DEFAULTS)

    @classmethod
    def load(cls, path: Path | str) -> "PromptLibrary":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: prompt file must be a JSON object")
        if "version" not in data:
            raise ConfigError(f"{path}: prompt file missing 'version'")
        prompts = data.get("prompts", data)
        missing = [key for key in _REQUIRED_KEYS if key not in prompts]
        if missing:
            raise ConfigError(
                f"{path}: prompt file missing prompts: {', '.join(missing)}"
            )
        for key in _REQUIRED_KEYS:
            if not str(prompts[key]).strip():
                raise ConfigError(f"{path}: prompt {key!r} is empty")
        return cls(
            version=int(data["version"]),
            baseline=str(prompts["baseline"]),
            obligations_context=str(prompts["obligations_context"]),
            obligation_insertion=str(prompts["obligation_insertion"]),
            obligation_rewrite=str(prompts["obligation_rewrite"]),
        )
