"""Scoring-prompt assembly and SCORE/RATIONALE response parsing."""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["PromptConfig", "ParseError", "build_prompt", "parse_response"]

_BASE_INSTRUCTIONS = """\
1. Read the passage, prompt, and student essay carefully
2. Evaluate the essay holistically against the rubric
3. Assign ONE score from 0 to 4
4. Provide a detailed rationale explaining why this score was assigned
5. Reference specific elements from the essay in your rationale but do not repeat the rubric"""

_SUCCINCTNESS_ADDENDUM = """\
6. Keep the rationale focused and avoid unnecessary verbosity
7. Use direct, clear language without excessive elaboration
8. Focus on the key strengths and weaknesses that determined the score
9. Each rationale should Not be more than 512 tokens"""

_RESPONSE_FORMAT = """\
Please respond in the following format:

SCORE: [0-4]

RATIONALE: [Detailed explanation of why this score was assigned, with specific references to the essay content and how it aligns with the rubric criteria]"""

_SCORE_RE = re.compile(r"^\s*SCORE\s*:\s*(-?\d+)\s*$", re.IGNORECASE | re.MULTILINE)
_RATIONALE_RE = re.compile(r"RATIONALE\s*:", re.IGNORECASE)


class ParseError(ValueError):
    """Model response did not follow the SCORE/RATIONALE format."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class PromptConfig:
    """Everything needed to build the zero-shot scoring prompt.

    `succinctness_addendum` appends the four brevity instructions used
    when the provider cannot cap output length; `scoring_notes` appends
    the item-specific list of acceptable answers when available.
    """

    generator_id: str
    passage: str
    writing_prompt: str
    rubric_text: str
    temperature: float | None = None
    scoring_notes: str | None = None
    succinctness_addendum: bool = False

    def effective_temperature(self) -> float:
        """Configured temperature, or the per-generator default."""
        if self.temperature is not None:
            if self.temperature < 0:
                raise ValueError("temperature must be >= 0")
            return self.temperature
        return 0.2 if "4.1" in self.generator_id else 1.0


def build_prompt(essay_text: str, config: PromptConfig) -> str:
    """Assemble the full scoring prompt for one essay."""
    if not essay_text.strip():
        raise ValueError("build_prompt: empty essay text")
    for field in ("passage", "writing_prompt", "rubric_text"):
        if not getattr(config, field).strip():
            raise ValueError(f"build_prompt: config field {field!r} is empty")

    sections = [
        "TASK\n\nYou are an experienced essay grader. Score the following "
        "essay holistically using the provided rubric.",
        f"READING PASSAGE:\n\n{config.passage}",
        f"ESSAY PROMPT:\n\n{config.writing_prompt}",
        f"STUDENT ESSAY:\n\n{essay_text}",
        f"SCORING RUBRIC (Holistic - Single Score from 0 to 4):\n\n{config.rubric_text}",
    ]
    instructions = _BASE_INSTRUCTIONS
    if config.succinctness_addendum:
        instructions += "\n" + _SUCCINCTNESS_ADDENDUM
    sections.append(f"INSTRUCTIONS:\n\n{instructions}")
    if config.scoring_notes is not None:
        sections.append(f"Scoring Notes:\n\n{config.scoring_notes}")
    sections.append(_RESPONSE_FORMAT)
    return "\n\n".join(sections)


def parse_response(raw: str) -> tuple[int, str]:
    """Extract (score, rationale) from a model response.

    The score comes from the first line matching `SCORE: <int>`; the
    rationale is everything after the first `RATIONALE:` marker. Markers
    are matched case-insensitively with tolerant whitespace.
    """
    score_match = _SCORE_RE.search(raw)
    if score_match is None:
        raise ParseError("missing or malformed SCORE marker", raw)
    score = int(score_match.group(1))
    if not 0 <= score <= 4:
        raise ParseError(f"score {score} outside 0-4", raw)
    rationale_match = _RATIONALE_RE.search(raw)
    if rationale_match is None:
        raise ParseError("missing RATIONALE marker", raw)
    return score, raw[rationale_match.end() :].strip()
