"""Deterministic prompt assembly for exercise generation and code explanation.

Rendering is pure string concatenation over validated inputs: identical
inputs always yield byte-identical prompt text.  Line endings are LF
throughout.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .parsing import (
    FENCE,
    MARKER_KEYWORDS,
    MARKER_PROBLEM,
    MARKER_SOLUTION,
    MARKER_TESTS,
    normalize_newlines,
    split_sections,
)

STOP_SEQUENCE = FENCE


class ExplanationStyle(str, enum.Enum):
    STEP_BY_STEP = "step_by_step"
    HIGH_LEVEL = "high_level"
    PROBLEM_STATEMENT = "problem_statement"


_EXPLANATION_HEADERS = {
    ExplanationStyle.STEP_BY_STEP: "Step-by-step explanation of the above program:",
    ExplanationStyle.HIGH_LEVEL: "A high-level description of the above program:",
    ExplanationStyle.PROBLEM_STATEMENT: "A problem statement for the above program:",
}


@dataclass(frozen=True)
class PromptText:
    body: str
    stop_sequence: str = STOP_SEQUENCE

    def __post_init__(self):
        if not self.body:
            raise ValidationError("prompt body must be non-empty")
        if not self.stop_sequence:
            raise ValidationError("stop sequence must be non-empty")


@dataclass(frozen=True)
class KeywordSet:
    """Theming keywords for a generation request.

    Either field may be absent; present keywords are non-empty and
    lowercase-normalized.  The contextual keyword renders first, then the
    programmatic keywords in their given order.
    """

    contextual: str | None = None
    programmatic: tuple[str, ...] | None = None

    def __post_init__(self):
        contextual = self.contextual
        if contextual is not None:
            contextual = contextual.strip().lower()
            if not contextual:
                raise ValidationError("contextual keyword must be non-empty when given")
        object.__setattr__(self, "contextual", contextual)

        programmatic = self.programmatic
        if programmatic is not None:
            cleaned = tuple(kw.strip().lower() for kw in programmatic)
            if not cleaned:
                programmatic = None
            elif any(not kw for kw in cleaned):
                raise ValidationError("programmatic keywords must be non-empty strings")
            else:
                programmatic = cleaned
        object.__setattr__(self, "programmatic", programmatic)

    @property
    def is_empty(self) -> bool:
        return self.contextual is None and self.programmatic is None

    def lines(self) -> tuple[str, ...]:
        out: list[str] = []
        if self.contextual is not None:
            out.append(self.contextual)
        if self.programmatic is not None:
            out.extend(self.programmatic)
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "contextual": self.contextual,
            "programmatic": list(self.programmatic) if self.programmatic else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KeywordSet":
        programmatic = data.get("programmatic")
        return cls(
            contextual=data.get("contextual"),
            programmatic=tuple(programmatic) if programmatic else None,
        )


@dataclass(frozen=True)
class PrimingExercise:
    """A seed exercise: the worked example the model is primed with."""

    id: str
    keywords: tuple[str, ...]
    problem_statement: str
    sample_solution: str
    tests: str = ""

    def __post_init__(self):
        if not self.id.strip():
            raise ValidationError("prime id must be non-empty")
        if not self.problem_statement.strip():
            raise ValidationError(f"prime {self.id!r}: problem statement must be non-empty")
        if not self.sample_solution.strip():
            raise ValidationError(f"prime {self.id!r}: sample solution must be non-empty")


def render_exercise_block(
    keywords: tuple[str, ...],
    problem_statement: str,
    sample_solution: str,
    tests: str | None,
) -> str:
    """Render one ``Exercise 1`` block, without a closing fence.

    ``tests=None`` truncates the block right after the ``--Tests--`` marker,
    the shape used to prompt for test backfill.
    """
    parts = [f"{FENCE}Exercise 1\n"]
    if keywords:
        parts.append(MARKER_KEYWORDS + "\n")
        parts.extend(kw + "\n" for kw in keywords)
    parts.append(MARKER_PROBLEM + "\n")
    parts.append(problem_statement.strip() + "\n")
    parts.append(MARKER_SOLUTION + "\n")
    parts.append(sample_solution.strip() + "\n")
    parts.append(MARKER_TESTS + "\n")
    if tests is not None:
        parts.append(tests.strip() + "\n")
    return "".join(parts)


def build_exercise_prompt(prime: PrimingExercise, keywords: KeywordSet) -> PromptText:
    """Assemble the generation prompt: the prime as Exercise 1, a fence, then
    the Exercise 2 opener with the requested keywords and the problem
    statement marker the completion continues from."""
    if not prime.tests.strip():
        raise ValidationError(f"prime {prime.id!r}: tests required for exercise generation")
    body = render_exercise_block(
        prime.keywords, prime.problem_statement, prime.sample_solution, prime.tests
    )
    body += f"{FENCE}Exercise 2\n"
    if not keywords.is_empty:
        body += MARKER_KEYWORDS + "\n"
        body += "".join(kw + "\n" for kw in keywords.lines())
    body += MARKER_PROBLEM + "\n"
    return PromptText(body=body)


def build_test_backfill_prompt(
    keywords: tuple[str, ...] | None,
    problem_statement: str,
    sample_solution: str,
) -> PromptText:
    """Prompt the model to continue an existing exercise right after its
    ``--Tests--`` marker, generating only the tests."""
    if not problem_statement.strip():
        raise ValidationError("problem statement required for test backfill")
    if not sample_solution.strip():
        raise ValidationError("sample solution required for test backfill")
    body = render_exercise_block(
        tuple(keywords or ()), problem_statement, sample_solution, tests=None
    )
    return PromptText(body=body)


def build_explanation_prompt(code: str, style: ExplanationStyle) -> PromptText:
    """Assemble the explanation prompt: the code, a blank line, then the
    fenced style header.  Step-by-step additionally primes the first
    enumerator so the completion continues as an enumerated list."""
    if not code.strip():
        raise ValidationError("code must be non-empty")
    body = normalize_newlines(code).rstrip("\n")
    body += "\n\n" + FENCE + _EXPLANATION_HEADERS[style] + "\n"
    if style is ExplanationStyle.STEP_BY_STEP:
        body += "1."
    return PromptText(body=body)


def parse_prime_text(prime_id: str, text: str) -> PrimingExercise:
    """Read one prime from its marker-format text (the on-disk library
    format, identical to a rendered Exercise 1 block)."""
    _, sections, warnings = split_sections(text)
    if warnings:
        raise ValidationError(f"prime {prime_id!r}: {'; '.join(warnings)}")
    keywords_section = sections.get(MARKER_KEYWORDS, "")
    keywords = tuple(line.strip() for line in keywords_section.split("\n") if line.strip())
    return PrimingExercise(
        id=prime_id,
        keywords=keywords,
        problem_statement=sections.get(MARKER_PROBLEM, ""),
        sample_solution=sections.get(MARKER_SOLUTION, ""),
        tests=sections.get(MARKER_TESTS, ""),
    )


def load_prime_library(directory: str | Path) -> dict[str, PrimingExercise]:
    """Load every ``*.txt`` prime in a directory; the filename stem is the
    prime id.  Ids are unique by construction."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError(f"prime library directory not found: {directory}")
    library: dict[str, PrimingExercise] = {}
    for path in sorted(directory.glob("*.txt")):
        library[path.stem] = parse_prime_text(path.stem, path.read_text(encoding="utf-8"))
    if not library:
        raise ValidationError(f"prime library is empty: {directory}")
    return library


def builtin_prime_library() -> dict[str, PrimingExercise]:
    """The primes shipped with the package."""
    return load_prime_library(Path(__file__).parent / "primes")
