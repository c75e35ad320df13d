"""Code explanation generation and human line-accuracy scoring.

Explanations are generated in three styles; scoring is human-in-the-loop:
raters judge each explanation step Correct or Incorrect following the
handbook in ``docs/rater_handbook.md``, and this module only enforces that
every step is judged exactly once and aggregates the counts.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass

from .errors import ValidationError
from .gateway import GenerationConfig
from .parsing import Explanation, parse_explanation
from .prompts import ExplanationStyle, build_explanation_prompt


class JudgmentVerdict(str, enum.Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"


@dataclass(frozen=True)
class LineJudgment:
    """One rater verdict for one explanation step (1-based index)."""

    step_index: int
    verdict: JudgmentVerdict
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "verdict": self.verdict.value,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LineJudgment":
        return cls(
            step_index=data["step_index"],
            verdict=JudgmentVerdict(data["verdict"]),
            reason=data.get("reason"),
        )


@dataclass(frozen=True)
class ExplanationScore:
    all_parts_explained: bool
    total_lines: int
    correct_lines: int

    def __post_init__(self):
        if self.correct_lines > self.total_lines:
            raise ValidationError("correct_lines cannot exceed total_lines")
        if self.total_lines < 0 or self.correct_lines < 0:
            raise ValidationError("line counts must be non-negative")

    @property
    def accuracy(self) -> float:
        return self.correct_lines / self.total_lines if self.total_lines else 0.0

    def to_dict(self) -> dict:
        return {
            "all_parts_explained": self.all_parts_explained,
            "total_lines": self.total_lines,
            "correct_lines": self.correct_lines,
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExplanationScore":
        return cls(
            all_parts_explained=data["all_parts_explained"],
            total_lines=data["total_lines"],
            correct_lines=data["correct_lines"],
        )


def explanation_digest(explanation: Explanation) -> str:
    payload = json.dumps(
        {
            "source_code": explanation.source_code,
            "style": explanation.style,
            "raw_text": explanation.raw_text,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def explain(
    backend,
    code: str,
    style: ExplanationStyle,
    config: GenerationConfig,
    n_samples: int = 1,
) -> list[Explanation]:
    """Generate ``n_samples`` explanations of ``code``: build the style
    prompt once, complete once per sample, parse each completion."""
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    if not code.strip():
        raise ValidationError("code must be non-blank")
    prompt = build_explanation_prompt(code, style)
    out = []
    for sample in range(1, n_samples + 1):
        result = backend.complete(prompt, config, sample_tag=f"sample:{sample}")
        out.append(parse_explanation(result.text, style.value, source_code=code))
    return out


def score(
    explanation: Explanation,
    judgments: list[LineJudgment],
    all_parts_explained: bool,
) -> ExplanationScore:
    """Aggregate rater judgments into a score.  Judgments must address every
    step exactly once; order does not matter."""
    indices = sorted(j.step_index for j in judgments)
    expected = list(range(1, len(explanation.steps) + 1))
    if indices != expected:
        raise ValidationError(
            f"judgments must cover steps {expected} exactly once, got {indices}"
        )
    correct = sum(1 for j in judgments if j.verdict is JudgmentVerdict.CORRECT)
    return ExplanationScore(
        all_parts_explained=all_parts_explained,
        total_lines=len(explanation.steps),
        correct_lines=correct,
    )


@dataclass(frozen=True)
class CorpusSummary:
    """Aggregate over a set of explanation scores: corpus accuracy is the
    ratio of summed counts, not the mean of per-item ratios."""

    explanations: int
    all_parts_count: int
    total_lines: int
    correct_lines: int

    @property
    def all_parts_percent(self) -> float | None:
        if not self.explanations:
            return None
        return round(100.0 * self.all_parts_count / self.explanations, 1)

    @property
    def accuracy_percent(self) -> float | None:
        if not self.total_lines:
            return None
        return round(100.0 * self.correct_lines / self.total_lines, 1)

    def to_dict(self) -> dict:
        return {
            "explanations": self.explanations,
            "all_parts_count": self.all_parts_count,
            "all_parts_percent": self.all_parts_percent,
            "total_lines": self.total_lines,
            "correct_lines": self.correct_lines,
            "accuracy_percent": self.accuracy_percent,
        }


def aggregate(scores: list[ExplanationScore]) -> CorpusSummary:
    return CorpusSummary(
        explanations=len(scores),
        all_parts_count=sum(1 for s in scores if s.all_parts_explained),
        total_lines=sum(s.total_lines for s in scores),
        correct_lines=sum(s.correct_lines for s in scores),
    )
