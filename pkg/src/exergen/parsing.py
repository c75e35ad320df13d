"""Marker-delimited parsing of completion text into structured bundles.

Generated exercises carry their sections behind full-line double-dash markers
(``--Keywords--``, ``--Problem statement--``, ``--Sample solution--``,
``--Tests--``).  Parsing is total: any byte string yields a bundle, missing
markers simply leave fields absent.  Completions start mid problem statement
(the prompt ends right after ``--Problem statement--``), so unmarked leading
text is assigned to the problem statement.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace

MARKER_KEYWORDS = "--Keywords--"
MARKER_PROBLEM = "--Problem statement--"
MARKER_SOLUTION = "--Sample solution--"
MARKER_TESTS = "--Tests--"

SECTION_MARKERS = (MARKER_KEYWORDS, MARKER_PROBLEM, MARKER_SOLUTION, MARKER_TESTS)

FENCE = '"""'

_ENUMERATOR_RE = re.compile(r"^(\d+)\.(?:\s+|$)")


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


@dataclass(frozen=True)
class Provenance:
    """Where a bundle came from; timestamp and latency are volatile and never
    contribute to content addressing."""

    prime_id: str | None = None
    keyword_set: dict | None = None
    config: dict | None = None
    backend_id: str | None = None
    timestamp: str | None = None

    def to_dict(self) -> dict:
        return {
            "prime_id": self.prime_id,
            "keyword_set": self.keyword_set,
            "config": self.config,
            "backend_id": self.backend_id,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Provenance":
        return cls(
            prime_id=data.get("prime_id"),
            keyword_set=data.get("keyword_set"),
            config=data.get("config"),
            backend_id=data.get("backend_id"),
            timestamp=data.get("timestamp"),
        )


def bundle_digest(raw_text: str, provenance: Provenance) -> str:
    """Content address for a bundle: raw text plus the stable provenance
    fields.  Timestamps are excluded so replayed runs produce equal ids."""
    stable = {
        "raw_text": raw_text,
        "prime_id": provenance.prime_id,
        "keyword_set": provenance.keyword_set,
        "config": provenance.config,
        "backend_id": provenance.backend_id,
    }
    payload = json.dumps(stable, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExerciseBundle:
    """One generated exercise: the four extracted sections plus the raw
    completion they were extracted from."""

    id: str
    raw_text: str
    keywords: tuple[str, ...] | None = None
    problem_statement: str | None = None
    sample_solution: str | None = None
    tests: str | None = None
    provenance: Provenance = field(default_factory=Provenance)
    warnings: tuple[str, ...] = ()

    @property
    def has_problem_statement(self) -> bool:
        return bool(self.problem_statement and self.problem_statement.strip())

    @property
    def has_sample_solution(self) -> bool:
        return bool(self.sample_solution and self.sample_solution.strip())

    @property
    def has_tests(self) -> bool:
        return bool(self.tests and self.tests.strip())

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "raw_text": self.raw_text,
            "keywords": list(self.keywords) if self.keywords is not None else None,
            "problem_statement": self.problem_statement,
            "sample_solution": self.sample_solution,
            "tests": self.tests,
            "provenance": self.provenance.to_dict(),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExerciseBundle":
        keywords = data.get("keywords")
        return cls(
            id=data["id"],
            raw_text=data["raw_text"],
            keywords=tuple(keywords) if keywords is not None else None,
            problem_statement=data.get("problem_statement"),
            sample_solution=data.get("sample_solution"),
            tests=data.get("tests"),
            provenance=Provenance.from_dict(data.get("provenance") or {}),
            warnings=tuple(data.get("warnings") or ()),
        )


def split_sections(text: str) -> tuple[str | None, dict[str, str], list[str]]:
    """Scan marker-delimited text into sections.

    Returns ``(leading, sections, warnings)`` where ``leading`` is the
    trimmed unmarked text before the first marker (None when blank), and
    ``sections`` maps marker -> trimmed content.  Rules:

    - a marker is a line equal to one of the four section markers, nothing
      else on the line (case-sensitive);
    - an opening triple-quote fence on the very first line is skipped;
    - any later line starting with the fence terminates the final section;
    - on duplicate markers the first occurrence wins, later ones are
      recorded as warnings and their content dropped.
    """
    lines = normalize_newlines(text).split("\n")
    warnings: list[str] = []
    buckets: dict[str, list[str]] = {}
    leading: list[str] = []
    dropped: list[str] = []
    current = leading

    start = 0
    if lines and lines[0].startswith(FENCE):
        start = 1

    for line in lines[start:]:
        if line in SECTION_MARKERS:
            if line in buckets:
                warnings.append(f"duplicate marker {line} ignored")
                current = dropped
            else:
                buckets[line] = []
                current = buckets[line]
            continue
        if line.startswith(FENCE):
            break
        current.append(line)

    sections = {marker: "\n".join(bucket).strip() for marker, bucket in buckets.items()}
    leading_text = "\n".join(leading).strip()
    return (leading_text or None), sections, warnings


def _keyword_lines(section: str) -> tuple[str, ...]:
    return tuple(line.strip() for line in section.split("\n") if line.strip())


def parse_bundle(raw: str, provenance: Provenance | None = None) -> ExerciseBundle:
    """Parse a raw completion into an :class:`ExerciseBundle`.  Total: never
    raises, whatever the input text."""
    provenance = provenance or Provenance()
    raw_text = normalize_newlines(raw)
    leading, sections, warnings = split_sections(raw_text)

    problem_statement = sections.get(MARKER_PROBLEM)
    if leading is not None:
        if MARKER_PROBLEM in sections:
            warnings.append(
                "unmarked leading text used as problem statement; "
                f"explicit {MARKER_PROBLEM} section ignored"
            )
        problem_statement = leading

    keywords_section = sections.get(MARKER_KEYWORDS)
    keywords = _keyword_lines(keywords_section) if keywords_section is not None else None

    return ExerciseBundle(
        id=bundle_digest(raw_text, provenance),
        raw_text=raw_text,
        keywords=keywords,
        problem_statement=problem_statement,
        sample_solution=sections.get(MARKER_SOLUTION),
        tests=sections.get(MARKER_TESTS),
        provenance=provenance,
        warnings=tuple(warnings),
    )


def with_tests(bundle: ExerciseBundle, tests: str) -> ExerciseBundle:
    """A copy of ``bundle`` completed with backfilled tests; the id is
    recomputed because the content changed.  An existing (blank) tests
    marker is truncated away so the raw text re-parses to the same fields."""
    lines = bundle.raw_text.split("\n")
    if MARKER_TESTS in lines:
        lines = lines[: lines.index(MARKER_TESTS)]
    body = "\n".join(lines).rstrip("\n")
    new_raw = body + "\n" + MARKER_TESTS + "\n" + tests.strip() + "\n"
    updated = replace(
        bundle,
        raw_text=new_raw,
        tests=tests.strip(),
        id=bundle_digest(new_raw, bundle.provenance),
    )
    return updated


@dataclass(frozen=True)
class Explanation:
    """A generated code explanation split into its enumerated steps."""

    source_code: str
    style: str
    steps: tuple[str, ...]
    raw_text: str
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "source_code": self.source_code,
            "style": self.style,
            "steps": list(self.steps),
            "raw_text": self.raw_text,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Explanation":
        return cls(
            source_code=data["source_code"],
            style=data["style"],
            steps=tuple(data.get("steps") or ()),
            raw_text=data["raw_text"],
            warnings=tuple(data.get("warnings") or ()),
        )


def parse_explanation(raw: str, style: str, source_code: str = "") -> Explanation:
    """Parse a raw explanation completion.

    Step-by-step completions are split on line-leading ``N.`` enumerators.
    The prompt already primed ``1.``, so a completion that starts without an
    enumerator is the tail of step 1.  Non-enumerated styles keep the whole
    trimmed text as a single step.  Total: never raises.
    """
    raw_text = normalize_newlines(raw)
    warnings: list[str] = []

    if style != "step_by_step":
        trimmed = raw_text.strip()
        steps = (trimmed,) if trimmed else ()
        return Explanation(
            source_code=source_code,
            style=style,
            steps=steps,
            raw_text=raw_text,
            warnings=(),
        )

    numbered: list[tuple[int, list[str]]] = []
    for line in raw_text.split("\n"):
        match = _ENUMERATOR_RE.match(line)
        if match:
            numbered.append((int(match.group(1)), [line[match.end():]]))
        elif numbered:
            numbered[-1][1].append(line)
        elif line.strip():
            # Tail of the primed "1." enumerator.
            numbered.append((1, [line]))

    steps: list[str] = []
    numbers: list[int] = []
    for number, chunk in numbered:
        text = "\n".join(chunk).strip()
        if not text:
            warnings.append(f"empty step {number} dropped")
            continue
        steps.append(text)
        numbers.append(number)

    if numbers and numbers != list(range(1, len(numbers) + 1)):
        warnings.append(f"non-contiguous step enumeration: {numbers}")

    return Explanation(
        source_code=source_code,
        style=style,
        steps=tuple(steps),
        raw_text=raw_text,
        warnings=tuple(warnings),
    )
