"""Readiness rubrics for generated exercises.

The automated rubric asks three machine-checkable questions per bundle: does
it have a runnable sample solution, does the solution pass the bundle's own
tests, and how much of the solution do the tests cover.  Verdict
dependencies are strict: runnability is NA without a solution, the pass
verdict is NA without both parts, and coverage only counts once the tests
pass (the raw measured fraction is kept alongside for research use).

The manual rubric stores human Yes/No/Maybe judgments per bundle and rater;
Maybe values are later resolved to Yes or No by at least two raters working
in tandem.

Also implements the two budgeted repair loops: regenerate-until-tests-pass
and test backfill for bundles that came back without tests.
"""

from __future__ import annotations

import datetime
import enum
from dataclasses import dataclass, field

from .errors import InfrastructureError, RegenerationExhausted, ValidationError
from .gateway import GenerationConfig
from .parsing import ExerciseBundle, Provenance, parse_bundle, with_tests
from .prompts import (
    KeywordSet,
    PrimingExercise,
    build_exercise_prompt,
    build_test_backfill_prompt,
)
from .sandbox import CoverageReport, RunStatus, Sandbox, TestStatus


class Verdict(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    NA = "NA"


class ManualVerdict(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    MAYBE = "Maybe"
    NA = "NA"


MANUAL_FIELDS = (
    "sensible",
    "novel",
    "solution_matches_statement",
    "topic_matches_context",
    "uses_function_or_class",
    "uses_list_or_dictionary",
)

# Topicality questions are conditioned on the concept having been part of the
# priming; only these may be NA.
NA_ALLOWED_FIELDS = (
    "topic_matches_context",
    "uses_function_or_class",
    "uses_list_or_dictionary",
)


@dataclass(frozen=True)
class AutoRubricReport:
    has_sample_solution: bool
    solution_runnable: Verdict
    has_tests: bool
    tests_pass: Verdict
    coverage: CoverageReport
    raw_coverage: CoverageReport = field(default_factory=CoverageReport.not_applicable)

    def __post_init__(self):
        if (self.solution_runnable is Verdict.NA) != (not self.has_sample_solution):
            raise ValidationError("solution_runnable must be NA exactly when no solution")
        if (self.tests_pass is Verdict.NA) != (
            not (self.has_sample_solution and self.has_tests)
        ):
            raise ValidationError("tests_pass must be NA exactly when a part is missing")
        if self.coverage.applicable and self.tests_pass is not Verdict.YES:
            raise ValidationError("coverage only applies when the tests pass")

    def to_dict(self) -> dict:
        return {
            "has_sample_solution": self.has_sample_solution,
            "solution_runnable": self.solution_runnable.value,
            "has_tests": self.has_tests,
            "tests_pass": self.tests_pass.value,
            "coverage": self.coverage.to_dict(),
            "raw_coverage": self.raw_coverage.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AutoRubricReport":
        return cls(
            has_sample_solution=data["has_sample_solution"],
            solution_runnable=Verdict(data["solution_runnable"]),
            has_tests=data["has_tests"],
            tests_pass=Verdict(data["tests_pass"]),
            coverage=CoverageReport.from_dict(data["coverage"]),
            raw_coverage=CoverageReport.from_dict(data["raw_coverage"]),
        )


def auto_evaluate(bundle: ExerciseBundle, sandbox: Sandbox) -> AutoRubricReport:
    """Compute the automated rubric for one parsed bundle.

    Harness faults (missing runtime, shim crash) raise
    :class:`InfrastructureError`; they are never reported as No verdicts.
    """
    has_solution = bundle.has_sample_solution
    has_tests = bundle.has_tests

    runnable = Verdict.NA
    if has_solution:
        run = sandbox.run_solution(bundle.sample_solution)
        if run.status is RunStatus.LAUNCH_FAILURE:
            raise InfrastructureError(f"sandbox launch failed: {run.stderr[:500]}")
        runnable = Verdict.YES if run.status is RunStatus.OK else Verdict.NO

    tests_pass = Verdict.NA
    raw_coverage = CoverageReport.not_applicable()
    if has_solution and has_tests:
        outcome, raw_coverage = sandbox.measure_coverage(bundle.sample_solution, bundle.tests)
        tests_pass = Verdict.YES if outcome.status is TestStatus.ALL_PASSED else Verdict.NO

    coverage = raw_coverage if tests_pass is Verdict.YES else CoverageReport.not_applicable()
    return AutoRubricReport(
        has_sample_solution=has_solution,
        solution_runnable=runnable,
        has_tests=has_tests,
        tests_pass=tests_pass,
        coverage=coverage,
        raw_coverage=raw_coverage,
    )


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


@dataclass(frozen=True)
class RegenerationAttempt:
    bundle: ExerciseBundle | None
    report: AutoRubricReport | None
    error: str | None = None


@dataclass(frozen=True)
class RegenerationOutcome:
    bundle: ExerciseBundle
    report: AutoRubricReport
    attempts: tuple[RegenerationAttempt, ...]


def generate_bundle(
    backend,
    prime: PrimingExercise,
    keywords: KeywordSet,
    config: GenerationConfig,
    sample_tag: str = "",
    now=_utc_now,
) -> ExerciseBundle:
    """One generate-and-parse pass: prompt, complete, parse, stamp provenance."""
    prompt = build_exercise_prompt(prime, keywords)
    result = backend.complete(prompt, config, sample_tag)
    provenance = Provenance(
        prime_id=prime.id,
        keyword_set=keywords.to_dict(),
        config=config.to_dict(),
        backend_id=result.backend_id,
        timestamp=now(),
    )
    return parse_bundle(result.text, provenance)


def regenerate_until_valid(
    backend,
    prime: PrimingExercise,
    keywords: KeywordSet,
    config: GenerationConfig,
    sandbox: Sandbox,
    budget: int = 5,
    now=_utc_now,
) -> RegenerationOutcome:
    """Generate repeatedly until the bundle's own tests pass or the budget is
    spent.  Performs at most ``budget`` backend calls; every attempt's report
    is returned for audit.  Raises :class:`RegenerationExhausted` (carrying
    all attempts) when no attempt passes; backend errors abort immediately
    with the partial audit trail attached to the exception."""
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    attempts: list[RegenerationAttempt] = []
    for attempt_no in range(1, budget + 1):
        try:
            bundle = generate_bundle(
                backend, prime, keywords, config, sample_tag=f"attempt:{attempt_no}", now=now
            )
        except Exception as exc:
            exc.attempts = tuple(attempts)  # partial audit trail
            raise
        report = auto_evaluate(bundle, sandbox)
        attempts.append(RegenerationAttempt(bundle=bundle, report=report))
        if report.tests_pass is Verdict.YES:
            return RegenerationOutcome(bundle=bundle, report=report, attempts=tuple(attempts))
    raise RegenerationExhausted(
        f"no passing bundle within {budget} attempts", attempts
    )


def backfill_tests(
    backend,
    bundle: ExerciseBundle,
    config: GenerationConfig,
    sandbox: Sandbox,
    budget: int = 5,
) -> tuple[ExerciseBundle, tuple[RegenerationAttempt, ...]]:
    """Prompt for tests only, using the bundle's own statement and solution
    rendered as an exercise block truncated at the tests marker.  The first
    candidate suite that fully passes is accepted and merged into the
    bundle."""
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if not bundle.has_problem_statement or not bundle.has_sample_solution:
        raise ValidationError("test backfill needs a problem statement and a sample solution")
    if bundle.has_tests:
        raise ValidationError("bundle already has tests")

    prompt = build_test_backfill_prompt(
        bundle.keywords, bundle.problem_statement, bundle.sample_solution
    )
    attempts: list[RegenerationAttempt] = []
    for attempt_no in range(1, budget + 1):
        try:
            result = backend.complete(prompt, config, sample_tag=f"attempt:{attempt_no}")
        except Exception as exc:
            exc.attempts = tuple(attempts)
            raise
        candidate = result.text.strip()
        if candidate:
            outcome, _ = sandbox.measure_coverage(bundle.sample_solution, candidate)
            accepted = outcome.status is TestStatus.ALL_PASSED
        else:
            accepted = False
        completed = with_tests(bundle, candidate) if accepted else None
        report = auto_evaluate(completed, sandbox) if completed is not None else None
        attempts.append(
            RegenerationAttempt(
                bundle=completed,
                report=report,
                error=None if accepted else "candidate tests rejected",
            )
        )
        if accepted:
            return completed, tuple(attempts)
    raise RegenerationExhausted(f"no passing tests within {budget} attempts", attempts)


@dataclass(frozen=True)
class ManualRubricRecord:
    """One rater's Table-style judgment of one bundle."""

    bundle_id: str
    rater_id: str
    sensible: ManualVerdict
    novel: ManualVerdict
    solution_matches_statement: ManualVerdict
    topic_matches_context: ManualVerdict
    uses_function_or_class: ManualVerdict
    uses_list_or_dictionary: ManualVerdict
    notes: str = ""

    def __post_init__(self):
        if not self.bundle_id or not self.rater_id:
            raise ValidationError("bundle_id and rater_id are required")
        for name in MANUAL_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, ManualVerdict):
                raise ValidationError(f"{name} must be a Yes/No/Maybe verdict")
            if value is ManualVerdict.NA and name not in NA_ALLOWED_FIELDS:
                raise ValidationError(f"{name} cannot be NA")

    def to_dict(self) -> dict:
        doc = {name: getattr(self, name).value for name in MANUAL_FIELDS}
        doc.update(
            {"bundle_id": self.bundle_id, "rater_id": self.rater_id, "notes": self.notes}
        )
        return doc

    @classmethod
    def from_dict(cls, data: dict) -> "ManualRubricRecord":
        kwargs = {name: ManualVerdict(data[name]) for name in MANUAL_FIELDS}
        return cls(
            bundle_id=data["bundle_id"],
            rater_id=data["rater_id"],
            notes=data.get("notes", ""),
            **kwargs,
        )


@dataclass(frozen=True)
class ConsensusResolution:
    """Consensus outcome turning one stored Maybe into Yes or No."""

    record_id: str
    bundle_id: str
    field_name: str
    resolved: Verdict
    resolvers: tuple[str, ...]
    rationale: str = ""

    def __post_init__(self):
        if self.field_name not in MANUAL_FIELDS:
            raise ValidationError(f"unknown manual rubric field: {self.field_name}")
        if self.resolved not in (Verdict.YES, Verdict.NO):
            raise ValidationError("a Maybe resolves to Yes or No only")
        if len(self.resolvers) < 2:
            raise ValidationError("consensus needs at least two resolvers")

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "bundle_id": self.bundle_id,
            "field_name": self.field_name,
            "resolved": self.resolved.value,
            "resolvers": list(self.resolvers),
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConsensusResolution":
        return cls(
            record_id=data["record_id"],
            bundle_id=data["bundle_id"],
            field_name=data["field_name"],
            resolved=Verdict(data["resolved"]),
            resolvers=tuple(data["resolvers"]),
            rationale=data.get("rationale", ""),
        )


def validate_resolution(record: ManualRubricRecord, field_name: str) -> None:
    """A resolution may only target a field whose stored value is Maybe."""
    if field_name not in MANUAL_FIELDS:
        raise ValidationError(f"unknown manual rubric field: {field_name}")
    if getattr(record, field_name) is not ManualVerdict.MAYBE:
        raise ValidationError(
            f"field {field_name!r} is {getattr(record, field_name).value}, not Maybe"
        )


def effective_values(
    records: list[tuple[str, ManualRubricRecord]],
    resolutions: list[ConsensusResolution],
    primary_rater: str | None = None,
) -> dict[str, ManualVerdict] | None:
    """Effective manual verdicts for one bundle.

    ``records`` is (record id, record) in recording order.  The designated
    primary rater is the first recorded one unless overridden.  Field value =
    consensus resolution when present, else the primary record's raw value.
    """
    if not records:
        return None
    if primary_rater is not None:
        chosen = [(rid, rec) for rid, rec in records if rec.rater_id == primary_rater]
        if not chosen:
            raise ValidationError(f"no record by rater {primary_rater!r}")
        record_id, record = chosen[0]
    else:
        record_id, record = records[0]

    by_field = {res.field_name: res for res in resolutions if res.record_id == record_id}
    out: dict[str, ManualVerdict] = {}
    for name in MANUAL_FIELDS:
        if name in by_field:
            out[name] = ManualVerdict(by_field[name].resolved.value)
        else:
            out[name] = getattr(record, name)
    return out
