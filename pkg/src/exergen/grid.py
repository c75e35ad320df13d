"""Cartesian generation experiments and their aggregate statistics.

A grid spec crosses contextual keywords, programmatic concept sets, seed
primes, temperatures and a repeat count into one job per combination.  "No
keyword" is an explicit grid member (the ``none`` context / concept set),
not a missing dimension, so the combination counts stay literal.  Jobs run
under bounded parallelism with per-job error isolation and a JSON-lines
checkpoint for crash-safe resume.
"""

from __future__ import annotations

import itertools
import json
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .gateway import GenerationConfig
from .prompts import KeywordSet, PrimingExercise
from .rubric import AutoRubricReport, Verdict, auto_evaluate, generate_bundle
from .sandbox import Sandbox

NONE_OPTION = "none"

# The built-in keyword matrix: nine contextual themes plus the no-context
# option, and two programmatic concept sets plus the no-concepts option.
BUILTIN_CONTEXTS = (
    "hiking",
    "fishing",
    "relationships",
    "football",
    "music",
    "health",
    "ice hockey",
    "books",
    "cooking",
    None,
)
BUILTIN_CONCEPT_SETS = (
    ("function", ("function", "parameters", "dictionary", "dict comprehension", "arithmetics")),
    ("class", ("class", "list", "list comprehension", "conditional")),
    (NONE_OPTION, None),
)


@dataclass(frozen=True)
class GridSpec:
    contexts: tuple[str | None, ...]
    concept_sets: tuple[tuple[str, tuple[str, ...] | None], ...]
    primes: tuple[str, ...]
    temperatures: tuple[float, ...]
    repeats: int

    def __post_init__(self):
        if not self.contexts or not self.concept_sets or not self.primes:
            raise ValidationError("contexts, concept_sets and primes must be non-empty")
        if not self.temperatures:
            raise ValidationError("temperatures must be non-empty")
        if self.repeats < 1:
            raise ValidationError("repeats must be >= 1")
        names = [name for name, _ in self.concept_sets]
        if len(set(names)) != len(names):
            raise ValidationError("concept set names must be unique")

    @property
    def job_count(self) -> int:
        return (
            len(self.contexts)
            * len(self.concept_sets)
            * len(self.primes)
            * len(self.temperatures)
            * self.repeats
        )

    @classmethod
    def from_toml(cls, path: str | Path) -> "GridSpec":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        contexts = tuple(
            None if str(c).lower() == NONE_OPTION else str(c) for c in data["contexts"]
        )
        concept_sets = tuple(
            (name, tuple(kws) if kws else None)
            for name, kws in data["concept_sets"].items()
        )
        return cls(
            contexts=contexts,
            concept_sets=concept_sets,
            primes=tuple(data["primes"]),
            temperatures=tuple(float(t) for t in data["temperatures"]),
            repeats=int(data.get("repeats", 1)),
        )


def builtin_grid_spec(primes: tuple[str, ...] = ("speeding_check", "converter")) -> GridSpec:
    """The full built-in matrix: 10 contexts x 3 concept sets x 2 primes x
    2 temperatures x 2 repeats = 240 jobs."""
    return GridSpec(
        contexts=BUILTIN_CONTEXTS,
        concept_sets=BUILTIN_CONCEPT_SETS,
        primes=primes,
        temperatures=(0.0, 0.75),
        repeats=2,
    )


@dataclass(frozen=True)
class GridJob:
    context: str | None
    concept_set: str
    concepts: tuple[str, ...] | None
    prime_id: str
    temperature: float
    repeat_index: int

    @property
    def coordinates(self) -> str:
        context = self.context if self.context is not None else NONE_OPTION
        return (
            f"context={context}|set={self.concept_set}|prime={self.prime_id}"
            f"|temperature={self.temperature}|repeat={self.repeat_index}"
        )

    def keyword_set(self) -> KeywordSet:
        return KeywordSet(contextual=self.context, programmatic=self.concepts)


@dataclass(frozen=True)
class GridResult:
    job: GridJob
    bundle_id: str | None
    report: AutoRubricReport | None
    duration: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "coordinates": self.job.coordinates,
            "bundle_id": self.bundle_id,
            "report": self.report.to_dict() if self.report else None,
            "duration": self.duration,
            "error": self.error,
        }


def build_grid(spec: GridSpec) -> list[GridJob]:
    """Every job in the grid's cartesian product, in deterministic
    lexicographic coordinate order."""
    jobs = []
    for context, (set_name, concepts), prime_id, temperature, repeat in itertools.product(
        spec.contexts,
        spec.concept_sets,
        spec.primes,
        spec.temperatures,
        range(1, spec.repeats + 1),
    ):
        jobs.append(
            GridJob(
                context=context,
                concept_set=set_name,
                concepts=concepts,
                prime_id=prime_id,
                temperature=temperature,
                repeat_index=repeat,
            )
        )
    return jobs


def _load_checkpoint(path: Path | None) -> dict[str, dict]:
    completed: dict[str, dict] = {}
    if path is None or not path.exists():
        return completed
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            doc = json.loads(line)
            completed[doc["coordinates"]] = doc
    return completed


def run_grid(
    jobs: list[GridJob],
    backend,
    prime_library: dict[str, PrimingExercise],
    config_base: GenerationConfig,
    sandbox: Sandbox,
    store=None,
    checkpoint_path: str | Path | None = None,
    max_workers: int = 4,
) -> list[GridResult]:
    """Execute all jobs; per-job failures become error results, never abort
    the grid.  Jobs found in the checkpoint are not re-run (and cost no
    backend calls); completed jobs are appended to the checkpoint as they
    finish."""
    checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
    completed = _load_checkpoint(checkpoint_path)
    checkpoint_lock = threading.Lock()

    def execute(job: GridJob) -> GridResult:
        cached = completed.get(job.coordinates)
        if cached is not None:
            return GridResult(
                job=job,
                bundle_id=cached.get("bundle_id"),
                report=(
                    AutoRubricReport.from_dict(cached["report"])
                    if cached.get("report")
                    else None
                ),
                duration=cached.get("duration", 0.0),
                error=cached.get("error"),
            )
        started = time.monotonic()
        try:
            prime = prime_library[job.prime_id]
            config = replace(config_base, temperature=job.temperature)
            bundle = generate_bundle(
                backend,
                prime,
                job.keyword_set(),
                config,
                sample_tag=f"repeat:{job.repeat_index}",
            )
            if store is not None:
                store.put_bundle(bundle)
            report = auto_evaluate(bundle, sandbox)
            if store is not None:
                store.put_auto_report(bundle.id, report)
            result = GridResult(
                job=job,
                bundle_id=bundle.id,
                report=report,
                duration=time.monotonic() - started,
            )
        except Exception as exc:
            result = GridResult(
                job=job,
                bundle_id=None,
                report=None,
                duration=time.monotonic() - started,
                error=f"{type(exc).__name__}: {exc}",
            )
        if checkpoint_path is not None:
            with checkpoint_lock:
                with checkpoint_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(result.to_dict()) + "\n")
        return result

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(execute, jobs))


@dataclass(frozen=True)
class MetricSummary:
    numerator: int
    denominator: int

    @property
    def percentage(self) -> float | None:
        if self.denominator == 0:
            return None
        return round(100.0 * self.numerator / self.denominator, 1)

    def to_dict(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "percentage": self.percentage,
        }


@dataclass(frozen=True)
class SummaryReport:
    """Aggregate readiness statistics with conditional denominators:
    runnability out of bundles with a solution, pass rate out of bundles
    with both parts, coverage over passing suites only."""

    has_sample_solution: MetricSummary
    solution_runnable: MetricSummary
    has_tests: MetricSummary
    tests_pass: MetricSummary
    full_coverage: MetricSummary
    coverage_mean_percent: float | None
    errors: int

    def to_dict(self) -> dict:
        return {
            "has_sample_solution": self.has_sample_solution.to_dict(),
            "solution_runnable": self.solution_runnable.to_dict(),
            "has_tests": self.has_tests.to_dict(),
            "tests_pass": self.tests_pass.to_dict(),
            "full_coverage": self.full_coverage.to_dict(),
            "coverage_mean_percent": self.coverage_mean_percent,
            "errors": self.errors,
        }

    def _rows(self) -> list[tuple[str, str, str]]:
        def cell(metric: MetricSummary) -> tuple[str, str]:
            pct = f"{metric.percentage}%" if metric.percentage is not None else "n/a"
            return pct, f"{metric.numerator} / {metric.denominator}"

        mean = (
            f"{self.coverage_mean_percent}%"
            if self.coverage_mean_percent is not None
            else "n/a"
        )
        rows = [
            ("Has sample solution?", *cell(self.has_sample_solution)),
            ("Can run the sample solution?", *cell(self.solution_runnable)),
            ("Has tests?", *cell(self.has_tests)),
            ("All tests pass?", *cell(self.tests_pass)),
            (
                "Test coverage (mean over passing)",
                mean,
                f"{self.full_coverage.numerator} / {self.full_coverage.denominator}"
                " full coverage",
            ),
        ]
        return rows

    def to_markdown(self) -> str:
        lines = [
            "| Metric | Percentage | n out of N |",
            "| --- | --- | --- |",
        ]
        lines.extend(f"| {name} | {pct} | {counts} |" for name, pct, counts in self._rows())
        if self.errors:
            lines.append(f"| Jobs with infrastructure errors | | {self.errors} |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["metric,percentage,n,N"]
        for (name, pct, _), metric in zip(
            self._rows(),
            (
                self.has_sample_solution,
                self.solution_runnable,
                self.has_tests,
                self.tests_pass,
                self.full_coverage,
            ),
        ):
            pct_value = pct.rstrip("%") if pct != "n/a" else ""
            lines.append(f'"{name}",{pct_value},{metric.numerator},{metric.denominator}')
        return "\n".join(lines) + "\n"


def summarize(results: list[GridResult]) -> SummaryReport:
    """Pure aggregation of grid results into the summary shape.  Jobs whose
    evaluation errored carry no report and are excluded from denominators;
    empty denominators report an undefined percentage, never zero."""
    reports = [r.report for r in results if r.report is not None]
    errors = sum(1 for r in results if r.error is not None)

    total = len(reports)
    with_solution = [r for r in reports if r.has_sample_solution]
    runnable = [r for r in with_solution if r.solution_runnable is Verdict.YES]
    with_tests = [r for r in reports if r.has_tests]
    with_both = [r for r in reports if r.has_sample_solution and r.has_tests]
    passing = [r for r in with_both if r.tests_pass is Verdict.YES]

    fractions = [r.coverage.fraction for r in passing if r.coverage.applicable]
    mean_percent = (
        round(100.0 * sum(fractions) / len(fractions), 1) if fractions else None
    )
    full = [f for f in fractions if f == 1.0]

    return SummaryReport(
        has_sample_solution=MetricSummary(len(with_solution), total),
        solution_runnable=MetricSummary(len(runnable), len(with_solution)),
        has_tests=MetricSummary(len(with_tests), total),
        tests_pass=MetricSummary(len(passing), len(with_both)),
        full_coverage=MetricSummary(len(full), len(fractions)),
        coverage_mean_percent=mean_percent,
        errors=errors,
    )


def bundles_from_results(results: list[GridResult]) -> list[str]:
    return [r.bundle_id for r in results if r.bundle_id]


def grid_document(
    spec: GridSpec, results: list[GridResult], summary: SummaryReport
) -> dict:
    """The stored grid entity: spec echo, per-job results, summary."""
    return {
        "spec": {
            "contexts": [c if c is not None else NONE_OPTION for c in spec.contexts],
            "concept_sets": {
                name: list(kws) if kws else [] for name, kws in spec.concept_sets
            },
            "primes": list(spec.primes),
            "temperatures": list(spec.temperatures),
            "repeats": spec.repeats,
        },
        "results": [r.to_dict() for r in results],
        "summary": summary.to_dict(),
    }
