"""Isolated execution of exercise code.

Every run launches the Python runtime on a copy of the shim inside a fresh
temporary directory with a scrubbed environment, a wall-clock timeout and
shim-level socket denial.  Results come back as the shim's fenced JSON
document.  This is desk-scale isolation for generated (not hostile) code;
wrap runs in an OS container before feeding untrusted input.
"""

from __future__ import annotations

import base64
import enum
import json
import os
import shutil
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import shim as shim_module
from .errors import InfrastructureError, ValidationError

DEFAULT_TIMEOUT = 10.0
DEFAULT_MAX_OUTPUT = 1024 * 1024

_SHIM_SOURCE_PATH = Path(shim_module.__file__)
_SHIM_FILENAME = "_exergen_shim.py"


@dataclass(frozen=True)
class ExecLimits:
    wall_clock_timeout: float = DEFAULT_TIMEOUT
    max_output_bytes: int = DEFAULT_MAX_OUTPUT

    def __post_init__(self):
        if self.wall_clock_timeout <= 0:
            raise ValidationError("wall_clock_timeout must be positive")
        if self.max_output_bytes < 1:
            raise ValidationError("max_output_bytes must be positive")


class RunStatus(str, enum.Enum):
    OK = "ok"
    RUNTIME_ERROR = "runtime_error"
    TIMEOUT = "timeout"
    LAUNCH_FAILURE = "launch_failure"


class TestStatus(str, enum.Enum):
    __test__ = False  # not a pytest class

    ALL_PASSED = "all_passed"
    SOME_FAILED = "some_failed"
    ERRORED = "errored"
    NO_TESTS = "no_tests"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class RunOutcome:
    status: RunStatus
    stdout: str
    stderr: str
    duration: float
    exit_code: int | None


@dataclass(frozen=True)
class TestFailure:
    __test__ = False

    test_name: str
    message: str


@dataclass(frozen=True)
class TestOutcome:
    """Aggregated unit-test verdicts.  ``total``/``passed`` count assertion
    checkpoints (every top-level assert call; a passing assertion-free
    method counts as one), ``failures`` lists non-passing test methods."""

    __test__ = False

    status: TestStatus
    total: int
    passed: int
    failures: tuple[TestFailure, ...]
    duration: float = 0.0


@dataclass(frozen=True)
class CoverageReport:
    """Statement coverage of a solution under its tests; ``fraction`` is
    None when coverage is not applicable."""

    statements_total: int
    statements_hit: int
    fraction: float | None

    @classmethod
    def not_applicable(cls) -> "CoverageReport":
        return cls(statements_total=0, statements_hit=0, fraction=None)

    @property
    def applicable(self) -> bool:
        return self.fraction is not None

    def to_dict(self) -> dict:
        return {
            "statements_total": self.statements_total,
            "statements_hit": self.statements_hit,
            "fraction": self.fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoverageReport":
        return cls(
            statements_total=data["statements_total"],
            statements_hit=data["statements_hit"],
            fraction=data["fraction"],
        )


def _decode(field: str) -> str:
    return base64.b64decode(field).decode("utf-8", errors="replace") if field else ""


def _extract_document(stdout_bytes: bytes) -> dict | None:
    """The last complete fenced document on the stream, or None."""
    text = stdout_bytes.decode("utf-8", errors="replace")
    begin = text.rfind(shim_module.FENCE_BEGIN)
    if begin < 0:
        return None
    end = text.find(shim_module.FENCE_END, begin)
    if end < 0:
        return None
    payload = text[begin + len(shim_module.FENCE_BEGIN):end].strip()
    try:
        return json.loads(payload)
    except ValueError:
        return None


class Sandbox:
    """Shareable harness; each execution is an independent child process and
    the number of concurrent sandboxes is capped."""

    def __init__(
        self,
        limits: ExecLimits | None = None,
        max_concurrent: int | None = None,
        python: str = sys.executable,
    ):
        self.limits = limits or ExecLimits()
        self._python = python
        self._semaphore = threading.BoundedSemaphore(max_concurrent or os.cpu_count() or 4)

    def _invoke(
        self,
        mode: str,
        solution: str,
        tests: str | None,
        stdin_script: str | None,
    ) -> tuple[dict | None, subprocess.CompletedProcess | None, float, bool]:
        """Returns (document, process, duration, timed_out)."""
        workdir = tempfile.mkdtemp(prefix="exergen-sandbox-")
        try:
            root = Path(workdir)
            (root / "solution.py").write_text(solution, encoding="utf-8")
            argv = [self._python, _SHIM_FILENAME, mode, "solution.py"]
            if tests is not None:
                (root / "tests.py").write_text(tests, encoding="utf-8")
                argv.append("tests.py")
            else:
                argv.append("-")
            if stdin_script is not None:
                (root / "stdin.txt").write_text(stdin_script, encoding="utf-8")
                argv.append("stdin.txt")
            shutil.copyfile(_SHIM_SOURCE_PATH, root / _SHIM_FILENAME)

            env = {
                "PATH": "/usr/bin:/bin",
                "PYTHONDONTWRITEBYTECODE": "1",
                "PYTHONIOENCODING": "utf-8",
                "LC_ALL": "C.UTF-8",
                "EXERGEN_SHIM_MAX_OUTPUT": str(self.limits.max_output_bytes),
            }
            started = time.monotonic()
            with self._semaphore:
                try:
                    proc = subprocess.run(
                        argv,
                        cwd=workdir,
                        env=env,
                        stdin=subprocess.DEVNULL,
                        capture_output=True,
                        timeout=self.limits.wall_clock_timeout,
                    )
                except subprocess.TimeoutExpired:
                    return None, None, time.monotonic() - started, True
                except (FileNotFoundError, PermissionError):
                    return None, None, time.monotonic() - started, False
            duration = time.monotonic() - started
            return _extract_document(proc.stdout), proc, duration, False
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    def run_solution(self, solution: str, stdin_script: str | None = None) -> RunOutcome:
        """Execute a sample solution as a standalone program."""
        if not solution.strip():
            raise ValidationError("solution must be non-blank")
        doc, proc, duration, timed_out = self._invoke("run", solution, None, stdin_script)
        if timed_out:
            return RunOutcome(RunStatus.TIMEOUT, "", "", duration, None)
        if doc is None:
            return RunOutcome(
                RunStatus.LAUNCH_FAILURE,
                "",
                proc.stderr.decode("utf-8", errors="replace") if proc else "",
                duration,
                proc.returncode if proc else None,
            )
        status = RunStatus.OK if doc["status"] == shim_module.STATUS_OK else RunStatus.RUNTIME_ERROR
        return RunOutcome(
            status,
            _decode(doc["stdout_b64"]),
            _decode(doc["stderr_b64"]),
            duration,
            proc.returncode,
        )

    def run_tests(self, solution: str, tests: str) -> TestOutcome:
        """Run the provided unit tests against the solution's top-level names."""
        outcome, _ = self._test_invocation("test", solution, tests)
        return outcome

    def measure_coverage(self, solution: str, tests: str) -> tuple[TestOutcome, CoverageReport]:
        """Run the tests under line tracing restricted to the solution module."""
        return self._test_invocation("coverage", solution, tests)

    def _test_invocation(
        self, mode: str, solution: str, tests: str
    ) -> tuple[TestOutcome, CoverageReport]:
        if not solution.strip():
            raise ValidationError("solution must be non-blank")
        if not tests.strip():
            return (
                TestOutcome(TestStatus.NO_TESTS, 0, 0, (), 0.0),
                CoverageReport.not_applicable(),
            )
        doc, proc, duration, timed_out = self._invoke(mode, solution, tests, None)
        if timed_out:
            return (
                TestOutcome(TestStatus.TIMEOUT, 0, 0, (), duration),
                CoverageReport.not_applicable(),
            )
        if doc is None:
            stderr = proc.stderr.decode("utf-8", errors="replace") if proc else ""
            raise InfrastructureError(f"sandbox launch failed: {stderr[:500]}")

        status = TestStatus(doc["status"]) if mode != "run" else None
        verdicts = doc.get("tests", [])
        checkpoints = doc.get("checkpoints") or {}
        total = checkpoints.get("total", len(verdicts))
        passed = checkpoints.get("passed", sum(1 for v in verdicts if v["verdict"] == "pass"))
        failures = tuple(
            TestFailure(v["name"], v["message"]) for v in verdicts if v["verdict"] != "pass"
        )
        outcome = TestOutcome(status, total, passed, failures, duration)

        if mode == "coverage" and doc["status"] in (
            shim_module.STATUS_ALL_PASSED,
            shim_module.STATUS_SOME_FAILED,
        ):
            total = len(doc.get("executable_lines", []))
            hit = len(doc.get("covered_lines", []))
            report = CoverageReport(
                statements_total=total,
                statements_hit=hit,
                fraction=(hit / total) if total > 0 else None,
            )
        else:
            report = CoverageReport.not_applicable()
        return outcome, report
