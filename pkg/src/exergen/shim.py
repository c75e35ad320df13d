"""In-sandbox harness: runs a solution, its tests, or a coverage-traced test
pass, and reports one fenced JSON document on stdout.

This file is self-contained (stdlib only) because the sandbox copies it into
a fresh working directory and invokes it directly:

    python shim.py <mode> <solution> [tests|-] [stdin_script]

Modes: ``run`` executes the solution top-level, ``test`` runs discovered
unit-test classes against the solution's names, ``coverage`` additionally
traces which solution lines execute.  Exactly one fenced document is
emitted, last on the stream, whatever the solution printed before it.
The process exits nonzero without a document only on shim-internal faults.
"""

from __future__ import annotations

import base64
import io
import json
import os
import sys
import traceback
import unittest

SCHEMA_VERSION = 1
FENCE_BEGIN = "=====EXERGEN-SHIM-RESULT-BEGIN====="
FENCE_END = "=====EXERGEN-SHIM-RESULT-END====="

STATUS_OK = "ok"
STATUS_RUNTIME_ERROR = "runtime_error"
STATUS_ALL_PASSED = "all_passed"
STATUS_SOME_FAILED = "some_failed"
STATUS_ERRORED = "errored"
STATUS_NO_TESTS = "no_tests"

MAX_OUTPUT_BYTES = int(os.environ.get("EXERGEN_SHIM_MAX_OUTPUT", str(1024 * 1024)))


def _deny_sockets() -> None:
    import socket

    def _denied(*_args, **_kwargs):
        raise PermissionError("socket creation is disabled inside the sandbox")

    socket.socket = _denied
    socket.socketpair = _denied
    socket.create_connection = _denied


def _capped_b64(buffer: io.StringIO) -> str:
    data = buffer.getvalue().encode("utf-8", errors="replace")[:MAX_OUTPUT_BYTES]
    return base64.b64encode(data).decode("ascii")


def _executable_lines(source: str, filename: str) -> list[int]:
    """Line numbers that can fire trace events: the union of the line tables
    of the compiled module and every nested code object."""
    lines: set[int] = set()

    def walk(code) -> None:
        for _start, _end, lineno in code.co_lines():
            if lineno is not None:
                lines.add(lineno)
        for const in code.co_consts:
            if hasattr(const, "co_lines"):
                walk(const)

    walk(compile(source, filename, "exec"))
    return sorted(lines)


def _discover_tests(namespace: dict, new_names: list[str]) -> list[tuple[str, type, str]]:
    """Test methods in definition order: (display name, class, method) for
    every class named Test* that the tests source defined, over its methods
    named test*."""
    found = []
    for name in new_names:
        obj = namespace.get(name)
        if isinstance(obj, type) and name.startswith("Test"):
            for attr in list(vars(obj)):
                if attr.startswith("test") and callable(getattr(obj, attr, None)):
                    found.append((f"{name}.{attr}", obj, attr))
    return found


class _AssertionCounter:
    """Counts assertion checkpoints: every top-level TestCase.assert*/fail
    invocation.  A depth guard keeps compound assertions (and deprecated
    aliases that delegate internally) from double counting."""

    def __init__(self):
        self.total = 0
        self.passed = 0
        self._depth = 0

    def reset(self) -> None:
        self.total = 0
        self.passed = 0

    def install(self) -> None:
        counter = self

        def wrap(func):
            def wrapper(*args, **kwargs):
                if counter._depth > 0:
                    return func(*args, **kwargs)
                counter._depth += 1
                counter.total += 1
                try:
                    result = func(*args, **kwargs)
                except BaseException:
                    raise
                else:
                    counter.passed += 1
                    return result
                finally:
                    counter._depth -= 1

            wrapper.__name__ = getattr(func, "__name__", "assertion")
            return wrapper

        for name, attr in list(vars(unittest.TestCase).items()):
            if (name.startswith("assert") or name == "fail") and callable(attr):
                setattr(unittest.TestCase, name, wrap(attr))


def _run_one_test(cls: type, method: str, counter: _AssertionCounter) -> tuple[str, str, int, int]:
    """Execute a single test method.

    Returns (verdict, message, checkpoint_total, checkpoint_passed).  A
    passing method with no recorded assertions counts as one implicit
    checkpoint, so a fully green suite always has passed == total >= 1.
    """
    counter.reset()
    if issubclass(cls, unittest.TestCase):
        result = unittest.TestResult()
        cls(method).run(result)
        if result.errors:
            verdict, message = "error", result.errors[0][1].strip().splitlines()[-1]
        elif result.failures:
            verdict, message = "fail", result.failures[0][1].strip().splitlines()[-1]
        else:
            verdict, message = "pass", ""
    else:
        try:
            getattr(cls(), method)()
            verdict, message = "pass", ""
        except AssertionError as exc:
            verdict, message = "fail", f"AssertionError: {exc}"
        except Exception as exc:
            verdict, message = "error", f"{type(exc).__name__}: {exc}"

    if verdict == "pass":
        total = max(1, counter.total)
        passed = total
    elif counter.passed < counter.total:
        # The failing assertion is already in the count.
        total, passed = counter.total, counter.passed
    else:
        # Failure outside any recorded assertion (error, setUp crash):
        # charge one implicit failing checkpoint.
        total, passed = counter.total + 1, counter.passed
    return verdict, message, total, passed


def shim_main(argv: list[str]) -> int:
    mode = argv[0]
    solution_path = argv[1]
    tests_path = argv[2] if len(argv) > 2 and argv[2] != "-" else None
    stdin_path = argv[3] if len(argv) > 3 else None

    if mode not in ("run", "test", "coverage"):
        print(f"unknown mode: {mode}", file=sys.stderr)
        return 2

    solution_source = open(solution_path, encoding="utf-8").read()
    tests_source = open(tests_path, encoding="utf-8").read() if tests_path else ""

    real_stdout = sys.stdout
    out_buffer, err_buffer = io.StringIO(), io.StringIO()
    document = {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "status": STATUS_OK,
        "tests": [],
        "checkpoints": {"total": 0, "passed": 0},
        "covered_lines": [],
        "executable_lines": [],
        "stdout_b64": "",
        "stderr_b64": "",
    }

    if not hasattr(unittest.TestCase, "assertEquals"):
        unittest.TestCase.assertEquals = unittest.TestCase.assertEqual

    _deny_sockets()
    sys.stdout, sys.stderr = out_buffer, err_buffer
    sys.stdin = open(stdin_path, encoding="utf-8") if stdin_path else io.StringIO("")

    covered: set[int] = set()
    tracing = mode == "coverage"
    if tracing:
        try:
            document["executable_lines"] = _executable_lines(solution_source, solution_path)
        except SyntaxError:
            document["executable_lines"] = []

        def tracer(frame, event, _arg):
            if frame.f_code.co_filename == solution_path:
                if event == "line":
                    covered.add(frame.f_lineno)
                return tracer
            return None

        sys.settrace(tracer)

    exit_code = 0
    try:
        solution_ns = {"__name__": "solution", "__file__": solution_path}
        try:
            exec(compile(solution_source, solution_path, "exec"), solution_ns)
        except SystemExit as exc:
            if mode == "run" and (exc.code in (0, None)):
                pass
            else:
                document["status"] = STATUS_RUNTIME_ERROR if mode == "run" else STATUS_ERRORED
                exit_code = 1 if mode == "run" else 0
                traceback.print_exc(file=err_buffer)
        except BaseException:
            document["status"] = STATUS_RUNTIME_ERROR if mode == "run" else STATUS_ERRORED
            exit_code = 1 if mode == "run" else 0
            traceback.print_exc(file=err_buffer)

        if mode in ("test", "coverage") and document["status"] not in (STATUS_ERRORED,):
            if not tests_source.strip():
                document["status"] = STATUS_NO_TESTS
            else:
                test_ns = dict(solution_ns)
                test_ns["unittest"] = unittest
                before = set(test_ns)
                try:
                    exec(compile(tests_source, tests_path or "tests.py", "exec"), test_ns)
                except BaseException:
                    document["status"] = STATUS_ERRORED
                    traceback.print_exc(file=err_buffer)
                else:
                    new_names = [name for name in test_ns if name not in before]
                    cases = _discover_tests(test_ns, new_names)
                    if not cases:
                        document["status"] = STATUS_NO_TESTS
                    else:
                        counter = _AssertionCounter()
                        counter.install()
                        verdicts = []
                        checkpoints_total = checkpoints_passed = 0
                        for display, cls, method in cases:
                            verdict, message, total, passed = _run_one_test(
                                cls, method, counter
                            )
                            checkpoints_total += total
                            checkpoints_passed += passed
                            verdicts.append(
                                {"name": display, "verdict": verdict, "message": message}
                            )
                        document["tests"] = verdicts
                        document["checkpoints"] = {
                            "total": checkpoints_total,
                            "passed": checkpoints_passed,
                        }
                        methods_passed = sum(1 for v in verdicts if v["verdict"] == "pass")
                        document["status"] = (
                            STATUS_ALL_PASSED
                            if methods_passed == len(verdicts)
                            else STATUS_SOME_FAILED
                        )
    finally:
        if tracing:
            sys.settrace(None)
        sys.stdout, sys.stderr = real_stdout, sys.__stderr__

    if tracing and document["status"] in (STATUS_ALL_PASSED, STATUS_SOME_FAILED):
        document["covered_lines"] = sorted(covered & set(document["executable_lines"]))
    document["stdout_b64"] = _capped_b64(out_buffer)
    document["stderr_b64"] = _capped_b64(err_buffer)

    print(FENCE_BEGIN)
    print(json.dumps(document))
    print(FENCE_END)
    return exit_code


if __name__ == "__main__":
    if len(sys.argv) < 3:
        print(__doc__, file=sys.stderr)
        sys.exit(2)
    sys.exit(shim_main(sys.argv[1:]))
