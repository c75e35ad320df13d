from __future__ import annotations

from pathlib import Path

import pytest

from exergen.prompts import builtin_prime_library
from exergen.sandbox import Sandbox

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if "test_acceptance" in report.nodeid and report.when == "call":
        verdict = "PASS" if report.passed else "FAIL"
        name = report.nodeid.rsplit("::", 1)[-1]
        print(f"\n[{verdict}] acceptance: {name}", flush=True)


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def prime_library():
    return builtin_prime_library()


@pytest.fixture(scope="session")
def sandbox() -> Sandbox:
    return Sandbox()
