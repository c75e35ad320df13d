from __future__ import annotations

import json
import zipfile

import pytest

from exergen.cli import main
from exergen.gateway import (
    CompletionResult,
    GenerationConfig,
    ReplayCassette,
)
from exergen.parsing import parse_bundle
from exergen.prompts import KeywordSet, build_exercise_prompt
from exergen.store import Store

from conftest import read_fixture

MODEL = "test-model"


def make_cassette(path, prime_library, text=None, temperature=0.0):
    """A cassette answering the ice-hockey generation prompt."""
    prompt = build_exercise_prompt(
        prime_library["speeding_check"], KeywordSet(contextual="ice hockey")
    )
    config = GenerationConfig(temperature=temperature, model_id=MODEL)
    cassette = ReplayCassette(path)
    cassette.record(
        prompt,
        config,
        CompletionResult(
            text=text or read_fixture("ice_hockey_completion.txt"),
            finish_reason="stop",
            latency=0.0,
            backend_id="replay",
        ),
        sample_tag="attempt:1",
    )
    return cassette


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_generate_prints_bundle_and_rubric(tmp_path, prime_library, capsys):
    cassette_path = tmp_path / "fix.jsonl"
    make_cassette(cassette_path, prime_library)
    code, out, _ = run_cli(
        capsys,
        "generate",
        "--prime", "speeding_check",
        "--context", "ice hockey",
        "--temperature", "0",
        "--backend", "replay",
        "--cassette", str(cassette_path),
        "--model", MODEL,
    )
    assert code == 0
    assert "Write a function called ice_hockey_check" in out
    assert "def ice_hockey_check(score):" in out
    assert "tests pass:          Yes" in out
    assert "statement coverage:  100.0%" in out


def test_generate_json_mode_and_store(tmp_path, prime_library, capsys):
    cassette_path = tmp_path / "fix.jsonl"
    make_cassette(cassette_path, prime_library)
    store_dir = tmp_path / "store"
    code, out, _ = run_cli(
        capsys,
        "generate",
        "--prime", "speeding_check",
        "--context", "ice hockey",
        "--temperature", "0",
        "--backend", "replay",
        "--cassette", str(cassette_path),
        "--model", MODEL,
        "--store", str(store_dir),
        "--json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["report"]["tests_pass"] == "Yes"
    bundle_id = payload["bundle"]["id"]
    assert Store(store_dir).get_bundle(bundle_id).id == bundle_id


def test_generate_unknown_prime_is_domain_failure(tmp_path, capsys):
    code, out, err = run_cli(
        capsys,
        "generate",
        "--prime", "nonexistent",
        "--temperature", "0",
        "--backend", "replay",
        "--cassette", str(tmp_path / "c.jsonl"),
    )
    assert code == 1
    assert "unknown prime" in err


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["generate"])  # missing required arguments
    assert excinfo.value.code == 2


def test_validate_missing_bundle_json_error(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys,
        "validate",
        "--bundle", "0" * 64,
        "--store", str(tmp_path),
        "--json",
    )
    assert code == 1
    payload = json.loads(out)
    assert payload["error"]["code"] == "not_found"


def test_validate_stored_bundle(tmp_path, capsys):
    store = Store(tmp_path)
    bundle = parse_bundle(read_fixture("ice_hockey_completion.txt"))
    store.put_bundle(bundle)
    code, out, _ = run_cli(
        capsys, "validate", "--bundle", bundle.id, "--store", str(tmp_path), "--json"
    )
    assert code == 0
    assert json.loads(out)["report"]["tests_pass"] == "Yes"
    assert store.get_auto_report(bundle.id) is not None


def test_explain_command(tmp_path, prime_library, capsys):
    from exergen.prompts import ExplanationStyle, build_explanation_prompt

    code_file = tmp_path / "program.py"
    code_file.write_text(read_fixture("programs/converter.py"), encoding="utf-8")
    prompt = build_explanation_prompt(
        code_file.read_text(encoding="utf-8"), ExplanationStyle.STEP_BY_STEP
    )
    cassette = ReplayCassette(tmp_path / "c.jsonl")
    cassette.record(
        prompt,
        GenerationConfig(temperature=0.0, model_id=MODEL),
        CompletionResult(
            text=read_fixture("converter_explanation.txt"),
            finish_reason="stop",
            latency=0.0,
            backend_id="replay",
        ),
        sample_tag="sample:1",
    )
    code, out, _ = run_cli(
        capsys,
        "explain",
        "--file", str(code_file),
        "--backend", "replay",
        "--cassette", str(tmp_path / "c.jsonl"),
        "--model", MODEL,
        "--temperature", "0",
    )
    assert code == 0
    assert "explanation 1 (7 steps)" in out
    assert "1. We create a class called Converter." in out


def test_grid_and_report_commands(tmp_path, prime_library, capsys):
    spec_path = tmp_path / "grid.toml"
    spec_path.write_text(
        "\n".join(
            [
                'contexts = ["ice hockey"]',
                'primes = ["speeding_check"]',
                "temperatures = [0.0]",
                "repeats = 1",
                "[concept_sets]",
                "none = []",
            ]
        ),
        encoding="utf-8",
    )
    cassette_path = tmp_path / "c.jsonl"
    cassette = make_cassette(cassette_path, prime_library)
    # The grid call records under repeat:1, not attempt:1.
    prompt = build_exercise_prompt(
        prime_library["speeding_check"], KeywordSet(contextual="ice hockey")
    )
    cassette.record(
        prompt,
        GenerationConfig(temperature=0.0, model_id=MODEL),
        CompletionResult(
            text=read_fixture("ice_hockey_completion.txt"),
            finish_reason="stop",
            latency=0.0,
            backend_id="replay",
        ),
        sample_tag="repeat:1",
    )
    store_dir = tmp_path / "store"
    code, out, _ = run_cli(
        capsys,
        "grid",
        "--spec", str(spec_path),
        "--backend", "replay",
        "--cassette", str(cassette_path),
        "--model", MODEL,
        "--store", str(store_dir),
        "--grid-id", "demo",
    )
    assert code == 0
    assert "grid demo: 1 jobs" in out
    assert "| Has sample solution? | 100.0% | 1 / 1 |" in out

    code, out, _ = run_cli(
        capsys, "report", "--grid", "demo", "--store", str(store_dir), "--format", "md"
    )
    assert code == 0
    assert "| All tests pass? | 100.0% | 1 / 1 |" in out

    code, out, _ = run_cli(
        capsys, "report", "--grid", "demo", "--store", str(store_dir), "--format", "csv"
    )
    assert code == 0
    assert '"All tests pass?",100.0,1,1' in out


def test_export_command(tmp_path, capsys):
    store = Store(tmp_path / "store")
    from test_store import green_report, red_report

    passing = parse_bundle("Exercise A.\n--Sample solution--\nx = 1\n--Tests--\nt\n")
    failing = parse_bundle("Exercise B.\n--Sample solution--\ny = 2\n--Tests--\nt\n")
    store.put_bundle(passing)
    store.put_auto_report(passing.id, green_report())
    store.put_bundle(failing)
    store.put_auto_report(failing.id, red_report())

    out_path = tmp_path / "pack.zip"
    code, out, _ = run_cli(
        capsys,
        "export",
        "--store", str(tmp_path / "store"),
        "--out", str(out_path),
        "--where", "tests_pass=yes",
    )
    assert code == 0
    assert "exported 1 exercise(s)" in out
    with zipfile.ZipFile(out_path) as archive:
        assert any(name.endswith("statement.md") for name in archive.namelist())


def test_export_empty_selection_not_an_error(tmp_path, capsys):
    Store(tmp_path / "store")
    code, out, _ = run_cli(
        capsys,
        "export",
        "--store", str(tmp_path / "store"),
        "--out", str(tmp_path / "pack.zip"),
        "--where", "tests_pass=yes",
        "--json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["empty"] is True
    assert payload["count"] == 0
