"""Live documents must validate against the published wire schemas."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest
from fastapi.testclient import TestClient

from exergen import shim
from exergen.gateway import CompletionResult, GenerationConfig, ReplayCassette
from exergen.parsing import parse_bundle
from exergen.prompts import PromptText
from exergen.rubric import ManualVerdict, Verdict
from exergen.sandbox import _extract_document
from exergen.service import create_app
from exergen.store import Store

from conftest import read_fixture
from test_store import green_report, manual

SCHEMAS = Path(__file__).parent.parent / "docs" / "schemas"


def validator(name: str) -> jsonschema.Draft202012Validator:
    schema = json.loads((SCHEMAS / name).read_text(encoding="utf-8"))
    return jsonschema.Draft202012Validator(schema)


def stored_doc(root: Path, kind: str, entity_id: str) -> dict:
    return json.loads((root / kind / f"{entity_id}.json").read_text(encoding="utf-8"))


@pytest.fixture()
def populated(tmp_path):
    store = Store(tmp_path)
    bundle = parse_bundle(read_fixture("ice_hockey_completion.txt"))
    store.put_bundle(bundle)
    store.put_auto_report(bundle.id, green_report())
    record_id = store.record_manual(manual(bundle.id, sensible=ManualVerdict.MAYBE))
    store.resolve_maybe(record_id, "sensible", Verdict.YES, ("a", "b"), "reviewed")
    return tmp_path, store, bundle, record_id


def test_bundle_document_validates(populated):
    root, _, bundle, _ = populated
    validator("bundle.schema.json").validate(stored_doc(root, "bundles", bundle.id))


def test_auto_report_document_validates(populated):
    root, _, bundle, _ = populated
    validator("auto_report.schema.json").validate(
        stored_doc(root, "assessments", f"auto-{bundle.id}")
    )


def test_manual_record_document_validates(populated):
    root, _, _, record_id = populated
    validator("manual_record.schema.json").validate(
        stored_doc(root, "assessments", record_id)
    )


def test_resolution_document_validates(populated):
    root, _, _, record_id = populated
    validator("consensus_resolution.schema.json").validate(
        stored_doc(root, "assessments", f"resolution-{record_id}-sensible")
    )


def test_cassette_entry_validates(tmp_path):
    path = tmp_path / "c.jsonl"
    cassette = ReplayCassette(path)
    cassette.record(
        PromptText(body="prompt\n"),
        GenerationConfig(temperature=0.0, model_id="m"),
        CompletionResult(text="t", finish_reason="stop", latency=0.1, backend_id="b"),
        sample_tag="attempt:1",
    )
    entry = json.loads(path.read_text().splitlines()[0])
    validator("cassette_entry.schema.json").validate(entry)


def test_shim_document_validates(tmp_path):
    (tmp_path / "solution.py").write_text("def f():\n  return 1\n", encoding="utf-8")
    (tmp_path / "tests.py").write_text(
        "class TestF(unittest.TestCase):\n  def test_f(self):\n"
        "    self.assertEquals(f(), 1)\n",
        encoding="utf-8",
    )
    proc = subprocess.run(
        [sys.executable, shim.__file__, "coverage", "solution.py", "tests.py"],
        cwd=tmp_path,
        capture_output=True,
        timeout=30,
    )
    doc = _extract_document(proc.stdout)
    validator("shim_result.schema.json").validate(doc)


def test_grid_summary_validates():
    from exergen.grid import summarize
    from readiness_fixture import summary_fixture_results

    summary = summarize(summary_fixture_results()).to_dict()
    validator("grid_summary.schema.json").validate(summary)


def test_job_and_error_documents_validate(tmp_path):
    app = create_app(store=Store(tmp_path))
    with TestClient(app) as client:
        error_body = client.get("/bundles/missing").json()
        validator("api_error.schema.json").validate(error_body)

    store = Store(tmp_path)
    store.put_job("j1", {"job_id": "j1", "kind": "generate", "status": "pending"})
    validator("job.schema.json").validate(stored_doc(tmp_path, "jobs", "j1"))
