"""Flat-file persistence for bundles, assessments, explanations, grids and
jobs, plus curated exercise-pack export.

One JSON document per entity, grouped by kind under the store root, with an
append-only event log.  Bundle ids are content-addressed digests; all writes
go through write-temp-then-rename, and writers take a per-kind lock file.
Plain files over a database: volumes are desk-scale and fixtures stay
diffable.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock

from .errors import ConflictError, NotFound, ReferenceViolation, ValidationError
from .parsing import ExerciseBundle
from .rubric import (
    AutoRubricReport,
    ConsensusResolution,
    ManualRubricRecord,
    ManualVerdict,
    Verdict,
    effective_values,
    validate_resolution,
)

SCHEMA_VERSION = 1

_KINDS = ("bundles", "assessments", "explanations", "cassettes", "grids", "jobs")


@dataclass(frozen=True)
class PackFilter:
    """Selection over rubric fields for exported exercise packs.  Auto fields
    match the stored evaluation report; manual fields match the effective
    (consensus-applied) verdicts."""

    tests_pass: Verdict | None = None
    solution_runnable: Verdict | None = None
    has_tests: bool | None = None
    has_sample_solution: bool | None = None
    sensible: ManualVerdict | None = None
    novel: ManualVerdict | None = None

    def matches(
        self, report: AutoRubricReport | None, manual: dict[str, ManualVerdict] | None
    ) -> bool:
        if self.tests_pass is not None:
            if report is None or report.tests_pass is not self.tests_pass:
                return False
        if self.solution_runnable is not None:
            if report is None or report.solution_runnable is not self.solution_runnable:
                return False
        if self.has_tests is not None:
            if report is None or report.has_tests != self.has_tests:
                return False
        if self.has_sample_solution is not None:
            if report is None or report.has_sample_solution != self.has_sample_solution:
                return False
        if self.sensible is not None:
            if manual is None or manual.get("sensible") is not self.sensible:
                return False
        if self.novel is not None:
            if manual is None or manual.get("novel") is not self.novel:
                return False
        return True


@dataclass(frozen=True)
class ExportOutcome:
    count: int
    bundle_ids: tuple[str, ...]
    path: Path | None
    data: bytes = b""

    @property
    def empty(self) -> bool:
        return self.count == 0


class Store:
    """Multi-reader, single-writer-per-kind flat-file store."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for kind in _KINDS:
            (self.root / kind).mkdir(parents=True, exist_ok=True)
        (self.root / ".locks").mkdir(exist_ok=True)
        self._event_path = self.root / "events.jsonl"

    # -- plumbing ---------------------------------------------------------

    def _lock(self, kind: str) -> FileLock:
        return FileLock(self.root / ".locks" / f"{kind}.lock")

    def _path(self, kind: str, entity_id: str) -> Path:
        if "/" in entity_id or "\\" in entity_id or entity_id.startswith("."):
            raise ValidationError(f"invalid entity id: {entity_id!r}")
        return self.root / kind / f"{entity_id}.json"

    def _write(self, kind: str, entity_id: str, doc: dict) -> None:
        path = self._path(kind, entity_id)
        payload = json.dumps(
            {"schema_version": SCHEMA_VERSION, **doc}, sort_keys=True, ensure_ascii=False
        )
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(payload, encoding="utf-8")
        tmp.replace(path)

    def _read(self, kind: str, entity_id: str) -> dict:
        path = self._path(kind, entity_id)
        if not path.exists():
            raise NotFound(f"{kind[:-1]} {entity_id!r} not found")
        return json.loads(path.read_text(encoding="utf-8"))

    def _exists(self, kind: str, entity_id: str) -> bool:
        return self._path(kind, entity_id).exists()

    def _ids(self, kind: str) -> list[str]:
        return sorted(p.stem for p in (self.root / kind).glob("*.json"))

    def _log_event(self, kind: str, entity_id: str, action: str) -> int:
        with self._lock("events"):
            seq = 0
            if self._event_path.exists():
                with self._event_path.open("r", encoding="utf-8") as fh:
                    seq = sum(1 for _ in fh)
            with self._event_path.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"seq": seq, "kind": kind, "id": entity_id, "action": action}
                    )
                    + "\n"
                )
            return seq

    # -- bundles ----------------------------------------------------------

    def put_bundle(self, bundle: ExerciseBundle) -> str:
        """Idempotent: re-putting a bundle with an existing id is a no-op, so
        identical replayed runs leave identical files behind."""
        with self._lock("bundles"):
            if self._exists("bundles", bundle.id):
                return bundle.id
            self._write("bundles", bundle.id, bundle.to_dict())
        self._log_event("bundles", bundle.id, "put")
        return bundle.id

    def get_bundle(self, bundle_id: str) -> ExerciseBundle:
        return ExerciseBundle.from_dict(self._read("bundles", bundle_id))

    def list_bundles(self, offset: int = 0, limit: int | None = None) -> list[str]:
        ids = self._ids("bundles")
        return ids[offset : offset + limit if limit is not None else None]

    # -- automated rubric reports ------------------------------------------

    def put_auto_report(self, bundle_id: str, report: AutoRubricReport) -> None:
        """Latest evaluation per bundle; keyed by bundle id."""
        if not self._exists("bundles", bundle_id):
            raise ReferenceViolation(f"bundle {bundle_id!r} not in store")
        with self._lock("assessments"):
            self._write(
                "assessments",
                f"auto-{bundle_id}",
                {"bundle_id": bundle_id, "report": report.to_dict()},
            )
        self._log_event("assessments", f"auto-{bundle_id}", "put")

    def get_auto_report(self, bundle_id: str) -> AutoRubricReport | None:
        try:
            doc = self._read("assessments", f"auto-{bundle_id}")
        except NotFound:
            return None
        return AutoRubricReport.from_dict(doc["report"])

    # -- manual rubric records and consensus -------------------------------

    def record_manual(self, record: ManualRubricRecord) -> str:
        if not self._exists("bundles", record.bundle_id):
            raise ReferenceViolation(f"bundle {record.bundle_id!r} not in store")
        with self._lock("assessments"):
            seq = self._next_seq("assessments")
            record_id = f"manual-{record.bundle_id[:12]}-{seq:06d}"
            self._write(
                "assessments", record_id, {"seq": seq, "record": record.to_dict()}
            )
        self._log_event("assessments", record_id, "put")
        return record_id

    def get_manual(self, record_id: str) -> ManualRubricRecord:
        doc = self._read("assessments", record_id)
        if "record" not in doc:
            raise NotFound(f"assessment {record_id!r} is not a manual record")
        return ManualRubricRecord.from_dict(doc["record"])

    def list_manual(self, bundle_id: str) -> list[tuple[str, ManualRubricRecord]]:
        """(record id, record) in recording order."""
        out = []
        for record_id in self._ids("assessments"):
            if not record_id.startswith("manual-"):
                continue
            doc = self._read("assessments", record_id)
            record = ManualRubricRecord.from_dict(doc["record"])
            if record.bundle_id == bundle_id:
                out.append((doc["seq"], record_id, record))
        out.sort(key=lambda item: item[0])
        return [(record_id, record) for _, record_id, record in out]

    def resolve_maybe(
        self,
        record_id: str,
        field_name: str,
        resolved: Verdict,
        resolvers: tuple[str, ...],
        rationale: str = "",
    ) -> str:
        """Record a consensus resolution for one Maybe field of one manual
        record.  Raises ValidationError when the field is not Maybe and
        ConflictError when a different resolution already exists."""
        record = self.get_manual(record_id)
        validate_resolution(record, field_name)
        resolution = ConsensusResolution(
            record_id=record_id,
            bundle_id=record.bundle_id,
            field_name=field_name,
            resolved=resolved,
            resolvers=tuple(resolvers),
            rationale=rationale,
        )
        resolution_id = f"resolution-{record_id}-{field_name}"
        with self._lock("assessments"):
            if self._exists("assessments", resolution_id):
                existing = ConsensusResolution.from_dict(
                    self._read("assessments", resolution_id)["resolution"]
                )
                if existing.resolved is not resolved:
                    raise ConflictError(
                        f"{field_name} already resolved to {existing.resolved.value}"
                    )
                return resolution_id
            self._write(
                "assessments", resolution_id, {"resolution": resolution.to_dict()}
            )
        self._log_event("assessments", resolution_id, "put")
        return resolution_id

    def list_resolutions(self, bundle_id: str) -> list[ConsensusResolution]:
        out = []
        for entity_id in self._ids("assessments"):
            if not entity_id.startswith("resolution-"):
                continue
            doc = self._read("assessments", entity_id)
            resolution = ConsensusResolution.from_dict(doc["resolution"])
            if resolution.bundle_id == bundle_id:
                out.append(resolution)
        return out

    def effective_manual(
        self, bundle_id: str, primary_rater: str | None = None
    ) -> dict[str, ManualVerdict] | None:
        return effective_values(
            self.list_manual(bundle_id), self.list_resolutions(bundle_id), primary_rater
        )

    def _next_seq(self, kind: str) -> int:
        counter = self.root / kind / ".seq"
        value = int(counter.read_text()) + 1 if counter.exists() else 1
        counter.write_text(str(value))
        return value

    # -- explanations -------------------------------------------------------

    def put_explanation(self, explanation_id: str, doc: dict) -> str:
        with self._lock("explanations"):
            self._write("explanations", explanation_id, doc)
        self._log_event("explanations", explanation_id, "put")
        return explanation_id

    def get_explanation(self, explanation_id: str) -> dict:
        return self._read("explanations", explanation_id)

    def list_explanations(self) -> list[str]:
        return [i for i in self._ids("explanations") if not i.startswith("judgments-")]

    # -- grids --------------------------------------------------------------

    def put_grid(self, grid_id: str, doc: dict) -> str:
        with self._lock("grids"):
            self._write("grids", grid_id, doc)
        self._log_event("grids", grid_id, "put")
        return grid_id

    def get_grid(self, grid_id: str) -> dict:
        return self._read("grids", grid_id)

    def grid_checkpoint_path(self, grid_id: str) -> Path:
        return self.root / "grids" / f"{grid_id}.checkpoint.jsonl"

    # -- jobs (service queue) ------------------------------------------------

    def put_job(self, job_id: str, doc: dict) -> str:
        with self._lock("jobs"):
            self._write("jobs", job_id, doc)
        return job_id

    def get_job(self, job_id: str) -> dict:
        return self._read("jobs", job_id)

    # -- cassettes ------------------------------------------------------------

    def cassette_path(self, name: str) -> Path:
        if "/" in name or "\\" in name:
            raise ValidationError(f"invalid cassette name: {name!r}")
        return self.root / "cassettes" / f"{name}.jsonl"

    # -- export ---------------------------------------------------------------

    def export_pack(
        self, pack_filter: PackFilter, out_path: str | Path | None = None
    ) -> ExportOutcome:
        """Write a zip of per-exercise directories for every stored bundle the
        filter accepts.  Deterministic: bundles ordered by id, fixed zip
        timestamps, so identical stores export byte-identical archives.  An
        empty selection returns an explicit empty outcome and writes nothing.
        """
        selected: list[str] = []
        for bundle_id in self.list_bundles():
            report = self.get_auto_report(bundle_id)
            manual = self.effective_manual(bundle_id)
            if pack_filter.matches(report, manual):
                selected.append(bundle_id)

        if not selected:
            return ExportOutcome(count=0, bundle_ids=(), path=None)

        buffer = io.BytesIO()
        stamp = (1980, 1, 1, 0, 0, 0)
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:

            def add(name: str, data: str) -> None:
                info = zipfile.ZipInfo(name, date_time=stamp)
                info.compress_type = zipfile.ZIP_DEFLATED
                archive.writestr(info, data)

            for index, bundle_id in enumerate(selected, start=1):
                bundle = self.get_bundle(bundle_id)
                report = self.get_auto_report(bundle_id)
                manual = self.effective_manual(bundle_id)
                prefix = f"exercises/{index:04d}-{bundle_id[:12]}"
                add(f"{prefix}/statement.md", (bundle.problem_statement or "") + "\n")
                add(f"{prefix}/solution.py", (bundle.sample_solution or "") + "\n")
                add(f"{prefix}/tests.py", (bundle.tests or "") + "\n")
                metadata = {
                    "bundle_id": bundle_id,
                    "keywords": list(bundle.keywords or ()),
                    "provenance": bundle.provenance.to_dict(),
                    "auto_report": report.to_dict() if report else None,
                    "manual_effective": (
                        {k: v.value for k, v in manual.items()} if manual else None
                    ),
                }
                add(f"{prefix}/metadata.json", json.dumps(metadata, sort_keys=True, indent=2))

        data = buffer.getvalue()
        path = None
        if out_path is not None:
            path = Path(out_path)
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return ExportOutcome(
            count=len(selected), bundle_ids=tuple(selected), path=path, data=data
        )
