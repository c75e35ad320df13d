"""HTTP service over the pipeline: generation, evaluation, assessment,
consensus resolution, explanations, grids and pack export.

Long operations (generation, grids) return a job id immediately; the job
document lives in the store, so a restarted service can still answer for
finished jobs.  All durable state is in the store; the service itself keeps
only its worker pool.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .config import AppConfig
from .errors import (
    BackendUnavailable,
    CassetteMiss,
    ConflictError,
    ExergenError,
    InfrastructureError,
    NotFound,
    ReferenceViolation,
    RegenerationExhausted,
    ValidationError,
)
from .explain import LineJudgment, aggregate, explain, explanation_digest, score
from .gateway import GenerationConfig, HttpBackend, ReplayBackend, ReplayCassette
from .grid import GridSpec, build_grid, grid_document, run_grid, summarize
from .parsing import Explanation
from .prompts import ExplanationStyle, KeywordSet, builtin_prime_library
from .rubric import (
    ManualRubricRecord,
    ManualVerdict,
    Verdict,
    auto_evaluate,
    generate_bundle,
    regenerate_until_valid,
)
from .sandbox import ExecLimits, Sandbox
from .store import PackFilter, Store

STATUS_BY_ERROR = (
    (ValidationError, 400),
    (NotFound, 404),
    (ReferenceViolation, 404),
    (ConflictError, 409),
    (CassetteMiss, 503),
    (BackendUnavailable, 503),
    (RegenerationExhausted, 422),
    (InfrastructureError, 500),
)

CONCEPT_SETS = {
    "function": ("function", "parameters", "dictionary", "dict comprehension", "arithmetics"),
    "class": ("class", "list", "list comprehension", "conditional"),
}

Verdict3 = Literal["Yes", "No", "Maybe"]
Verdict4 = Literal["Yes", "No", "Maybe", "NA"]


class GenerateRequest(BaseModel):
    prime_id: str
    context: str | None = None
    concept_set: str | None = None
    concepts: list[str] | None = None
    temperature: float = 0.0
    max_tokens: int | None = None
    until_valid: bool = False
    budget: int = Field(default=5, ge=1)


class ExplainRequest(BaseModel):
    code: str
    style: Literal["step_by_step", "high_level", "problem_statement"] = "step_by_step"
    n_samples: int = Field(default=1, ge=1)
    temperature: float = 0.0


class AssessmentRequest(BaseModel):
    rater_id: str
    sensible: Verdict3
    novel: Verdict3
    solution_matches_statement: Verdict3
    topic_matches_context: Verdict4
    uses_function_or_class: Verdict4
    uses_list_or_dictionary: Verdict4
    notes: str = ""


class ResolveRequest(BaseModel):
    field: str
    resolved: Literal["Yes", "No"]
    resolvers: list[str]
    rationale: str = ""


class GridRequest(BaseModel):
    contexts: list[str]
    concept_sets: dict[str, list[str]]
    primes: list[str]
    temperatures: list[float]
    repeats: int = Field(default=1, ge=1)
    grid_id: str | None = None


class JudgmentItem(BaseModel):
    step_index: int
    verdict: Literal["Correct", "Incorrect"]
    reason: str | None = None


class JudgmentsRequest(BaseModel):
    rater_id: str = "rater"
    judgments: list[JudgmentItem]
    all_parts_explained: bool


class ApiErrorModel(BaseModel):
    code: str
    message: str
    details: dict | None = None


def _error_response(status: int, code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message, "details": details}},
    )


class ServiceState:
    """Runtime wiring: store, sandbox, completion backend, prime library and
    the background job pool."""

    def __init__(
        self,
        store: Store,
        app_config: AppConfig,
        cassette_path: str | Path | None = None,
        backend=None,
        prime_library=None,
    ):
        self.store = store
        self.config = app_config
        self.primes = prime_library or builtin_prime_library()
        self.sandbox = Sandbox(
            limits=ExecLimits(
                wall_clock_timeout=app_config.sandbox.timeout,
                max_output_bytes=app_config.sandbox.max_output_bytes,
            ),
            max_concurrent=app_config.sandbox.max_concurrent,
        )
        if backend is not None:
            self.backend = backend
        elif cassette_path is not None:
            self.backend = ReplayBackend(ReplayCassette(cassette_path))
        elif app_config.backend.url:
            self.backend = HttpBackend(
                app_config.backend.url,
                api_token=app_config.backend.api_token,
                timeout=app_config.backend.timeout,
                max_retries=app_config.backend.retries,
                max_concurrency=app_config.backend.max_concurrency,
                min_interval=app_config.backend.min_interval,
            )
        else:
            self.backend = None
        self.pool = ThreadPoolExecutor(max_workers=2)
        self._job_lock = threading.Lock()

    def require_backend(self):
        if self.backend is None:
            raise BackendUnavailable("no completion backend configured")
        return self.backend

    def submit_job(self, kind: str, fn) -> str:
        job_id = uuid.uuid4().hex[:16]
        with self._job_lock:
            self.store.put_job(job_id, {"job_id": job_id, "kind": kind, "status": "pending"})

        def run():
            try:
                result = fn()
            except Exception as exc:
                doc = {
                    "job_id": job_id,
                    "kind": kind,
                    "status": "failed",
                    "error": {
                        "code": getattr(exc, "code", "error"),
                        "message": str(exc),
                        "details": None,
                    },
                }
            else:
                doc = {"job_id": job_id, "kind": kind, "status": "done", "result": result}
            with self._job_lock:
                self.store.put_job(job_id, doc)

        self.pool.submit(run)
        return job_id

    def generation_config(self, temperature: float, max_tokens: int | None) -> GenerationConfig:
        return GenerationConfig(
            temperature=temperature,
            model_id=self.config.backend.model,
            max_tokens=max_tokens or self.config.generation.max_tokens,
            stop_sequence=self.config.generation.stop_sequence,
        )


def _keyword_set(body: GenerateRequest) -> KeywordSet:
    programmatic = None
    if body.concept_set:
        if body.concept_set not in CONCEPT_SETS:
            raise ValidationError(f"unknown concept set {body.concept_set!r}")
        programmatic = CONCEPT_SETS[body.concept_set]
    if body.concepts:
        programmatic = tuple(body.concepts)
    return KeywordSet(contextual=body.context, programmatic=programmatic)


def _bundle_view(state: ServiceState, bundle_id: str) -> dict:
    bundle = state.store.get_bundle(bundle_id)
    report = state.store.get_auto_report(bundle_id)
    manual = state.store.effective_manual(bundle_id)
    records = [
        {"record_id": record_id, "record": record.to_dict()}
        for record_id, record in state.store.list_manual(bundle_id)
    ]
    resolutions = [r.to_dict() for r in state.store.list_resolutions(bundle_id)]
    return {
        "bundle": bundle.to_dict(),
        "auto_report": report.to_dict() if report else None,
        "manual_effective": {k: v.value for k, v in manual.items()} if manual else None,
        "manual_records": records,
        "resolutions": resolutions,
    }


def create_app(
    store: Store,
    app_config: AppConfig | None = None,
    cassette_path: str | Path | None = None,
    backend=None,
    prime_library=None,
    assets_dir: str | Path | None = None,
) -> FastAPI:
    state = ServiceState(
        store=store,
        app_config=app_config or AppConfig(),
        cassette_path=cassette_path,
        backend=backend,
        prime_library=prime_library,
    )
    app = FastAPI(title="exergen", version="0.1.0")
    app.state.exergen = state

    @app.exception_handler(ExergenError)
    async def handle_domain_error(_request: Request, exc: ExergenError):
        for klass, status in STATUS_BY_ERROR:
            if isinstance(exc, klass):
                return _error_response(status, exc.code, str(exc))
        return _error_response(500, exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_request: Request, exc: RequestValidationError):
        return _error_response(400, "validation", "invalid request body", exc.errors())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "backend": getattr(state.backend, "backend_id", None)}

    @app.get("/primes")
    def list_primes():
        return {
            "primes": [
                {
                    "id": prime.id,
                    "keywords": list(prime.keywords),
                    "problem_statement": prime.problem_statement,
                }
                for prime in state.primes.values()
            ],
            "contexts": [
                "hiking", "fishing", "relationships", "football", "music",
                "health", "ice hockey", "books", "cooking",
            ],
            "concept_sets": {name: list(kws) for name, kws in CONCEPT_SETS.items()},
        }

    @app.post("/bundles:generate", status_code=202)
    def bundles_generate(body: GenerateRequest):
        backend_client = state.require_backend()
        if body.prime_id not in state.primes:
            raise NotFound(f"prime {body.prime_id!r} not found")
        prime = state.primes[body.prime_id]
        keywords = _keyword_set(body)
        config = state.generation_config(body.temperature, body.max_tokens)

        def work():
            if body.until_valid:
                outcome = regenerate_until_valid(
                    backend_client, prime, keywords, config, state.sandbox, budget=body.budget
                )
                bundle, report = outcome.bundle, outcome.report
                attempts = len(outcome.attempts)
            else:
                bundle = generate_bundle(
                    backend_client, prime, keywords, config, sample_tag="attempt:1"
                )
                report = auto_evaluate(bundle, state.sandbox)
                attempts = 1
            state.store.put_bundle(bundle)
            state.store.put_auto_report(bundle.id, report)
            return {"bundle_id": bundle.id, "attempts": attempts}

        return {"job_id": state.submit_job("generate", work)}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return state.store.get_job(job_id)

    @app.get("/bundles")
    def list_bundles(offset: int = 0, limit: int = 50):
        ids = state.store.list_bundles()
        return {"total": len(ids), "ids": ids[offset : offset + limit]}

    @app.get("/bundles/{bundle_id}")
    def get_bundle(bundle_id: str):
        return _bundle_view(state, bundle_id)

    @app.post("/bundles/{bundle_id}:evaluate")
    def evaluate_bundle(bundle_id: str):
        bundle = state.store.get_bundle(bundle_id)
        report = auto_evaluate(bundle, state.sandbox)
        state.store.put_auto_report(bundle_id, report)
        return {"bundle_id": bundle_id, "report": report.to_dict()}

    @app.post("/bundles/{bundle_id}/assessment", status_code=201)
    def record_assessment(bundle_id: str, body: AssessmentRequest):
        record = ManualRubricRecord(
            bundle_id=bundle_id,
            rater_id=body.rater_id,
            sensible=ManualVerdict(body.sensible),
            novel=ManualVerdict(body.novel),
            solution_matches_statement=ManualVerdict(body.solution_matches_statement),
            topic_matches_context=ManualVerdict(body.topic_matches_context),
            uses_function_or_class=ManualVerdict(body.uses_function_or_class),
            uses_list_or_dictionary=ManualVerdict(body.uses_list_or_dictionary),
            notes=body.notes,
        )
        record_id = state.store.record_manual(record)
        return {"record_id": record_id, "bundle_id": bundle_id}

    @app.post("/assessments/{record_id}:resolve", status_code=201)
    def resolve_assessment(record_id: str, body: ResolveRequest):
        resolution_id = state.store.resolve_maybe(
            record_id,
            body.field,
            Verdict(body.resolved),
            tuple(body.resolvers),
            body.rationale,
        )
        return {"resolution_id": resolution_id, "record_id": record_id}

    @app.post("/explanations:generate", status_code=202)
    def explanations_generate(body: ExplainRequest):
        backend_client = state.require_backend()
        config = state.generation_config(body.temperature, None)
        style = ExplanationStyle(body.style)

        def work():
            explanations = explain(backend_client, body.code, style, config, body.n_samples)
            ids = []
            for explanation in explanations:
                explanation_id = explanation_digest(explanation)
                state.store.put_explanation(
                    explanation_id, {"explanation": explanation.to_dict()}
                )
                ids.append(explanation_id)
            return {"explanation_ids": ids}

        return {"job_id": state.submit_job("explain", work)}

    @app.get("/explanations/{explanation_id}")
    def get_explanation(explanation_id: str):
        doc = state.store.get_explanation(explanation_id)
        return {"explanation_id": explanation_id, **doc}

    @app.post("/explanations/{explanation_id}/judgments", status_code=201)
    def judge_explanation(explanation_id: str, body: JudgmentsRequest):
        doc = state.store.get_explanation(explanation_id)
        explanation = Explanation.from_dict(doc["explanation"])
        judgments = [
            LineJudgment.from_dict(item.model_dump()) for item in body.judgments
        ]
        result = score(explanation, judgments, body.all_parts_explained)
        state.store.put_explanation(
            f"judgments-{explanation_id}",
            {
                "explanation_id": explanation_id,
                "rater_id": body.rater_id,
                "judgments": [j.to_dict() for j in judgments],
                "score": result.to_dict(),
            },
        )
        return {"explanation_id": explanation_id, "score": result.to_dict()}

    @app.get("/explanations:summary")
    def explanations_summary():
        from .explain import ExplanationScore

        scores = []
        for entity_id in state.store._ids("explanations"):
            if entity_id.startswith("judgments-"):
                doc = state.store.get_explanation(entity_id)
                scores.append(ExplanationScore.from_dict(doc["score"]))
        return {"summary": aggregate(scores).to_dict()}

    @app.post("/grids", status_code=202)
    def create_grid(body: GridRequest):
        backend_client = state.require_backend()
        grid_id = body.grid_id or uuid.uuid4().hex[:12]
        spec = GridSpec(
            contexts=tuple(
                None if c.lower() == "none" else c for c in body.contexts
            ),
            concept_sets=tuple(
                (name, tuple(kws) if kws else None)
                for name, kws in body.concept_sets.items()
            ),
            primes=tuple(body.primes),
            temperatures=tuple(body.temperatures),
            repeats=body.repeats,
        )

        def work():
            jobs = build_grid(spec)
            config = state.generation_config(spec.temperatures[0], None)
            results = run_grid(
                jobs,
                backend_client,
                state.primes,
                config,
                state.sandbox,
                store=state.store,
                checkpoint_path=state.store.grid_checkpoint_path(grid_id),
            )
            summary = summarize(results)
            state.store.put_grid(grid_id, grid_document(spec, results, summary))
            return {"grid_id": grid_id, "jobs": len(jobs)}

        return {"job_id": state.submit_job("grid", work), "grid_id": grid_id}

    @app.get("/grids/{grid_id}/summary")
    def grid_summary(grid_id: str):
        doc = state.store.get_grid(grid_id)
        return {"grid_id": grid_id, "summary": doc["summary"]}

    @app.get("/export")
    def export_pack(
        tests_pass: str | None = None,
        solution_runnable: str | None = None,
        sensible: str | None = None,
        novel: str | None = None,
    ):
        def verdict(value: str | None, enum):
            if value is None:
                return None
            normalized = "NA" if value.lower() == "na" else value.capitalize()
            try:
                return enum(normalized)
            except ValueError:
                raise ValidationError(f"bad verdict {value!r}")

        pack_filter = PackFilter(
            tests_pass=verdict(tests_pass, Verdict),
            solution_runnable=verdict(solution_runnable, Verdict),
            sensible=verdict(sensible, ManualVerdict),
            novel=verdict(novel, ManualVerdict),
        )
        outcome = store.export_pack(pack_filter)
        if outcome.empty:
            return JSONResponse({"count": 0, "empty": True, "bundle_ids": []})
        return Response(
            content=outcome.data,
            media_type="application/zip",
            headers={
                "Content-Disposition": "attachment; filename=exercise-pack.zip",
                "X-Pack-Count": str(outcome.count),
            },
        )

    if assets_dir is not None and Path(assets_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(assets_dir), html=True), name="ui")

    return app
