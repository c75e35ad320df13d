"""Command-line interface: generate, explain, validate, grid, report,
export, serve.

Every subcommand prints human-readable text by default and machine JSON
with ``--json``.  Exit codes: 0 success, 1 domain failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig, load_config
from .errors import ExergenError
from .explain import explain, explanation_digest
from .gateway import (
    GenerationConfig,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ReplayCassette,
)
from .grid import GridSpec, build_grid, grid_document, run_grid, summarize
from .prompts import ExplanationStyle, KeywordSet, builtin_prime_library, load_prime_library
from .rubric import (
    ManualVerdict,
    Verdict,
    auto_evaluate,
    generate_bundle,
    regenerate_until_valid,
)
from .sandbox import ExecLimits, Sandbox
from .store import PackFilter, Store

CONCEPT_SETS = {
    "function": ("function", "parameters", "dictionary", "dict comprehension", "arithmetics"),
    "class": ("class", "list", "list comprehension", "conditional"),
}


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _fail(args, error: ExergenError) -> int:
    payload = {"code": error.code, "message": str(error), "details": None}
    if getattr(args, "json", False):
        _print_json({"error": payload})
    else:
        print(f"error ({error.code}): {error}", file=sys.stderr)
    return 1


def _backend(args, config: AppConfig):
    kind = args.backend
    if kind == "replay":
        if not args.cassette:
            raise ExergenError("--cassette is required for the replay backend")
        return ReplayBackend(ReplayCassette(args.cassette))
    http = HttpBackend(
        args.url or config.backend.url,
        api_token=config.backend.api_token,
        timeout=config.backend.timeout,
        max_retries=config.backend.retries,
        max_concurrency=config.backend.max_concurrency,
        min_interval=config.backend.min_interval,
    )
    if kind == "record":
        if not args.cassette:
            raise ExergenError("--cassette is required for the record backend")
        return RecordingBackend(http, ReplayCassette(args.cassette))
    return http


def _generation_config(args, config: AppConfig) -> GenerationConfig:
    return GenerationConfig(
        temperature=args.temperature,
        model_id=args.model or config.backend.model,
        max_tokens=args.max_tokens or config.generation.max_tokens,
        stop_sequence=config.generation.stop_sequence,
    )


def _sandbox(config: AppConfig) -> Sandbox:
    return Sandbox(
        limits=ExecLimits(
            wall_clock_timeout=config.sandbox.timeout,
            max_output_bytes=config.sandbox.max_output_bytes,
        ),
        max_concurrent=config.sandbox.max_concurrent,
    )


def _primes(args):
    if getattr(args, "primes", None):
        return load_prime_library(args.primes)
    return builtin_prime_library()


def _store(args, config: AppConfig) -> Store | None:
    root = getattr(args, "store", None) or None
    if root is None:
        return None
    return Store(root)


def _require_store(args, config: AppConfig) -> Store:
    root = getattr(args, "store", None) or config.store_root
    return Store(root)


def _keywords(args) -> KeywordSet:
    programmatic = None
    if getattr(args, "concept_set", None):
        programmatic = CONCEPT_SETS[args.concept_set]
    if getattr(args, "concept", None):
        programmatic = tuple(args.concept)
    return KeywordSet(contextual=args.context, programmatic=programmatic)


def _report_lines(report) -> list[str]:
    coverage = (
        f"{round(100.0 * report.coverage.fraction, 1)}%"
        if report.coverage.applicable
        else "n/a"
    )
    return [
        "rubric:",
        f"  has sample solution: {'yes' if report.has_sample_solution else 'no'}",
        f"  solution runnable:   {report.solution_runnable.value}",
        f"  has tests:           {'yes' if report.has_tests else 'no'}",
        f"  tests pass:          {report.tests_pass.value}",
        f"  statement coverage:  {coverage}",
    ]


def _print_bundle(bundle, report) -> None:
    print(f"bundle {bundle.id}")
    if bundle.keywords:
        print("--Keywords--")
        for keyword in bundle.keywords:
            print(keyword)
    for marker, text in (
        ("--Problem statement--", bundle.problem_statement),
        ("--Sample solution--", bundle.sample_solution),
        ("--Tests--", bundle.tests),
    ):
        print(marker)
        print(text if text else "(absent)")
    print("\n".join(_report_lines(report)))


def cmd_generate(args) -> int:
    config = load_config(args.config)
    backend = _backend(args, config)
    primes = _primes(args)
    if args.prime not in primes:
        raise ExergenError(f"unknown prime {args.prime!r}; have {sorted(primes)}")
    prime = primes[args.prime]
    keywords = _keywords(args)
    gen_config = _generation_config(args, config)
    sandbox = _sandbox(config)

    if args.until_valid:
        outcome = regenerate_until_valid(
            backend, prime, keywords, gen_config, sandbox, budget=args.budget
        )
        bundle, report = outcome.bundle, outcome.report
        attempts = len(outcome.attempts)
    else:
        bundle = generate_bundle(backend, prime, keywords, gen_config, sample_tag="attempt:1")
        report = auto_evaluate(bundle, sandbox)
        attempts = 1

    store = _store(args, config)
    if store is not None:
        store.put_bundle(bundle)
        store.put_auto_report(bundle.id, report)

    if args.json:
        _print_json(
            {"bundle": bundle.to_dict(), "report": report.to_dict(), "attempts": attempts}
        )
    else:
        _print_bundle(bundle, report)
        if args.until_valid:
            print(f"accepted after {attempts} attempt(s)")
    return 0


def cmd_explain(args) -> int:
    config = load_config(args.config)
    backend = _backend(args, config)
    code = Path(args.file).read_text(encoding="utf-8")
    gen_config = _generation_config(args, config)
    style = ExplanationStyle(args.style)
    explanations = explain(backend, code, style, gen_config, args.samples)

    store = _store(args, config)
    ids = []
    for explanation in explanations:
        explanation_id = explanation_digest(explanation)
        ids.append(explanation_id)
        if store is not None:
            store.put_explanation(
                explanation_id, {"explanation": explanation.to_dict()}
            )

    if args.json:
        _print_json(
            {
                "explanations": [e.to_dict() for e in explanations],
                "explanation_ids": ids,
            }
        )
    else:
        for index, explanation in enumerate(explanations, start=1):
            print(f"explanation {index} ({len(explanation.steps)} steps)")
            for number, step in enumerate(explanation.steps, start=1):
                print(f"  {number}. {step}")
    return 0


def cmd_validate(args) -> int:
    config = load_config(args.config)
    store = _require_store(args, config)
    bundle = store.get_bundle(args.bundle)
    report = auto_evaluate(bundle, _sandbox(config))
    store.put_auto_report(bundle.id, report)
    if args.json:
        _print_json({"bundle_id": bundle.id, "report": report.to_dict()})
    else:
        print(f"bundle {bundle.id}")
        print("\n".join(_report_lines(report)))
    return 0


def cmd_grid(args) -> int:
    config = load_config(args.config)
    spec = GridSpec.from_toml(args.spec)
    backend = _backend(args, config)
    primes = _primes(args)
    store = _require_store(args, config)
    sandbox = _sandbox(config)
    gen_config = GenerationConfig(
        temperature=spec.temperatures[0],
        model_id=args.model or config.backend.model,
        max_tokens=args.max_tokens or config.generation.max_tokens,
        stop_sequence=config.generation.stop_sequence,
    )
    jobs = build_grid(spec)
    results = run_grid(
        jobs,
        backend,
        primes,
        gen_config,
        sandbox,
        store=store,
        checkpoint_path=store.grid_checkpoint_path(args.grid_id),
        max_workers=args.workers,
    )
    summary = summarize(results)
    store.put_grid(args.grid_id, grid_document(spec, results, summary))
    if args.json:
        _print_json({"grid_id": args.grid_id, "jobs": len(jobs), "summary": summary.to_dict()})
    else:
        print(f"grid {args.grid_id}: {len(jobs)} jobs")
        print(summary.to_markdown())
    return 0


def cmd_report(args) -> int:
    config = load_config(args.config)
    store = _require_store(args, config)
    doc = store.get_grid(args.grid)
    results_doc = doc["summary"]
    if args.json or args.format == "json":
        _print_json({"grid_id": args.grid, "summary": results_doc})
        return 0
    from .grid import MetricSummary, SummaryReport

    summary = SummaryReport(
        has_sample_solution=MetricSummary(**_nn(results_doc["has_sample_solution"])),
        solution_runnable=MetricSummary(**_nn(results_doc["solution_runnable"])),
        has_tests=MetricSummary(**_nn(results_doc["has_tests"])),
        tests_pass=MetricSummary(**_nn(results_doc["tests_pass"])),
        full_coverage=MetricSummary(**_nn(results_doc["full_coverage"])),
        coverage_mean_percent=results_doc["coverage_mean_percent"],
        errors=results_doc["errors"],
    )
    print(summary.to_csv() if args.format == "csv" else summary.to_markdown())
    return 0


def _nn(metric: dict) -> dict:
    return {"numerator": metric["numerator"], "denominator": metric["denominator"]}


_FILTER_FIELDS = {
    "tests_pass": ("tests_pass", Verdict),
    "solution_runnable": ("solution_runnable", Verdict),
    "has_tests": ("has_tests", bool),
    "has_sample_solution": ("has_sample_solution", bool),
    "sensible": ("sensible", ManualVerdict),
    "novel": ("novel", ManualVerdict),
}


def _parse_filter(pairs: list[str]) -> PackFilter:
    kwargs = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ExergenError(f"bad --where clause {pair!r}; expected field=value")
        key, value = pair.split("=", 1)
        key = key.strip().lower().replace("-", "_")
        if key not in _FILTER_FIELDS:
            raise ExergenError(f"unknown filter field {key!r}")
        attr, kind = _FILTER_FIELDS[key]
        if kind is bool:
            kwargs[attr] = value.strip().lower() in ("true", "yes", "1")
        else:
            kwargs[attr] = kind(value.strip().capitalize() if value.strip().lower() != "na" else "NA")
    return PackFilter(**kwargs)


def cmd_export(args) -> int:
    config = load_config(args.config)
    store = _require_store(args, config)
    outcome = store.export_pack(_parse_filter(args.where), args.out)
    if args.json:
        _print_json(
            {
                "count": outcome.count,
                "bundle_ids": list(outcome.bundle_ids),
                "path": str(outcome.path) if outcome.path else None,
                "empty": outcome.empty,
            }
        )
    elif outcome.empty:
        print("no bundles matched the filter; nothing exported")
    else:
        print(f"exported {outcome.count} exercise(s) to {outcome.path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = load_config(args.config)
    app = create_app(
        store=_require_store(args, config),
        app_config=config,
        cassette_path=args.cassette,
        assets_dir=args.assets,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exergen",
        description="Generate, validate and curate programming exercise bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, store_default=False):
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    def backendish(p):
        p.add_argument(
            "--backend", choices=("replay", "http", "record"), default="replay"
        )
        p.add_argument("--cassette", default=None, help="replay cassette path")
        p.add_argument("--url", default=None, help="completion endpoint URL")
        p.add_argument("--model", default=None, help="model id")
        p.add_argument("--max-tokens", type=int, default=None, dest="max_tokens")
        p.add_argument("--primes", default=None, help="prime library directory")
        p.add_argument("--store", default=None, help="store root directory")

    p = sub.add_parser("generate", help="generate one exercise bundle")
    common(p)
    backendish(p)
    p.add_argument("--prime", required=True)
    p.add_argument("--context", default=None, help="contextual keyword")
    p.add_argument("--concept-set", choices=sorted(CONCEPT_SETS), default=None)
    p.add_argument("--concept", action="append", help="explicit programmatic keyword")
    p.add_argument("--temperature", type=float, required=True)
    p.add_argument("--until-valid", action="store_true", help="regenerate until tests pass")
    p.add_argument("--budget", type=int, default=5, help="max attempts for --until-valid")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("explain", help="generate code explanations")
    common(p)
    backendish(p)
    p.add_argument("--file", required=True, help="source file to explain")
    p.add_argument(
        "--style",
        choices=[style.value for style in ExplanationStyle],
        default=ExplanationStyle.STEP_BY_STEP.value,
    )
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--temperature", type=float, default=0.0)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("validate", help="run the automated rubric on a stored bundle")
    common(p)
    p.add_argument("--bundle", required=True, help="bundle id")
    p.add_argument("--store", default=None, help="store root directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("grid", help="run a generation experiment grid")
    common(p)
    backendish(p)
    p.add_argument("--spec", required=True, help="grid spec TOML")
    p.add_argument("--grid-id", default="grid", dest="grid_id")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="print a stored grid summary")
    common(p)
    p.add_argument("--grid", required=True, help="grid id")
    p.add_argument("--store", default=None)
    p.add_argument("--format", choices=("md", "csv", "json"), default="md")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export", help="export a curated exercise pack")
    common(p)
    p.add_argument("--store", default=None)
    p.add_argument("--out", required=True, help="output zip path")
    p.add_argument(
        "--where",
        action="append",
        default=[],
        help="filter clause, e.g. tests_pass=yes (repeatable)",
    )
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="run the HTTP service")
    common(p)
    p.add_argument("--store", default=None)
    p.add_argument("--cassette", default=None, help="replay cassette for offline generation")
    p.add_argument("--assets", default=None, help="workbench static assets directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExergenError as error:
        return _fail(args, error)


if __name__ == "__main__":
    sys.exit(main())
