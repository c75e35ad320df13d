from __future__ import annotations

import json

import httpx
import pytest

from exergen.errors import BackendUnavailable, CassetteMiss, ValidationError
from exergen.gateway import (
    CompletionResult,
    GenerationConfig,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ReplayCassette,
    config_digest,
)
from exergen.prompts import PromptText

CONFIG = GenerationConfig(temperature=0.0, model_id="test-model")
PROMPT = PromptText(body="Exercise prompt body\n--Problem statement--\n")


def result_with(text: str) -> CompletionResult:
    return CompletionResult(text=text, finish_reason="stop", latency=0.01, backend_id="test")


def test_config_validation():
    with pytest.raises(ValidationError):
        GenerationConfig(temperature=1.5, model_id="m")
    with pytest.raises(ValidationError):
        GenerationConfig(temperature=0.5, model_id="m", max_tokens=0)
    with pytest.raises(ValidationError):
        GenerationConfig(temperature=0.5, model_id="m", stop_sequence="")
    with pytest.raises(ValidationError):
        GenerationConfig(temperature=0.5, model_id="")


def test_config_digest_is_stable_across_equivalent_values():
    a = GenerationConfig(temperature=0, model_id="m")
    b = GenerationConfig(temperature=0.0, model_id="m")
    assert config_digest(a) == config_digest(b)
    c = GenerationConfig(temperature=0.75, model_id="m")
    assert config_digest(a) != config_digest(c)


def test_record_then_complete_returns_recorded_text(tmp_path):
    cassette = ReplayCassette(tmp_path / "c.jsonl")
    cassette.record(PROMPT, CONFIG, result_with("the recorded continuation"))
    backend = ReplayBackend(cassette)
    result = backend.complete(PROMPT, CONFIG)
    assert result.text == "the recorded continuation"


def test_empty_cassette_raises_cassette_miss(tmp_path):
    backend = ReplayBackend(ReplayCassette(tmp_path / "c.jsonl"))
    with pytest.raises(CassetteMiss) as excinfo:
        backend.complete(PROMPT, CONFIG)
    assert excinfo.value.prompt_digest
    assert excinfo.value.config_digest


def test_replay_is_deterministic(tmp_path):
    cassette = ReplayCassette(tmp_path / "c.jsonl")
    cassette.record(PROMPT, CONFIG, result_with("alpha"))
    backend = ReplayBackend(ReplayCassette(tmp_path / "c.jsonl"))
    first = backend.complete(PROMPT, CONFIG)
    second = backend.complete(PROMPT, CONFIG)
    assert first == second
    assert backend.call_count == 2


def test_two_prompts_two_entries_order_preserved(tmp_path):
    path = tmp_path / "c.jsonl"
    cassette = ReplayCassette(path)
    other = PromptText(body="another prompt\n")
    cassette.record(PROMPT, CONFIG, result_with("one"))
    cassette.record(other, CONFIG, result_with("two"))
    assert len(cassette) == 2
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["result"]["text"] == "one"
    assert json.loads(lines[1])["result"]["text"] == "two"


def test_re_record_replaces_entry_in_place(tmp_path):
    path = tmp_path / "c.jsonl"
    cassette = ReplayCassette(path)
    cassette.record(PROMPT, CONFIG, result_with("before"))
    cassette.record(PROMPT, CONFIG, result_with("after"))
    assert len(cassette) == 1
    lines = [line for line in path.read_text().splitlines() if line.strip()]
    assert len(lines) == 1
    assert json.loads(lines[0])["result"]["text"] == "after"


def test_sample_tag_distinguishes_recorded_calls(tmp_path):
    cassette = ReplayCassette(tmp_path / "c.jsonl")
    cassette.record(PROMPT, CONFIG, result_with("first try"), sample_tag="attempt:1")
    cassette.record(PROMPT, CONFIG, result_with("second try"), sample_tag="attempt:2")
    backend = ReplayBackend(cassette)
    assert backend.complete(PROMPT, CONFIG, "attempt:1").text == "first try"
    assert backend.complete(PROMPT, CONFIG, "attempt:2").text == "second try"
    with pytest.raises(CassetteMiss):
        backend.complete(PROMPT, CONFIG, "attempt:3")


def _http_backend(handler, retries=2) -> HttpBackend:
    transport = httpx.MockTransport(handler)
    return HttpBackend(
        "https://backend.invalid/v1/completions",
        api_token="secret-token",
        max_retries=retries,
        transport=transport,
    )


def test_http_backend_sends_documented_request_fields():
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen.update(json.loads(request.content))
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(
            200, json={"choices": [{"text": "completion text", "finish_reason": "stop"}]}
        )

    backend = _http_backend(handler)
    result = backend.complete(PROMPT, CONFIG)
    assert result.text == "completion text"
    assert result.finish_reason == "stop"
    assert seen["model"] == "test-model"
    assert seen["prompt"] == PROMPT.body
    assert seen["temperature"] == 0.0
    assert seen["max_tokens"] == 1024
    assert seen["stop"] == '"""'
    assert seen["auth"] == "Bearer secret-token"


def test_http_backend_strips_stop_sequence():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(
            200,
            json={"choices": [{"text": 'generated"""Exercise 3 trailing', "finish_reason": None}]},
        )

    result = _http_backend(handler).complete(PROMPT, CONFIG)
    assert result.finish_reason == "stop"
    assert '"""' not in result.text
    assert result.text == "generated"


def test_http_backend_retries_transient_errors():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        if calls["n"] < 3:
            return httpx.Response(500, text="flaky")
        return httpx.Response(200, json={"choices": [{"text": "ok", "finish_reason": "stop"}]})

    result = _http_backend(handler).complete(PROMPT, CONFIG)
    assert result.text == "ok"
    assert calls["n"] == 3


def test_http_backend_gives_up_after_retries():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503, text="down")

    with pytest.raises(BackendUnavailable):
        _http_backend(handler, retries=1).complete(PROMPT, CONFIG)


def test_http_backend_auth_failure_fails_fast():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        return httpx.Response(401, text="bad token")

    with pytest.raises(BackendUnavailable):
        _http_backend(handler).complete(PROMPT, CONFIG)
    assert calls["n"] == 1


def test_http_backend_caps_concurrent_requests():
    import threading
    import time

    active = {"now": 0, "peak": 0}
    gate = threading.Lock()

    def handler(request: httpx.Request) -> httpx.Response:
        with gate:
            active["now"] += 1
            active["peak"] = max(active["peak"], active["now"])
        time.sleep(0.05)
        with gate:
            active["now"] -= 1
        return httpx.Response(200, json={"choices": [{"text": "ok", "finish_reason": "stop"}]})

    backend = HttpBackend(
        "https://backend.invalid/v1/completions",
        max_concurrency=2,
        transport=httpx.MockTransport(handler),
    )
    threads = [
        threading.Thread(target=backend.complete, args=(PROMPT, CONFIG))
        for _ in range(6)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert active["peak"] <= 2
    assert backend.call_count == 6


def test_http_backend_honors_min_interval():
    import time

    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"choices": [{"text": "ok", "finish_reason": "stop"}]})

    backend = HttpBackend(
        "https://backend.invalid/v1/completions",
        min_interval=0.05,
        transport=httpx.MockTransport(handler),
    )
    started = time.monotonic()
    for _ in range(3):
        backend.complete(PROMPT, CONFIG)
    assert time.monotonic() - started >= 0.10


def test_recording_backend_round_trips_to_replay(tmp_path):
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(
            200, json={"choices": [{"text": "live completion", "finish_reason": "stop"}]}
        )

    path = tmp_path / "session.jsonl"
    recorder = RecordingBackend(_http_backend(handler), ReplayCassette(path))
    live = recorder.complete(PROMPT, CONFIG, sample_tag="attempt:1")

    replay = ReplayBackend(ReplayCassette(path))
    replayed = replay.complete(PROMPT, CONFIG, sample_tag="attempt:1")
    assert replayed == live
    assert replayed.text == "live completion"


def test_stop_strip_invariant_on_results(tmp_path):
    cassette = ReplayCassette(tmp_path / "c.jsonl")
    cassette.record(PROMPT, CONFIG, result_with("clean text"))
    result = ReplayBackend(cassette).complete(PROMPT, CONFIG)
    if result.finish_reason == "stop":
        assert CONFIG.stop_sequence not in result.text
