"""Uniform client for text-completion backends.

Two backends share one interface: a remote JSON-over-HTTP completion
endpoint, and a replay backend that serves previously recorded completions
from a cassette file.  The remote model is not deterministic, so every
offline test and demo runs against a cassette; cassettes are keyed by
content digests of the prompt body and the normalized generation config.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import BackendUnavailable, CassetteMiss, ValidationError
from .prompts import STOP_SEQUENCE, PromptText

FINISH_STOP = "stop"
FINISH_LENGTH = "length"

DEFAULT_MAX_TOKENS = 1024
DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 3


@dataclass(frozen=True)
class GenerationConfig:
    """Completion parameters: sampling temperature, output budget, the stop
    sequence that terminates generation, and the backend model id."""

    temperature: float
    model_id: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    stop_sequence: str = STOP_SEQUENCE

    def __post_init__(self):
        object.__setattr__(self, "temperature", float(self.temperature))
        if not 0.0 <= self.temperature <= 1.0:
            raise ValidationError(f"temperature {self.temperature} outside [0, 1]")
        if self.max_tokens < 1:
            raise ValidationError("max_tokens must be >= 1")
        if not self.stop_sequence:
            raise ValidationError("stop_sequence must be non-empty")
        if not self.model_id:
            raise ValidationError("model_id must be non-empty")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "model_id": self.model_id,
            "max_tokens": self.max_tokens,
            "stop_sequence": self.stop_sequence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationConfig":
        return cls(
            temperature=data["temperature"],
            model_id=data["model_id"],
            max_tokens=data.get("max_tokens", DEFAULT_MAX_TOKENS),
            stop_sequence=data.get("stop_sequence", STOP_SEQUENCE),
        )


@dataclass(frozen=True)
class CompletionResult:
    """One generated continuation, stop sequence already stripped."""

    text: str
    finish_reason: str
    latency: float
    backend_id: str

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "finish_reason": self.finish_reason,
            "latency": self.latency,
            "backend_id": self.backend_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompletionResult":
        return cls(
            text=data["text"],
            finish_reason=data["finish_reason"],
            latency=data["latency"],
            backend_id=data["backend_id"],
        )


def prompt_digest(prompt: PromptText) -> str:
    return hashlib.sha256(prompt.body.encode("utf-8")).hexdigest()


def config_digest(config: GenerationConfig) -> str:
    payload = json.dumps(config.to_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _strip_stop(text: str, stop_sequence: str, finish_reason: str) -> tuple[str, str]:
    if stop_sequence in text:
        return text.split(stop_sequence, 1)[0], FINISH_STOP
    return text, finish_reason


class ReplayCassette:
    """An ordered store of recorded completions, one JSON object per line.

    Keys are (prompt digest, config digest, sample tag).  The sample tag
    distinguishes repeated calls with identical prompt and config (loop
    attempts, grid repeats, explanation samples), which a live backend
    answers non-deterministically.  Re-recording a key replaces the existing
    entry in place, so the file never grows duplicates.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str, str], CompletionResult] = {}
        self._order: list[tuple[str, str, str]] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                key = (
                    entry["prompt_digest"],
                    entry["config_digest"],
                    entry.get("sample_tag", ""),
                )
                if key not in self._entries:
                    self._order.append(key)
                self._entries[key] = CompletionResult.from_dict(entry["result"])

    def __len__(self) -> int:
        return len(self._order)

    def lookup(
        self, prompt: PromptText, config: GenerationConfig, sample_tag: str = ""
    ) -> CompletionResult | None:
        return self._entries.get((prompt_digest(prompt), config_digest(config), sample_tag))

    def record(
        self,
        prompt: PromptText,
        config: GenerationConfig,
        result: CompletionResult,
        sample_tag: str = "",
    ) -> None:
        """Append a recorded completion; replaces any prior entry for the
        same (prompt, config, sample_tag) key."""
        key = (prompt_digest(prompt), config_digest(config), sample_tag)
        with self._lock:
            replacing = key in self._entries
            self._entries[key] = result
            if not replacing:
                self._order.append(key)
            if self.path is None:
                return
            if replacing:
                self._rewrite()
            else:
                line = self._entry_line(key)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")

    def _entry_line(self, key: tuple[str, str, str]) -> str:
        return json.dumps(
            {
                "prompt_digest": key[0],
                "config_digest": key[1],
                "sample_tag": key[2],
                "result": self._entries[key].to_dict(),
            },
            ensure_ascii=False,
        )

    def _rewrite(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(
            "".join(self._entry_line(key) + "\n" for key in self._order),
            encoding="utf-8",
        )
        tmp.replace(self.path)


class ReplayBackend:
    """Serves completions from a cassette only; a pure function of
    (prompt, config, cassette)."""

    def __init__(self, cassette: ReplayCassette):
        self.cassette = cassette
        self.backend_id = "replay"
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return self._calls

    def complete(
        self, prompt: PromptText, config: GenerationConfig, sample_tag: str = ""
    ) -> CompletionResult:
        with self._lock:
            self._calls += 1
        result = self.cassette.lookup(prompt, config, sample_tag)
        if result is None:
            raise CassetteMiss(prompt_digest(prompt), config_digest(config))
        return result


class HttpBackend:
    """Remote completion endpoint client.

    Sends ``{model, prompt, temperature, max_tokens, stop}`` as JSON, retries
    transient failures with bounded exponential backoff, caps in-flight
    requests, and honors a minimum interval between calls.
    """

    def __init__(
        self,
        base_url: str,
        api_token: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        max_retries: int = DEFAULT_RETRIES,
        max_concurrency: int = 4,
        min_interval: float = 0.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.backend_id = f"http:{base_url}"
        self._url = base_url
        self._timeout = timeout
        self._max_retries = max_retries
        self._min_interval = min_interval
        self._semaphore = threading.BoundedSemaphore(max_concurrency)
        self._rate_lock = threading.Lock()
        self._last_call = 0.0
        self._calls = 0
        self._count_lock = threading.Lock()
        headers = {"Authorization": f"Bearer {api_token}"} if api_token else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @property
    def call_count(self) -> int:
        return self._calls

    def _pace(self) -> None:
        if self._min_interval <= 0:
            return
        with self._rate_lock:
            wait = self._last_call + self._min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_call = time.monotonic()

    def complete(
        self, prompt: PromptText, config: GenerationConfig, sample_tag: str = ""
    ) -> CompletionResult:
        # The live model is sampled fresh on every call; the sample tag only
        # matters for record/replay keying.
        with self._count_lock:
            self._calls += 1
        payload = {
            "model": config.model_id,
            "prompt": prompt.body,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "stop": config.stop_sequence,
        }
        attempt = 0
        last_error: Exception | None = None
        with self._semaphore:
            while attempt <= self._max_retries:
                self._pace()
                started = time.monotonic()
                try:
                    response = self._client.post(self._url, json=payload)
                except httpx.HTTPError as exc:
                    last_error = exc
                else:
                    if response.status_code == 200:
                        return self._parse(response, config, time.monotonic() - started)
                    if response.status_code not in (429,) and response.status_code < 500:
                        raise BackendUnavailable(
                            f"completion endpoint returned {response.status_code}: "
                            f"{response.text[:200]}"
                        )
                    last_error = BackendUnavailable(
                        f"completion endpoint returned {response.status_code}"
                    )
                attempt += 1
                if attempt <= self._max_retries:
                    time.sleep(min(0.5 * 2 ** (attempt - 1), 8.0))
        raise BackendUnavailable(
            f"completion request failed after {self._max_retries + 1} attempts: {last_error}"
        )

    def _parse(
        self, response: httpx.Response, config: GenerationConfig, latency: float
    ) -> CompletionResult:
        try:
            data = response.json()
        except ValueError as exc:
            raise BackendUnavailable(f"completion endpoint returned invalid JSON: {exc}")
        if "choices" in data:
            choice = data["choices"][0]
            text = choice.get("text", "")
            finish = choice.get("finish_reason") or FINISH_LENGTH
        else:
            text = data.get("text", "")
            finish = data.get("finish_reason") or FINISH_LENGTH
        text, finish = _strip_stop(text, config.stop_sequence, finish)
        return CompletionResult(
            text=text, finish_reason=finish, latency=latency, backend_id=self.backend_id
        )


class RecordingBackend:
    """Wraps a live backend and records every completion into a cassette."""

    def __init__(self, inner, cassette: ReplayCassette):
        self._inner = inner
        self.cassette = cassette
        self.backend_id = inner.backend_id

    @property
    def call_count(self) -> int:
        return self._inner.call_count

    def complete(
        self, prompt: PromptText, config: GenerationConfig, sample_tag: str = ""
    ) -> CompletionResult:
        result = self._inner.complete(prompt, config, sample_tag)
        self.cassette.record(prompt, config, result, sample_tag)
        return result
