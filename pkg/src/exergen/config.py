"""Application configuration: backend endpoint, generation defaults, sandbox
limits and store root, loaded from a TOML file with environment overrides
for the credential."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError

DEFAULT_TOKEN_ENV = "EXERGEN_API_TOKEN"


@dataclass(frozen=True)
class BackendConfig:
    url: str = ""
    model: str = "completion-model"
    token_env: str = DEFAULT_TOKEN_ENV
    timeout: float = 120.0
    retries: int = 3
    max_concurrency: int = 4
    min_interval: float = 0.0

    @property
    def api_token(self) -> str | None:
        return os.environ.get(self.token_env)


@dataclass(frozen=True)
class GenerationDefaults:
    max_tokens: int = 1024
    stop_sequence: str = '"""'


@dataclass(frozen=True)
class SandboxConfig:
    timeout: float = 10.0
    max_output_bytes: int = 1024 * 1024
    max_concurrent: int | None = None


@dataclass(frozen=True)
class AppConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    generation: GenerationDefaults = field(default_factory=GenerationDefaults)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    store_root: str = "./exergen-store"


def load_config(path: str | Path | None = None) -> AppConfig:
    """Defaults when no file is given; unknown keys are rejected so typos
    fail loudly."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        data = tomllib.load(fh)

    known = {"backend", "generation", "sandbox", "store"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")

    def section(name: str, cls, **extra):
        values = dict(data.get(name, {}))
        values.update(extra)
        try:
            return cls(**values)
        except TypeError as exc:
            raise ValidationError(f"bad [{name}] config: {exc}")

    store_values = data.get("store", {})
    return AppConfig(
        backend=section("backend", BackendConfig),
        generation=section("generation", GenerationDefaults),
        sandbox=section("sandbox", SandboxConfig),
        store_root=str(store_values.get("root", "./exergen-store")),
    )
