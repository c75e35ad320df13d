from __future__ import annotations

from pathlib import Path

import pytest

from exergen.config import AppConfig, load_config
from exergen.errors import ValidationError

EXAMPLE = Path(__file__).parent.parent / "configs" / "example.toml"


def test_defaults_without_file():
    config = load_config(None)
    assert config == AppConfig()
    assert config.generation.stop_sequence == '"""'
    assert config.sandbox.timeout == 10.0


def test_example_config_loads():
    config = load_config(EXAMPLE)
    assert config.backend.url == "https://api.example.com/v1/completions"
    assert config.backend.model == "completion-model"
    assert config.generation.max_tokens == 1024
    assert config.store_root == "./exergen-store"


def test_api_token_read_from_named_env(monkeypatch):
    config = load_config(EXAMPLE)
    monkeypatch.delenv("EXERGEN_API_TOKEN", raising=False)
    assert config.backend.api_token is None
    monkeypatch.setenv("EXERGEN_API_TOKEN", "sekrit")
    assert config.backend.api_token == "sekrit"


def test_unknown_sections_and_keys_rejected(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[backnd]\nurl = 'x'\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_config(bad)
    bad.write_text("[backend]\nurll = 'x'\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_config(bad)
    with pytest.raises(ValidationError):
        load_config(tmp_path / "absent.toml")
