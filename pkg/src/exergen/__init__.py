"""exergen: generate, validate and curate programming exercise bundles with
an LLM completion backend."""

__version__ = "0.1.0"
