"""Exception types shared across the pipeline."""

from __future__ import annotations


class ExergenError(Exception):
    """Base class for all domain errors."""

    code = "error"


class ValidationError(ExergenError):
    """Input violates a documented precondition or invariant."""

    code = "validation"


class BackendUnavailable(ExergenError):
    """Remote completion backend unreachable after retries."""

    code = "backend_unavailable"


class CassetteMiss(ExergenError):
    """Replay backend has no entry for the requested (prompt, config) pair."""

    code = "cassette_miss"

    def __init__(self, prompt_digest: str, config_digest: str):
        super().__init__(
            f"no cassette entry for prompt={prompt_digest[:12]} config={config_digest[:12]}"
        )
        self.prompt_digest = prompt_digest
        self.config_digest = config_digest


class InfrastructureError(ExergenError):
    """The harness itself failed (runtime missing, shim crash); never a verdict."""

    code = "infrastructure"


class NotFound(ExergenError):
    """No stored entity with the given id."""

    code = "not_found"


class ReferenceViolation(ExergenError):
    """An entity points at another entity that does not exist."""

    code = "reference_violation"


class ConflictError(ExergenError):
    """The request contradicts already-recorded state (e.g. a second,
    different consensus resolution for the same field)."""

    code = "conflict"


class RegenerationExhausted(ExergenError):
    """A budgeted generate-and-validate loop ran out of attempts.

    Carries the full audit trail so callers can inspect every rejected attempt.
    """

    code = "exhausted"

    def __init__(self, message: str, attempts: list):
        super().__init__(message)
        self.attempts = attempts
