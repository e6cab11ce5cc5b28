"""Exception types shared across the auditor."""

from __future__ import annotations


class CryptoAuditError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigError(CryptoAuditError):
    """Invalid or incomplete configuration."""


class ChunkPolicyError(ConfigError):
    """A document's source type has no chunking rule."""


class CorpusFormatError(CryptoAuditError):
    """Corpus file violates the record-per-line contract or a chunk invariant."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmbeddingProviderError(CryptoAuditError):
    """Embedding provider failed; carries the provider tag for diagnostics."""

    def __init__(self, message: str, provider_tag: str = ""):
        super().__init__(f"[{provider_tag}] {message}" if provider_tag else message)
        self.provider_tag = provider_tag


class DimensionMismatchError(CryptoAuditError):
    """Query vector dimension differs from the index dimension."""


class ProviderTagMismatchError(CryptoAuditError):
    """Index was built with a different embedding provider; rebuild required."""


class CorpusIndexMismatchError(CryptoAuditError):
    """Index references a chunk id that the corpus cannot resolve."""


class GatewayError(CryptoAuditError):
    """Chat backend failure."""


class TransientBackendError(GatewayError):
    """Retryable backend failure (timeouts, 5xx, connection resets)."""


class GatewayExhaustedError(GatewayError):
    """All retry attempts failed."""


class UnscriptedCallError(GatewayError):
    """Strict scripted mock received a request it has no reply for."""


class PromptOverBudgetError(CryptoAuditError):
    """Prompt cannot be assembled within the configured size budget."""


class StructuredOutputError(CryptoAuditError):
    """Model reply did not contain the mandated machine-parseable block.

    Keeps the raw reply around so failures can be debugged offline.
    """

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class CurveExtractionError(CryptoAuditError):
    """Model-reported curve parameters failed local validation."""


class JudgeError(CryptoAuditError):
    """Judge reply unusable after the permitted retry."""
