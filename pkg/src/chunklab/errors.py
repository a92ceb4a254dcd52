"""Exception types shared across the toolkit."""

from __future__ import annotations


class ChunklabError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(ChunklabError):
    """Corpus file or document content is invalid."""


class PartitionError(ChunklabError):
    """A boundary list does not describe a valid partition."""


class ConfigError(ChunklabError):
    """Configuration is missing or inconsistent."""


class BackendError(ChunklabError):
    """A model backend failed (transport, protocol, or exhausted retries)."""


class GenerationParseError(ChunklabError):
    """Model output could not be parsed into the expected structure."""


class DegenerateInputError(ChunklabError):
    """Statistical input has no variance or is otherwise degenerate."""


class PipelineError(ChunklabError):
    """A pipeline stage failed; carries the stage name and a partial record."""

    def __init__(self, stage: str, message: str, partial: dict | None = None):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
        self.partial = partial or {}
