from .base import Embedder, Generator, SamplingParams, TokenScorer, truncate_context
from .http import HttpBackend, HttpConfig
from .stub import StubBackend

__all__ = [
    "Embedder",
    "Generator",
    "SamplingParams",
    "TokenScorer",
    "truncate_context",
    "HttpBackend",
    "HttpConfig",
    "StubBackend",
]
