"""Model-capability interfaces: token scoring, embedding, and generation."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SamplingParams:
    """Decoding knobs passed through to a generation backend."""

    temperature: float = 0.7
    top_p: float = 0.8
    n: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "n": self.n,
            "seed": self.seed,
        }


class TokenScorer(ABC):
    """Per-token log-probability scoring under the backend's own tokenization.

    `last_truncated` reports whether the most recent call had to drop context
    tokens from the left to fit `max_context_tokens`; it is a diagnostic, not
    part of the scoring result.
    """

    max_context_tokens: int = 8192
    last_truncated: bool = False

    @abstractmethod
    def score_tokens(self, context: str, target: str) -> list[float]:
        """One finite log-probability (<= 0) per target token, given `context`."""


class Embedder(ABC):
    """Text embedding with a fixed dimension per backend instance."""

    @property
    @abstractmethod
    def dimension(self) -> int:
        ...

    @abstractmethod
    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        """Embeddings stacked column-wise: shape (dimension, len(texts)).

        Columns are L2-normalized before anything downstream sees them.
        """


class Generator(ABC):
    """Prompted text generation."""

    @abstractmethod
    def generate_n(self, prompt: str, params: SamplingParams) -> list[str]:
        """Exactly `params.n` completions for `prompt`."""


def truncate_context(context: str, target: str, limit: int) -> tuple[str, bool]:
    """Left-truncate `context` so context+target fit a whitespace-token budget."""
    ctx_tokens = context.split()
    tgt_tokens = target.split()
    if len(ctx_tokens) + len(tgt_tokens) <= limit:
        return context, False
    keep = max(0, limit - len(tgt_tokens))
    return " ".join(ctx_tokens[len(ctx_tokens) - keep :]), True
