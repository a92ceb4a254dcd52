"""Baseline chunking strategies: fixed length, sentence-aware token
targeting, and semantic-similarity splitting.

All strategies cut on sentence boundaries so every output is a valid
partition and round-trips byte-exactly. The fixed-length baseline therefore
deviates from naive mid-sentence cutting; its output records the strategy as
"fixed(sentence-granular)" to flag the adaptation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clients.base import Embedder
from .corpus import Document, Partition, validate_partition
from .errors import ConfigError
from .tokenization import tokens_for_rule

STRATEGIES = ("fixed", "sentence", "semantic")
DEFAULT_TARGET_LEN = 178
DEFAULT_SIMILARITY_THRESHOLD = 0.75


@dataclass(frozen=True)
class ChunkerConfig:
    strategy: str = "sentence"
    target_len: int = DEFAULT_TARGET_LEN
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    token_rule: str = "whitespace"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.target_len < 1:
            raise ConfigError(f"target_len must be >= 1, got {self.target_len}")
        if not -1 < self.similarity_threshold < 1:
            raise ConfigError(
                f"similarity_threshold must be in (-1, 1), got {self.similarity_threshold}"
            )
        if self.token_rule not in ("whitespace", "cjk_char"):
            raise ConfigError(f"unknown token_rule {self.token_rule!r}")


def fixed_length(doc: Document, target_len: int) -> Partition:
    """Greedy accumulation by character count; cuts once a chunk reaches
    `target_len` characters (summed over sentence contents, separators
    excluded). The final chunk absorbs any remainder."""
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    n = doc.sentence_count
    boundaries: list[int] = []
    acc = 0
    for i, sent in enumerate(doc.sentences):
        acc += len(sent.content)
        if acc >= target_len and i + 1 < n:
            boundaries.append(i + 1)
            acc = 0
    return validate_partition(doc, boundaries)


def sentence_window(doc: Document, target_tokens: int, token_rule: str = "whitespace") -> Partition:
    """Greedy accumulation by token count with overshoot-minimizing cuts.

    When a sentence straddles the target, the boundary goes before or after
    it, whichever lands the chunk's token count closer to the target; ties
    cut before. A chunk never ends up empty.
    """
    if target_tokens < 1:
        raise ValueError("target_tokens must be >= 1")
    counts = [len(tokens_for_rule(s.content, token_rule)) for s in doc.sentences]
    n = doc.sentence_count
    boundaries: list[int] = []
    acc = 0
    for i, tok in enumerate(counts):
        if acc + tok < target_tokens:
            acc += tok
            continue
        # Sentence i reaches or crosses the target: cut before or after it.
        cut_before = acc > 0 and abs(acc - target_tokens) <= abs(acc + tok - target_tokens)
        if cut_before:
            if i < n:
                boundaries.append(i)
            acc = tok
        else:
            if i + 1 < n:
                boundaries.append(i + 1)
            acc = 0
    return validate_partition(doc, boundaries)


def semantic_similarity(doc: Document, embedder: Embedder, threshold: float) -> Partition:
    """Cut wherever the cosine similarity of adjacent sentences drops below
    `threshold`. Embeds all sentences in a single batch."""
    n = doc.sentence_count
    if n <= 1:
        return validate_partition(doc, [])
    matrix = embedder.embed_batch([s.content for s in doc.sentences])
    # Columns are unit-norm, so adjacent cosines are plain dot products.
    cosines = np.sum(matrix[:, :-1] * matrix[:, 1:], axis=0)
    boundaries = [i + 1 for i in range(n - 1) if cosines[i] < threshold]
    return validate_partition(doc, boundaries)


def run_chunker(doc: Document, config: ChunkerConfig, embedder: Embedder | None = None) -> Partition:
    if config.strategy == "fixed":
        return fixed_length(doc, config.target_len)
    if config.strategy == "sentence":
        return sentence_window(doc, config.target_len, config.token_rule)
    if config.strategy == "semantic":
        if embedder is None:
            raise ConfigError("semantic strategy needs an embedder")
        return semantic_similarity(doc, embedder, config.similarity_threshold)
    raise ConfigError(f"unknown strategy {config.strategy!r}")


def strategy_label(strategy: str) -> str:
    """Output label; flags the sentence-granular adaptation of `fixed`."""
    return "fixed(sentence-granular)" if strategy == "fixed" else strategy
