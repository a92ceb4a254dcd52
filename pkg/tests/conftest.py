"""Shared fixtures: constructed documents and fake backends."""

from __future__ import annotations

import numpy as np
import pytest

from chunklab import Document, SamplingParams, StubBackend
from chunklab.clients.base import Embedder, Generator, TokenScorer

# Two topical halves sharing function words; used for boundary-independence
# ordering. Each half reuses a tight vocabulary pool so that conditioning on
# same-topic text genuinely helps the stub scorer.
TWO_TOPIC_A = (
    "The coral polyps host the algae in the warm lagoon water.",
    "The algae feed the coral polyps in the warm reef water.",
    "The warm water and the algae host the coral polyps in the reef.",
    "The coral polyps and the algae feed the warm reef water in the lagoon.",
    "The reef and the lagoon host the coral polyps in the warm water.",
    "The warm lagoon water and the reef feed the coral polyps and the algae.",
)
TWO_TOPIC_B = (
    "The compiler lowers the code into the machine code through the passes.",
    "Each pass rewrites the instruction graph and the scheduler orders the machine code.",
    "The register pass assigns the machine registers across the instruction graph.",
    "The scheduler keeps the cache and the passes aligned with the machine code.",
    "The final pass emits the machine code and the scheduler verifies the instruction graph.",
    "The compiler and the scheduler keep the instruction graph aligned with the machine code.",
)
TWO_TOPIC_SHIFT = len(TWO_TOPIC_A)

# Fully disjoint vocabularies (function words included), with permutation-level
# repetition inside each half; used for the semantic chunker.
DISJOINT_A = (
    "the coral polyps host the algae in the warm lagoon water.",
    "the algae host the coral polyps in the warm lagoon water.",
    "the warm lagoon water host the coral polyps in the algae.",
    "the coral polyps host the warm algae in the lagoon water.",
)
DISJOINT_B = (
    "compilers rewrite machine code across instruction graphs during typed passes.",
    "typed passes rewrite machine code across instruction graphs during compilers.",
    "instruction graphs rewrite machine code across typed passes during compilers.",
    "machine code rewrite typed passes across instruction graphs during compilers.",
)
DISJOINT_SHIFT = len(DISJOINT_A)

# Two-topic document with a planted dependency: sentence 8 references the
# capitalized term Symbiosis, defined in sentence 1 (outside the second
# chunk). The definition is written entirely from the second half's
# vocabulary so that appending it lowers the stub perplexity of that chunk.
DEPENDENCY_A = (
    "The coral polyps host the algae in the warm lagoon water.",
    "Symbiosis is the pattern that the scheduler exploits so the cache and the"
    " passes stay aligned with the machine code.",
    "The warm water and the algae host the coral polyps in the reef.",
    "The coral polyps and the algae feed the warm reef water in the lagoon.",
    "The reef and the lagoon host the coral polyps in the warm water.",
)
DEPENDENCY_B = (
    "The compiler lowers the code into the machine code through the passes.",
    "Each pass rewrites the instruction graph and the scheduler orders the machine code.",
    "The register pass is the pattern that assigns the machine registers across"
    " the instruction graph.",
    "The scheduler exploits Symbiosis so the cache and the passes stay aligned"
    " with the machine code.",
    "The final pass emits the machine code and the scheduler verifies the instruction graph.",
)
DEPENDENCY_SHIFT = len(DEPENDENCY_A)
DEPENDENCY_DEFINITION_INDEX = 1
DEPENDENCY_REFERENCE_INDEX = 8


def make_doc(doc_id: str, sentences) -> Document:
    return Document.from_text(doc_id, " ".join(sentences))


@pytest.fixture
def two_topic_doc() -> Document:
    return make_doc("two-topic", TWO_TOPIC_A + TWO_TOPIC_B)


@pytest.fixture
def disjoint_doc() -> Document:
    return make_doc("disjoint", DISJOINT_A + DISJOINT_B)


@pytest.fixture
def dependency_doc() -> Document:
    return make_doc("dependency", DEPENDENCY_A + DEPENDENCY_B)


@pytest.fixture
def stub() -> StubBackend:
    return StubBackend(seed=7)


class FixedScorer(TokenScorer):
    """Returns preset log-prob lists keyed by (context, target)."""

    max_context_tokens = 10**9

    def __init__(self, table: dict[tuple[str, str], list[float]]):
        self.table = table

    def score_tokens(self, context, target):
        return list(self.table[(context, target)])


class ConstantScorer(TokenScorer):
    """Every token of every target scores the same log-probability."""

    max_context_tokens = 10**9

    def __init__(self, logprob: float):
        self.logprob = logprob

    def score_tokens(self, context, target):
        return [self.logprob] * len(target.split())


class ScriptedGenerator(Generator):
    """Replays canned outputs per prompt tag; unknown tags raise."""

    def __init__(self, outputs: dict[str, list[str]]):
        self.outputs = dict(outputs)
        self.calls: list[str] = []

    def generate_n(self, prompt, params: SamplingParams):
        tag = prompt.split(maxsplit=1)[0]
        self.calls.append(tag)
        if tag not in self.outputs:
            raise KeyError(f"no scripted output for {tag}")
        pool = self.outputs[tag]
        return [pool[i % len(pool)] for i in range(params.n)]


class FixedEmbedder(Embedder):
    """Maps each distinct text to a preset column."""

    def __init__(self, mapping: dict[str, np.ndarray]):
        self.mapping = {k: np.asarray(v, dtype=np.float64) for k, v in mapping.items()}
        self._dim = len(next(iter(self.mapping.values())))

    @property
    def dimension(self):
        return self._dim

    def embed_batch(self, texts):
        cols = np.stack([self.mapping[t] for t in texts], axis=1)
        return cols / np.linalg.norm(cols, axis=0)
