"""Deterministic offline backend implementing all three model capabilities.

Every output is a pure function of (inputs, seed), so full pipeline runs are
reproducible byte-for-byte without any network access.

Token scoring uses an interpolated bigram/unigram model estimated from the
scored text itself:

    P(t | prev) = 0.7 * (bigram(prev, t) + 1) / (follow(prev) + V)
                + 0.3 * (unigram(t) + 1) / (N + V)

where counts come from the whitespace tokens of context + target, V is the
vocabulary size including one UNK slot, N the total token count, and
follow(prev) the number of positions where prev has a successor. The first
target token uses the last context token as predecessor; with no context it
uses itself, which keeps constant sequences scoring uniformly. Conditioning on
text that repeats the target strengthens its counts (lower perplexity), while
unrelated context only dilutes the smoothing denominators.

Embedding is a hashed bag of words: a keyed 64-bit hash of each token selects
a coordinate and a sign, and the accumulated vector is L2-normalized.

Generation dispatches on the prompt's leading tag and emits schema-valid
structured output, so the full multi-agent pipeline runs offline.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from collections import Counter
from typing import Sequence

import numpy as np

from ..errors import BackendError
from ..tokenization import mixed_tokens
from .base import Embedder, Generator, SamplingParams, TokenScorer, truncate_context

BIGRAM_WEIGHT = 0.7
UNIGRAM_WEIGHT = 0.3

_BLOCK = re.compile(r"<<<\n(.*?)\n>>>", re.DOTALL)
_NUMBERED_LINE = re.compile(r"^(\d+): (.*)$", re.MULTILINE)
_CHUNK_RANGE = re.compile(r"Chunk sentence range:\s*(\d+)-(\d+)")
_FACT_LINE = re.compile(r"^- \((-?\d+)-(-?\d+)\) (.*)$", re.MULTILINE)
_CAPITALIZED = re.compile(r"\b[A-Z][a-z]{2,}\b")
_DEFINITION_CUES = (" is ", " are ", " means ", " stands for ")


class StubBackend(TokenScorer, Embedder, Generator):
    """Offline scorer + embedder + generator with a single seed."""

    def __init__(self, seed: int = 0, embed_dim: int = 64, max_context_tokens: int = 4096):
        if embed_dim < 2:
            raise ValueError("embed_dim must be >= 2")
        self.seed = seed
        self.embed_dim = embed_dim
        self.max_context_tokens = max_context_tokens
        self.last_truncated = False
        self._key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")

    # -- TokenScorer -------------------------------------------------------

    def score_tokens(self, context: str, target: str) -> list[float]:
        tgt = target.split()
        if not tgt:
            raise ValueError("target tokenizes to zero tokens")
        context, truncated = truncate_context(context, target, self.max_context_tokens)
        self.last_truncated = truncated
        ctx = context.split()
        stream = ctx + tgt
        vocab_size = len(set(stream)) + 1  # one UNK slot pads the denominators
        total = len(stream)
        unigram = Counter(stream)
        bigram = Counter(zip(stream, stream[1:]))
        follow = Counter(stream[:-1])

        out: list[float] = []
        base = len(ctx)
        for offset, tok in enumerate(tgt):
            j = base + offset
            prev = stream[j - 1] if j > 0 else tok
            p_big = (bigram[(prev, tok)] + 1) / (follow[prev] + vocab_size)
            p_uni = (unigram[tok] + 1) / (total + vocab_size)
            out.append(math.log(BIGRAM_WEIGHT * p_big + UNIGRAM_WEIGHT * p_uni))
        return out

    # -- Embedder ----------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.embed_dim

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            raise ValueError("embed_batch requires at least one text")
        cols = np.zeros((self.embed_dim, len(texts)), dtype=np.float64)
        for i, text in enumerate(texts):
            if not text:
                raise ValueError(f"text {i} is empty")
            for tok in mixed_tokens(text):
                h = self._hash64(tok)
                sign = 1.0 if h & (1 << 63) else -1.0
                cols[h % self.embed_dim, i] += sign
            norm = float(np.linalg.norm(cols[:, i]))
            if norm < 1e-12:
                # All contributions cancelled; fall back to a deterministic basis vector.
                cols[self._hash64("\x00" + text) % self.embed_dim, i] = 1.0
                norm = 1.0
            cols[:, i] /= norm
        return cols

    def _hash64(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "little")

    # -- Generator ---------------------------------------------------------

    def generate_n(self, prompt: str, params: SamplingParams) -> list[str]:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        tag = prompt.split(maxsplit=1)[0]
        handlers = {
            "[OUTLINE]": self._gen_outline,
            "[SEGMENT]": self._gen_segment,
            "[REVIEW]": self._gen_review,
            "[COMPLETE]": self._gen_complete,
        }
        handler = handlers.get(tag)
        if handler is None:
            raise BackendError(f"stub generator has no handler for prompt tag {tag!r}")
        return [handler(prompt, params, i) for i in range(params.n)]

    def _rng(self, prompt: str, params: SamplingParams, sample_index: int) -> random.Random:
        eff_seed = self.seed if params.seed is None else params.seed
        material = hashlib.blake2b(
            prompt.encode("utf-8"),
            digest_size=8,
            key=(eff_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
            salt=sample_index.to_bytes(8, "little"),
        ).digest()
        return random.Random(int.from_bytes(material, "little"))

    def _gen_outline(self, prompt: str, params: SamplingParams, i: int) -> str:
        text = _first_block(prompt)
        terms = _noninitial_capitalized(text)[:5]
        phrasings = (
            "What is {t} and why does it matter in this document?",
            "How does the document explain {t}?",
            "What role does {t} play in the overall argument?",
        )
        questions = [phrasings[k % len(phrasings)].format(t=t) for k, t in enumerate(terms)]
        if not questions:
            questions = ["What is the main topic of the document?"]
        return "\n".join(f"{k + 1}. {q}" for k, q in enumerate(questions))

    def _gen_segment(self, prompt: str, params: SamplingParams, i: int) -> str:
        n_sent = len(_NUMBERED_LINE.findall(prompt))
        if n_sent < 2:
            return "no split"
        chunks = max(2, int(n_sent / 5 + 0.5))
        chunks = min(chunks, n_sent)
        base = [round(k * n_sent / chunks) for k in range(1, chunks)]
        jittered = params.temperature > 0
        if jittered:
            rng = self._rng(prompt, params, i)
            base = [b + rng.choice((-1, 0, 1)) for b in base]
        bounds = sorted({b for b in base if 0 < b < n_sent})
        if not bounds:
            return "no split"
        # Alternate the two accepted reply formats across samples; greedy
        # decoding sticks to the canonical one.
        if not jittered or i % 2 == 0:
            return f"boundaries: {bounds}"
        return "\n".join(str(b) for b in bounds)

    def _gen_review(self, prompt: str, params: SamplingParams, i: int) -> str:
        m = _CHUNK_RANGE.search(prompt)
        if m is None:
            raise BackendError("review prompt lacks a chunk sentence range")
        lo, hi = int(m.group(1)), int(m.group(2))
        chunk_text = _first_block(prompt)
        sentences = {int(num): content for num, content in _NUMBERED_LINE.findall(prompt)}
        items = []
        for term in _noninitial_capitalized(chunk_text):
            for idx in sorted(sentences):
                if lo <= idx < hi:
                    continue
                content = sentences[idx].strip()
                if any(content.startswith(term + cue) for cue in _DEFINITION_CUES):
                    items.append(f"- missing: {content} | evidence: {idx}")
                    break
        if not items:
            return "VERDICT: COMPLETE"
        return "VERDICT: INCOMPLETE\n" + "\n".join(items)

    def _gen_complete(self, prompt: str, params: SamplingParams, i: int) -> str:
        chunk_text = _first_block(prompt)
        facts = [text for _, _, text in _FACT_LINE.findall(prompt)]
        if not facts:
            return chunk_text
        return chunk_text.rstrip() + " " + " ".join(f.strip() for f in facts)


def _first_block(prompt: str) -> str:
    m = _BLOCK.search(prompt)
    if m is None:
        raise BackendError("prompt lacks a <<< >>> block")
    return m.group(1)


def _noninitial_capitalized(text: str) -> list[str]:
    """Capitalized words that do not open a sentence, deduplicated in order."""
    out: list[str] = []
    seen: set[str] = set()
    for m in _CAPITALIZED.finditer(text):
        k = m.start() - 1
        while k >= 0 and text[k].isspace():
            k -= 1
        if k < 0 or text[k] in '.!?。！？"\'':
            continue
        word = m.group(0)
        if word not in seen:
            seen.add(word)
            out.append(word)
    return out
