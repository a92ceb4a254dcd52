"""Prompt templates for the four pipeline agents.

Templates are versioned text assets: output parsing depends on their wording,
so runs record `template_hash` and any template edit shows up in run metadata.
Each prompt opens with a routing tag ([OUTLINE]/[SEGMENT]/[REVIEW]/[COMPLETE])
that the offline stub backend dispatches on.
"""

from __future__ import annotations

import hashlib

from .corpus import Document

OUTLINE_TEMPLATE = """[OUTLINE] You are a domain expert reading an unfamiliar document before indexing it.
Write a numbered list of the questions an expert would ask to master this document: its motivation, core assumptions, methodology, and key conclusions.
One question per line, formatted exactly as "1. <question>". Do not answer them.

Document:
<<<
{text}
>>>
"""

SEGMENT_TEMPLATE = """[SEGMENT] Split the document below into logically coherent chunks for a retrieval knowledge base, guided by the question outline.
Reply with one line of the form "boundaries: [i, j, ...]" listing the indices of the sentences that start a new chunk, each strictly between 0 and {sentence_count}. Reply "no split" to keep the document as a single chunk.

Guiding questions:
{questions}

Sentences:
{numbered_sentences}
"""

REVIEW_TEMPLATE = """[REVIEW] Judge whether the chunk below is understandable in isolation, or whether it references definitions, background, or context that live elsewhere in the document.
First line: "VERDICT: COMPLETE" or "VERDICT: INCOMPLETE".
Then one line per missing item, formatted as "- missing: <the missing information> | evidence: <sentence index or a-b range>".
Every cited item must be stated verbatim in the document sentences outside the chunk; never extrapolate or invent.

Chunk sentence range: {start}-{end}
Chunk:
<<<
{chunk_text}
>>>

Document sentences:
{numbered_sentences}
"""

COMPLETE_TEMPLATE = """[COMPLETE] Rewrite the chunk so that it stands alone, integrating the supplementary facts seamlessly and in a natural position.
Keep every statement of the original chunk; do not summarize or drop content. Reply with the rewritten chunk text only.

Chunk:
<<<
{chunk_text}
>>>

Supplementary facts:
{facts}
"""

STRICT_FORMAT_REMINDER = (
    "\nFORMAT REMINDER: your previous reply could not be parsed. "
    "Follow the requested line format exactly, with no commentary.\n"
)


def template_hash() -> str:
    joined = "\x00".join(
        [OUTLINE_TEMPLATE, SEGMENT_TEMPLATE, REVIEW_TEMPLATE, COMPLETE_TEMPLATE]
    )
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:16]


def numbered_sentences(doc: Document, lo: int = 0, hi: int | None = None) -> str:
    hi = doc.sentence_count if hi is None else hi
    return "\n".join(f"{s.index}: {s.content}" for s in doc.sentences[lo:hi])


def outline_prompt(doc: Document) -> str:
    return OUTLINE_TEMPLATE.format(text=doc.text)


def segment_prompt(doc: Document, questions: list[str] | tuple[str, ...]) -> str:
    qs = "\n".join(f"{i + 1}. {q}" for i, q in enumerate(questions))
    return SEGMENT_TEMPLATE.format(
        sentence_count=doc.sentence_count,
        questions=qs,
        numbered_sentences=numbered_sentences(doc),
    )


def review_prompt(doc: Document, start: int, end: int, chunk_text: str, window: str) -> str:
    return REVIEW_TEMPLATE.format(
        start=start,
        end=end,
        chunk_text=chunk_text,
        numbered_sentences=window,
    )


def complete_prompt(chunk_text: str, facts: list[tuple[tuple[int, int] | None, str]]) -> str:
    lines = []
    for span, text in facts:
        a, b = span if span is not None else (-1, -1)
        lines.append(f"- ({a}-{b}) {text}")
    return COMPLETE_TEMPLATE.format(chunk_text=chunk_text, facts="\n".join(lines))
