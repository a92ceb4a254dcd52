"""Document ingestion, sentence segmentation, and partition validation.

Sentence offsets are byte positions into the UTF-8 encoding of the document
text, so chunk extraction and the round-trip guarantee are byte-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError, PartitionError

_ASCII_TERMINALS = frozenset(".!?")
# Fullwidth terminators end a sentence unconditionally: CJK text carries no
# whitespace after them.
_FULLWIDTH_TERMINALS = frozenset("。！？")  # 。 ！ ？


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document.

    `start`/`end` are byte offsets into the UTF-8 encoded document text;
    `content` is exactly the decoded slice `text_bytes[start:end]`.
    """

    index: int
    start: int
    end: int
    content: str


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    sentences: tuple[Sentence, ...]

    @classmethod
    def from_text(cls, doc_id: str, text: str) -> "Document":
        return cls(id=doc_id, text=text, sentences=tuple(split_sentences(text)))

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)

    def encoded(self) -> bytes:
        return self.text.encode("utf-8")


@dataclass(frozen=True)
class Chunk:
    """A contiguous run of sentences, carrying its byte-exact text slice."""

    start_sentence: int
    end_sentence: int
    text: str

    @property
    def sentence_range(self) -> tuple[int, int]:
        return (self.start_sentence, self.end_sentence)


@dataclass(frozen=True)
class Partition:
    """An ordered, exact, disjoint covering of a document's sentences.

    `boundaries` holds the exclusive right edge of every chunk except the
    implicit final one; K = len(boundaries) + 1.
    """

    doc_id: str
    boundaries: tuple[int, ...]
    chunks: tuple[Chunk, ...]

    @property
    def k(self) -> int:
        return len(self.chunks)

    def chunk_texts(self) -> list[str]:
        return [c.text for c in self.chunks]


def split_sentences(text: str) -> list[Sentence]:
    """Rule-based sentence splitting with exact byte offsets.

    An ASCII terminator (. ! ?) ends a sentence when followed by whitespace or
    end of text; a fullwidth terminator (。 ！ ？) ends one unconditionally.
    There is no abbreviation list, so "e.g. x" mis-splits by design. Text with
    no terminator yields a single sentence. Total and deterministic.
    """
    n = len(text)
    spans: list[tuple[int, int]] = []
    i = 0
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        start = i
        end = -1
        j = i
        while j < n:
            ch = text[j]
            if ch in _FULLWIDTH_TERMINALS:
                end = j + 1
                break
            if ch in _ASCII_TERMINALS and (j + 1 >= n or text[j + 1].isspace()):
                end = j + 1
                break
            j += 1
        if end < 0:
            end = n
            while end > start and text[end - 1].isspace():
                end -= 1
        spans.append((start, end))
        i = end

    # Convert character spans to byte offsets in one pass.
    byte_at = _byte_offsets(text, spans)
    return [
        Sentence(index=k, start=byte_at[s], end=byte_at[e], content=text[s:e])
        for k, (s, e) in enumerate(spans)
    ]


def _byte_offsets(text: str, spans: list[tuple[int, int]]) -> dict[int, int]:
    """Byte offset of each character position referenced by `spans`."""
    wanted = sorted({p for span in spans for p in span})
    out: dict[int, int] = {}
    byte_pos = 0
    char_pos = 0
    for w in wanted:
        byte_pos += len(text[char_pos:w].encode("utf-8"))
        char_pos = w
        out[w] = byte_pos
    return out


def validate_partition(doc: Document, boundaries: list[int] | tuple[int, ...]) -> Partition:
    """Check boundary indices and derive the chunk list.

    Boundaries must be strictly increasing sentence indices in
    (0, sentence_count); an empty list is the single-chunk partition.
    """
    n = doc.sentence_count
    if n == 0:
        raise PartitionError(f"document {doc.id!r} has no sentences")
    bs = [int(b) for b in boundaries]
    for pos, b in enumerate(bs):
        if not 0 < b < n:
            raise PartitionError(
                f"boundary out of range at position {pos}: {b} (sentence count {n})"
            )
        if pos > 0 and b <= bs[pos - 1]:
            raise PartitionError(f"non-increasing at position {pos}")

    encoded = doc.encoded()
    edges = [0, *bs, n]
    chunks = []
    for a, b in zip(edges[:-1], edges[1:]):
        byte_lo = 0 if a == 0 else doc.sentences[a].start
        byte_hi = len(encoded) if b == n else doc.sentences[b].start
        chunks.append(
            Chunk(start_sentence=a, end_sentence=b, text=encoded[byte_lo:byte_hi].decode("utf-8"))
        )
    return Partition(doc_id=doc.id, boundaries=tuple(bs), chunks=tuple(chunks))


def load_jsonl(path: str | Path) -> list[Document]:
    """Load a corpus of one JSON object per line with `id` and `text` fields."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    docs: list[Document] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            ident = _where(obj, lineno)
            doc_id = obj.get("id")
            if not isinstance(doc_id, str) or not doc_id:
                raise CorpusError(f"{ident}: missing or non-string 'id'")
            if doc_id in seen:
                raise CorpusError(f"{ident}: duplicate id {doc_id!r}")
            text = obj.get("text")
            if not isinstance(text, str):
                raise CorpusError(f"{ident}: missing or non-string 'text'")
            if not text.strip():
                raise CorpusError(f"{ident}: empty text")
            seen.add(doc_id)
            docs.append(Document.from_text(doc_id, text))
    return docs


def _where(obj: dict, lineno: int) -> str:
    parts = [f"line {lineno}"]
    if isinstance(obj.get("id"), str):
        parts.append(f"id={obj['id']!r}")
    meta = obj.get("meta")
    if isinstance(meta, dict) and meta:
        parts.append(f"meta={json.dumps(meta, ensure_ascii=False, sort_keys=True)}")
    return ", ".join(parts)
