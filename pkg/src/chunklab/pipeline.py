"""Question-aware chunking pipeline.

Stages: question-outline generation, multi-path candidate segmentation with
composite-score selection, per-chunk integrity review, and grounded knowledge
completion. Under the stub backend a run is reproducible byte-for-byte for a
fixed seed.
"""

from __future__ import annotations

import hashlib
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from . import prompts
from .chunkers import DEFAULT_TARGET_LEN, sentence_window
from .clients.base import Embedder, Generator, SamplingParams, TokenScorer
from .corpus import Chunk, Document, Partition, split_sentences, validate_partition
from .errors import BackendError, ChunklabError, GenerationParseError, PipelineError
from .metrics import (
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA,
    ScoreBreakdown,
    chunk_score,
    rouge_l,
    score_chunk_texts,
)

log = logging.getLogger(__name__)

GROUNDING_RECALL_THRESHOLD = 0.5
COVERAGE_SENTENCE_RECALL = 0.8
COVERAGE_RATIO_GATE = 0.9


# -- domain types ------------------------------------------------------------


@dataclass(frozen=True)
class QuestionOutline:
    questions: tuple[str, ...]

    def __post_init__(self):
        if not self.questions:
            raise ValueError("outline must contain at least one question")
        if len(set(self.questions)) != len(self.questions):
            raise ValueError("outline questions must be deduplicated")


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[Partition, ...]
    sampling: SamplingParams
    raw_outputs: tuple[str, ...]
    fallback: bool = False

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidate set must be non-empty")
        seen = {c.boundaries for c in self.candidates}
        if len(seen) != len(self.candidates):
            raise ValueError("candidates must be deduplicated by boundary list")


@dataclass(frozen=True)
class MissingItem:
    description: str
    evidence_span: tuple[int, int] | None = None
    grounded: bool = False

    def __post_init__(self):
        if self.grounded and self.evidence_span is None:
            raise ValueError("a grounded item must carry an evidence span")

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "evidence_span": list(self.evidence_span) if self.evidence_span else None,
            "grounded": self.grounded,
        }


@dataclass(frozen=True)
class ReviewReport:
    chunk_index: int
    missing: tuple[MissingItem, ...]
    needs_completion: bool

    def __post_init__(self):
        if self.needs_completion and not self.missing:
            raise ValueError("a completion verdict requires at least one missing item")

    def to_dict(self) -> dict:
        return {
            "chunk_index": self.chunk_index,
            "missing": [m.to_dict() for m in self.missing],
            "needs_completion": self.needs_completion,
        }


@dataclass(frozen=True)
class CompletedChunk:
    original: Chunk
    supplements: tuple[MissingItem, ...]
    rewritten_text: str
    coverage_ratio: float
    fallback_concat: bool = False

    def __post_init__(self):
        if not self.supplements:
            raise ValueError("a completed chunk must carry supplements")
        if any(not item.grounded for item in self.supplements):
            raise ValueError("every supplement must be grounded")
        if not 0 <= self.coverage_ratio <= 1:
            raise ValueError(f"coverage_ratio out of range: {self.coverage_ratio}")


@dataclass(frozen=True)
class PipelineResult:
    doc_id: str
    outline: QuestionOutline
    candidates: CandidateSet
    scores: tuple[ScoreBreakdown | None, ...]
    selected_index: int
    reviews: tuple[ReviewReport, ...]
    completed: tuple[Chunk | CompletedChunk, ...]
    run_meta: dict
    audit: dict

    @property
    def selected_partition(self) -> Partition:
        return self.candidates.candidates[self.selected_index]

    def to_json_dict(self, include_timings: bool = False) -> dict:
        meta = dict(self.run_meta)
        if not include_timings:
            meta.pop("timings", None)
        completed = []
        for entry in self.completed:
            if isinstance(entry, CompletedChunk):
                completed.append(
                    {
                        "kind": "completed",
                        "original": _chunk_dict(entry.original),
                        "supplements": [m.to_dict() for m in entry.supplements],
                        "rewritten_text": entry.rewritten_text,
                        "coverage_ratio": entry.coverage_ratio,
                        "fallback_concat": entry.fallback_concat,
                    }
                )
            else:
                completed.append({"kind": "original", **_chunk_dict(entry)})
        return {
            "doc_id": self.doc_id,
            "outline": {"questions": list(self.outline.questions)},
            "candidates": {
                "boundaries": [list(c.boundaries) for c in self.candidates.candidates],
                "raw_outputs": list(self.candidates.raw_outputs),
                "sampling": self.candidates.sampling.to_dict(),
                "fallback": self.candidates.fallback,
            },
            "scores": [s.to_dict() if s is not None else None for s in self.scores],
            "selected_index": self.selected_index,
            "reviews": [r.to_dict() for r in self.reviews],
            "completed": completed,
            "audit": self.audit,
            "run_meta": meta,
        }


def _chunk_dict(chunk: Chunk) -> dict:
    return {
        "start_sentence": chunk.start_sentence,
        "end_sentence": chunk.end_sentence,
        "text": chunk.text,
    }


@dataclass
class PipelineConfig:
    scorer: TokenScorer
    embedder: Embedder
    generator: Generator
    lam: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_ALPHA
    candidates_p: int = 5
    sampling: SamplingParams = field(default_factory=SamplingParams)
    parallelism: int = 1
    review_window_tokens: int = 4000
    rescore_completed: bool = False
    backend_kind: str = "stub"
    seed: int = 0


@dataclass(frozen=True)
class Selection:
    selected_index: int
    scores: tuple[ScoreBreakdown | None, ...]
    failures: dict[int, str]


# -- stage operations --------------------------------------------------------


def generate_outline(gen: Generator, doc: Document, params: SamplingParams | None = None) -> QuestionOutline:
    """Ask the generator for expert-style questions about the document."""
    params = replace(params or SamplingParams(), n=1)
    prompt = prompts.outline_prompt(doc)
    raw = gen.generate_n(prompt, params)[0]
    questions = parse_outline(raw)
    if not questions:
        raw = gen.generate_n(prompt + prompts.STRICT_FORMAT_REMINDER, params)[0]
        questions = parse_outline(raw)
        if not questions:
            raise GenerationParseError(f"no parseable questions in outline reply: {raw[:200]!r}")
    return QuestionOutline(questions=tuple(questions))


_NUMBERED_Q = re.compile(r"^\s*\d+[.)]\s+(.*\S)\s*$")
_BULLET_Q = re.compile(r"^\s*[-*]\s+(.*\S)\s*$")


def parse_outline(raw: str) -> list[str]:
    questions: list[str] = []
    seen: set[str] = set()
    for line in raw.splitlines():
        m = _NUMBERED_Q.match(line) or _BULLET_Q.match(line)
        if m:
            text = m.group(1)
        else:
            text = line.strip()
            if not text.endswith(("?", "？")):
                continue
        if text and text not in seen:
            seen.add(text)
            questions.append(text)
    return questions


def sample_candidates(
    gen: Generator,
    doc: Document,
    outline: QuestionOutline,
    p: int,
    params: SamplingParams,
) -> CandidateSet:
    """Draw p segmentation proposals and keep the distinct parseable ones.

    If no proposal parses, falls back to the sentence-aware baseline as a
    single candidate and flags the set.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    gen_params = replace(params, n=p)
    prompt = prompts.segment_prompt(doc, outline.questions)
    raws = gen.generate_n(prompt, gen_params)
    candidates: list[Partition] = []
    seen: set[tuple[int, ...]] = set()
    for raw in raws:
        try:
            part = parse_segmenter_output(raw, doc)
        except GenerationParseError as exc:
            log.debug("discarding unparseable proposal: %s", exc)
            continue
        if part.boundaries not in seen:
            seen.add(part.boundaries)
            candidates.append(part)
    fallback = not candidates
    if fallback:
        candidates = [sentence_window(doc, DEFAULT_TARGET_LEN)]
    return CandidateSet(
        candidates=tuple(candidates),
        sampling=gen_params,
        raw_outputs=tuple(raws),
        fallback=fallback,
    )


_BOUNDS_LIST = re.compile(r"boundaries\s*:\s*\[([^\]]*)\]", re.IGNORECASE)
_INT_LINE = re.compile(r"^\s*(\d+)\s*$")
_NO_SPLIT = re.compile(r"\bno\s+split\b", re.IGNORECASE)


def parse_segmenter_output(raw: str, doc: Document) -> Partition:
    """Recover a boundary list from generator output and repair it.

    Accepts "boundaries: [a, b, c]" or one bare index per line. Repairs by
    sorting, deduplicating, and dropping out-of-range indices; "no split"
    yields the single-chunk partition.
    """
    n = doc.sentence_count
    found: list[int] = []
    m = _BOUNDS_LIST.search(raw)
    if m:
        found = [int(v) for v in re.findall(r"-?\d+", m.group(1))]
    else:
        for line in raw.splitlines():
            lm = _INT_LINE.match(line)
            if lm:
                found.append(int(lm.group(1)))
    valid = sorted({b for b in found if 0 < b < n})
    if valid:
        return validate_partition(doc, valid)
    if _NO_SPLIT.search(raw):
        return validate_partition(doc, [])
    raise GenerationParseError(f"no valid boundaries in segmenter output: {raw[:200]!r}")


def select_best(
    candidates: CandidateSet,
    scorer: TokenScorer,
    embedder: Embedder,
    lam: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
    parallelism: int = 1,
) -> Selection:
    """Score every candidate and pick the argmax; ties go to the lowest index.

    A candidate whose scoring fails is excluded with a recorded reason; only
    an all-failed set is an error.
    """

    def score_one(part: Partition):
        try:
            return chunk_score(part, scorer, embedder, lam, alpha), None
        except Exception as exc:  # scoring must not sink the whole run
            return None, f"{type(exc).__name__}: {exc}"

    results = _pmap(score_one, candidates.candidates, parallelism)
    scores: list[ScoreBreakdown | None] = []
    failures: dict[int, str] = {}
    for i, (score, err) in enumerate(results):
        scores.append(score)
        if err is not None:
            failures[i] = err
            log.warning("candidate %d excluded from selection: %s", i, err)
    best = -1
    for i, score in enumerate(scores):
        if score is None:
            continue
        if best < 0 or score.phi_cs > scores[best].phi_cs:
            best = i
    if best < 0:
        raise BackendError(f"all {len(scores)} candidates failed scoring: {failures}")
    return Selection(selected_index=best, scores=tuple(scores), failures=failures)


def review_integrity(
    gen: Generator,
    chunk: Chunk,
    doc: Document,
    chunk_index: int = 0,
    params: SamplingParams | None = None,
    window_tokens: int = 4000,
) -> ReviewReport:
    """Diagnose a chunk for missing definitions, background, or broken
    context dependencies relative to the full document."""
    params = replace(params or SamplingParams(), n=1)
    window = _review_window(doc, chunk, window_tokens)
    prompt = prompts.review_prompt(
        doc, chunk.start_sentence, chunk.end_sentence, chunk.text, window
    )
    raw = gen.generate_n(prompt, params)[0]
    try:
        return parse_review(raw, chunk_index)
    except GenerationParseError:
        raw = gen.generate_n(prompt + prompts.STRICT_FORMAT_REMINDER, params)[0]
        return parse_review(raw, chunk_index)


def _review_window(doc: Document, chunk: Chunk, window_tokens: int) -> str:
    """Numbered document sentences, windowed around the chunk when the
    document exceeds the token budget."""
    counts = [len(s.content.split()) for s in doc.sentences]
    if sum(counts) <= window_tokens:
        return prompts.numbered_sentences(doc)
    lo, hi = chunk.start_sentence, chunk.end_sentence
    budget = sum(counts[lo:hi])
    while lo > 0 or hi < doc.sentence_count:
        grew = False
        if lo > 0 and budget + counts[lo - 1] <= window_tokens:
            lo -= 1
            budget += counts[lo]
            grew = True
        if hi < doc.sentence_count and budget + counts[hi] <= window_tokens:
            budget += counts[hi]
            hi += 1
            grew = True
        if not grew:
            break
    return prompts.numbered_sentences(doc, lo, hi)


_VERDICT_INCOMPLETE = re.compile(r"\bINCOMPLETE\b", re.IGNORECASE)
_VERDICT_COMPLETE = re.compile(r"\bCOMPLETE\b", re.IGNORECASE)
_MISSING_LINE = re.compile(r"^\s*[-*]?\s*missing\s*:\s*(.+)$", re.IGNORECASE)
_EVIDENCE_TAIL = re.compile(r"\|\s*evidence\s*:\s*(\d+)(?:\s*-\s*(\d+))?\s*$", re.IGNORECASE)


def parse_review(raw: str, chunk_index: int) -> ReviewReport:
    incomplete = _VERDICT_INCOMPLETE.search(raw) is not None
    complete = not incomplete and _VERDICT_COMPLETE.search(raw) is not None
    items: list[MissingItem] = []
    for line in raw.splitlines():
        m = _MISSING_LINE.match(line)
        if not m:
            continue
        body = m.group(1).strip()
        span = None
        tail = _EVIDENCE_TAIL.search(body)
        if tail:
            a = int(tail.group(1))
            b = int(tail.group(2)) if tail.group(2) else a + 1
            span = (a, b)
            body = body[: tail.start()].strip()
        if body:
            items.append(MissingItem(description=body, evidence_span=span))
    if not incomplete and not complete and not items:
        raise GenerationParseError(f"no verdict or items in review reply: {raw[:200]!r}")
    needs = (incomplete or (not complete and bool(items))) and bool(items)
    return ReviewReport(chunk_index=chunk_index, missing=tuple(items), needs_completion=needs)


def verify_missing_items(report: ReviewReport, doc: Document, chunk: Chunk) -> list[MissingItem]:
    """Keep only items whose content is explicitly stated outside the chunk.

    An item with an evidence span is retained when the span is in range,
    disjoint from the chunk, and covers the item description at ROUGE-L
    recall >= 0.5. An item without a span is grounded to the best-matching
    outside sentence when one clears the same threshold. Everything else is
    dropped, with the reason logged.
    """
    n = doc.sentence_count
    lo, hi = chunk.start_sentence, chunk.end_sentence
    retained: list[MissingItem] = []
    for item in report.missing:
        if not item.description.split():
            log.info("dropping item with empty description")
            continue
        if item.evidence_span is not None:
            a, b = item.evidence_span
            if not (0 <= a < b <= n):
                log.info("dropping %r: span out of range %s", item.description[:60], (a, b))
                continue
            if a < hi and b > lo:
                log.info("dropping %r: span overlaps the chunk", item.description[:60])
                continue
            span_text = " ".join(s.content for s in doc.sentences[a:b])
            if _containment_recall(item.description, span_text) < GROUNDING_RECALL_THRESHOLD:
                log.info("dropping %r: low recall against its span", item.description[:60])
                continue
            retained.append(replace(item, grounded=True))
        else:
            best_idx, best_recall = -1, -1.0
            for s in doc.sentences:
                if lo <= s.index < hi:
                    continue
                recall = _containment_recall(item.description, s.content)
                if recall > best_recall:
                    best_idx, best_recall = s.index, recall
            if best_idx >= 0 and best_recall >= GROUNDING_RECALL_THRESHOLD:
                retained.append(
                    replace(item, evidence_span=(best_idx, best_idx + 1), grounded=True)
                )
            else:
                log.info("dropping %r: ungrounded", item.description[:60])
    return retained


def _containment_recall(description: str, span_text: str) -> float:
    """Fraction of the description's tokens the span covers (LCS-based)."""
    if not span_text.split():
        return 0.0
    return rouge_l(candidate=span_text, reference=description).recall


def coverage_ratio(original_text: str, rewritten_text: str) -> float:
    """Fraction of original sentences present in the rewrite at ROUGE-L
    recall >= 0.8."""
    sentences = split_sentences(original_text)
    if not sentences:
        return 1.0
    if not rewritten_text.split():
        return 0.0
    covered = sum(
        1
        for s in sentences
        if rouge_l(candidate=rewritten_text, reference=s.content).recall
        >= COVERAGE_SENTENCE_RECALL
    )
    return covered / len(sentences)


def complete_chunk(
    gen: Generator,
    chunk: Chunk,
    verified: Sequence[MissingItem],
    params: SamplingParams | None = None,
) -> CompletedChunk:
    """Rewrite the chunk with the verified supplements integrated.

    The rewrite must preserve at least 90% of the original sentences; after
    one failed regeneration the deterministic fallback appends the evidence
    verbatim, which always passes the gate.
    """
    if not verified:
        raise ValueError("complete_chunk requires at least one verified item")
    params = replace(params or SamplingParams(), n=1)
    prompt = prompts.complete_prompt(
        chunk.text, [(item.evidence_span, item.description) for item in verified]
    )
    for attempt in range(2):
        raw = gen.generate_n(prompt, params)[0]
        ratio = coverage_ratio(chunk.text, raw)
        if ratio >= COVERAGE_RATIO_GATE:
            return CompletedChunk(
                original=chunk,
                supplements=tuple(verified),
                rewritten_text=raw,
                coverage_ratio=ratio,
                fallback_concat=False,
            )
        log.warning(
            "rewrite attempt %d failed the coverage gate (%.3f < %.3f)",
            attempt + 1,
            ratio,
            COVERAGE_RATIO_GATE,
        )
    fallback_text = chunk.text.rstrip() + " " + " ".join(i.description for i in verified)
    return CompletedChunk(
        original=chunk,
        supplements=tuple(verified),
        rewritten_text=fallback_text,
        coverage_ratio=coverage_ratio(chunk.text, fallback_text),
        fallback_concat=True,
    )


# -- the full run -------------------------------------------------------------


class _RecordingGenerator(Generator):
    """Retains every raw generation, keyed by prompt hash, for the audit trail.

    Keys are content-derived and the snapshot is sorted, so the record is
    deterministic even when review calls run concurrently.
    """

    def __init__(self, inner: Generator):
        self.inner = inner
        self._records: dict[str, dict] = {}
        self._lock = threading.Lock()

    def generate_n(self, prompt: str, params: SamplingParams) -> list[str]:
        outputs = self.inner.generate_n(prompt, params)
        key = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
        tag = prompt.split(maxsplit=1)[0]
        with self._lock:
            record = self._records.setdefault(key, {"tag": tag, "outputs": []})
            record["outputs"].extend(outputs)
        return outputs

    def snapshot(self) -> dict:
        with self._lock:
            return {k: self._records[k] for k in sorted(self._records)}


def run_pipeline(doc: Document, cfg: PipelineConfig) -> PipelineResult:
    """Outline, segment, select, review, and complete one document."""
    timings: dict[str, float] = {}
    generator = _RecordingGenerator(cfg.generator)
    partial: dict = {"doc_id": doc.id}
    stage = "outline"
    try:
        with _timed(timings, "outline"):
            outline = generate_outline(generator, doc, cfg.sampling)
        partial["outline"] = list(outline.questions)

        stage = "segment"
        with _timed(timings, "segment"):
            candidates = sample_candidates(
                generator, doc, outline, cfg.candidates_p, cfg.sampling
            )
        partial["candidates"] = [list(c.boundaries) for c in candidates.candidates]

        stage = "select"
        with _timed(timings, "select"):
            selection = select_best(
                candidates, cfg.scorer, cfg.embedder, cfg.lam, cfg.alpha, cfg.parallelism
            )
        partition = candidates.candidates[selection.selected_index]
        partial["selected_index"] = selection.selected_index

        stage = "review"
        with _timed(timings, "review"):
            reviews = _pmap(
                lambda ic: review_integrity(
                    generator,
                    ic[1],
                    doc,
                    chunk_index=ic[0],
                    params=cfg.sampling,
                    window_tokens=cfg.review_window_tokens,
                ),
                list(enumerate(partition.chunks)),
                cfg.parallelism,
            )
        partial["reviews"] = [r.to_dict() for r in reviews]

        stage = "complete"
        with _timed(timings, "complete"):
            completed: list[Chunk | CompletedChunk] = []
            for chunk, review in zip(partition.chunks, reviews):
                if review.needs_completion:
                    verified = verify_missing_items(review, doc, chunk)
                    if verified:
                        completed.append(
                            complete_chunk(generator, chunk, verified, cfg.sampling)
                        )
                        continue
                completed.append(chunk)
    except ChunklabError as exc:
        raise PipelineError(stage, str(exc), partial) from exc

    run_meta = {
        "seed": cfg.seed,
        "backend": cfg.backend_kind,
        "template_hash": prompts.template_hash(),
        "lambda": cfg.lam,
        "alpha": cfg.alpha,
        "candidates_p": cfg.candidates_p,
        "candidate_fallback": candidates.fallback,
        "score_failures": {str(k): v for k, v in sorted(selection.failures.items())},
        "timings": timings,
    }
    if cfg.rescore_completed:
        texts = [
            e.rewritten_text if isinstance(e, CompletedChunk) else e.text for e in completed
        ]
        run_meta["diagnostic_rescore"] = score_chunk_texts(
            texts, cfg.scorer, cfg.embedder, cfg.lam, cfg.alpha
        ).to_dict()

    return PipelineResult(
        doc_id=doc.id,
        outline=outline,
        candidates=candidates,
        scores=selection.scores,
        selected_index=selection.selected_index,
        reviews=tuple(reviews),
        completed=tuple(completed),
        run_meta=run_meta,
        audit={"generations": generator.snapshot()},
    )


class _timed:
    def __init__(self, sink: dict, key: str):
        self.sink = sink
        self.key = key

    def __enter__(self):
        self.t0 = time.monotonic()

    def __exit__(self, *exc):
        self.sink[self.key] = time.monotonic() - self.t0
        return False


def _pmap(fn: Callable, items: Sequence, parallelism: int) -> list:
    """Order-preserving map, threaded when parallelism > 1."""
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))
