"""chunklab: question-aware text chunking with a direct chunk-quality metric.

The library splits documents into sentence-granular partitions, scores any
partitioning directly (boundary logical independence plus embedding-set
semantic dispersion), and runs a four-agent pipeline that proposes candidate
segmentations, selects the best by score, reviews each chunk for missing
knowledge, and rewrites flagged chunks with grounded supplements.
"""

from .chunkers import ChunkerConfig, fixed_length, semantic_similarity, sentence_window
from .clients import HttpBackend, HttpConfig, SamplingParams, StubBackend
from .config import AppConfig, build_backend
from .corpus import (
    Chunk,
    Document,
    Partition,
    Sentence,
    load_jsonl,
    split_sentences,
    validate_partition,
)
from .errors import (
    BackendError,
    ChunklabError,
    ConfigError,
    CorpusError,
    DegenerateInputError,
    GenerationParseError,
    PartitionError,
    PipelineError,
)
from .metrics import (
    EmbeddingMatrix,
    RougeScore,
    ScoreBreakdown,
    SweepGrid,
    SweepPoint,
    centered_gram,
    chunk_score,
    conditional_perplexity,
    lambda_sweep,
    logical_independence,
    pearson,
    perplexity,
    phi_li,
    phi_sd,
    rouge_l,
    score_chunk_texts,
)
from .pipeline import (
    CandidateSet,
    CompletedChunk,
    MissingItem,
    PipelineConfig,
    PipelineResult,
    QuestionOutline,
    ReviewReport,
    complete_chunk,
    generate_outline,
    parse_segmenter_output,
    review_integrity,
    run_pipeline,
    sample_candidates,
    select_best,
    verify_missing_items,
)

__version__ = "0.1.0"
