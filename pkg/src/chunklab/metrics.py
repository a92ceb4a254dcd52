"""Chunk-quality scoring: logical independence, semantic dispersion, and
their weighted combination, plus ROUGE-L and Pearson correlation for the
weight-calibration harness.

Logical independence of a boundary is the ratio of the conditional perplexity
of a chunk given its predecessor to its unconditional perplexity, clamped to
[0, 1]: near 1 means the predecessor barely helps predict the chunk, so the
boundary is semantically clean. Semantic dispersion is the normalized
log-determinant of the regularized, feature-centered Gram matrix of the chunk
embeddings: it rewards chunk sets whose embeddings span a large volume, i.e.
cover the document with low redundancy.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clients.base import Embedder, TokenScorer
from .corpus import Partition
from .errors import DegenerateInputError
from .tokenization import mixed_tokens

DEFAULT_LAMBDA = 0.3
DEFAULT_ALPHA = 1e-3


@dataclass(frozen=True)
class ScoreBreakdown:
    """Full audit trail of one composite score.

    `per_boundary_li` holds the clamped per-boundary independence values (one
    per internal boundary); `per_boundary_li_raw` the unclamped ratios kept
    for diagnostics. `eigenvalues` are those of the regularized Gram matrix,
    ascending. Serialized field name for `lam` is "lambda".
    """

    phi_li: float
    phi_sd: float
    phi_cs: float
    lam: float
    alpha: float
    per_boundary_li: tuple[float, ...]
    per_boundary_li_raw: tuple[float, ...]
    eigenvalues: tuple[float, ...]
    k: int

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if len(self.per_boundary_li) != self.k - 1:
            raise ValueError("per_boundary_li must have k-1 entries")
        if len(self.eigenvalues) != self.k:
            raise ValueError("eigenvalues must have k entries")
        recombined = self.lam * self.phi_li + (1 - self.lam) * self.phi_sd
        if abs(recombined - self.phi_cs) > 1e-12:
            raise ValueError("phi_cs does not recombine from phi_li and phi_sd")
        eigen_mean = sum(math.log(v) for v in self.eigenvalues) / self.k
        if abs(eigen_mean - self.phi_sd) > 1e-8:
            raise ValueError("phi_sd disagrees with the eigenvalue form")
        if any(v < self.alpha * (1 - 1e-9) for v in self.eigenvalues):
            raise ValueError("eigenvalue below the regularization floor")

    def to_dict(self) -> dict:
        return {
            "phi_li": self.phi_li,
            "phi_sd": self.phi_sd,
            "phi_cs": self.phi_cs,
            "lambda": self.lam,
            "alpha": self.alpha,
            "per_boundary_li": list(self.per_boundary_li),
            "per_boundary_li_raw": list(self.per_boundary_li_raw),
            "eigenvalues": list(self.eigenvalues),
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ScoreBreakdown":
        return cls(
            phi_li=float(obj["phi_li"]),
            phi_sd=float(obj["phi_sd"]),
            phi_cs=float(obj["phi_cs"]),
            lam=float(obj["lambda"]),
            alpha=float(obj["alpha"]),
            per_boundary_li=tuple(float(v) for v in obj["per_boundary_li"]),
            per_boundary_li_raw=tuple(float(v) for v in obj["per_boundary_li_raw"]),
            eigenvalues=tuple(float(v) for v in obj["eigenvalues"]),
            k=int(obj["k"]),
        )


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Chunk embeddings stacked column-wise: d rows, one column per chunk."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("embedding matrix contains non-finite values")
        norms = np.linalg.norm(self.data, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("embedding columns must be unit-norm")

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]


# -- perplexity and logical independence -----------------------------------


def perplexity(scorer: TokenScorer, target: str) -> float:
    """exp of the mean negative log-probability per token, no context."""
    logprobs = scorer.score_tokens("", target)
    value = math.exp(-sum(logprobs) / len(logprobs))
    if not math.isfinite(value):
        raise ValueError(f"perplexity is not finite for target {target[:50]!r}")
    return value


def conditional_perplexity(scorer: TokenScorer, context: str, target: str) -> float:
    if not context:
        raise ValueError("context must be non-empty; use perplexity() for unconditional scoring")
    if not target:
        raise ValueError("target must be non-empty")
    logprobs = scorer.score_tokens(context, target)
    return math.exp(-sum(logprobs) / len(logprobs))


def li_ratio(scorer: TokenScorer, prev_text: str, cur_text: str) -> float:
    """Unclamped conditional-to-unconditional perplexity ratio."""
    unconditional = perplexity(scorer, cur_text)
    if not math.isfinite(unconditional) or unconditional <= 0:
        raise ValueError("unconditional perplexity is not finite and positive")
    return conditional_perplexity(scorer, prev_text, cur_text) / unconditional


def logical_independence(scorer: TokenScorer, prev, cur) -> float:
    """Boundary cleanliness in [0, 1]; ratios above 1 clamp to 1."""
    prev_text = prev.text if hasattr(prev, "text") else prev
    cur_text = cur.text if hasattr(cur, "text") else cur
    return min(1.0, li_ratio(scorer, prev_text, cur_text))


def phi_li(scorer: TokenScorer, partition: Partition) -> float:
    """Mean boundary independence; 1.0 for a single chunk (no boundaries)."""
    texts = partition.chunk_texts()
    if len(texts) == 1:
        return 1.0
    values = [
        min(1.0, li_ratio(scorer, texts[i - 1], texts[i])) for i in range(1, len(texts))
    ]
    return sum(values) / len(values)


# -- semantic dispersion -----------------------------------------------------


def centered_gram(Z: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    """Gram matrix of the feature-centered embeddings.

    Each column has its own component mean removed (projection through
    I - (1/d) 1 1^T), then the K x K matrix of inner products is formed and
    symmetrized. Positive semidefinite by construction.
    """
    data = Z.data if isinstance(Z, EmbeddingMatrix) else np.asarray(Z, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least 2 feature rows")
    if not np.all(np.isfinite(data)):
        raise ValueError("embedding matrix contains non-finite values")
    projected = data - data.mean(axis=0, keepdims=True)
    gram = projected.T @ projected
    return (gram + gram.T) / 2.0


def gram_eigenvalues(Z: EmbeddingMatrix | np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Ascending eigenvalues of the regularized centered Gram matrix."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    gram = centered_gram(Z)
    k = gram.shape[0]
    return np.linalg.eigvalsh(gram + alpha * np.eye(k))


def phi_sd(Z: EmbeddingMatrix | np.ndarray, alpha: float = DEFAULT_ALPHA) -> float:
    """Normalized log-determinant of the regularized Gram matrix.

    Computed as the mean log eigenvalue from a symmetric eigendecomposition,
    which is stable for the near-singular matrices redundant chunk sets
    produce.
    """
    eigenvalues = gram_eigenvalues(Z, alpha)
    if np.any(eigenvalues <= 0):
        raise ValueError("regularized Gram matrix is not positive definite")
    return float(np.log(eigenvalues).sum() / len(eigenvalues))


# -- the composite score -----------------------------------------------------


def score_chunk_texts(
    texts: Sequence[str],
    scorer: TokenScorer,
    embedder: Embedder,
    lam: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
) -> ScoreBreakdown:
    """Composite score of an ordered chunk-text sequence."""
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    if not texts:
        raise ValueError("need at least one chunk text")
    raw = [li_ratio(scorer, texts[i - 1], texts[i]) for i in range(1, len(texts))]
    clamped = [min(1.0, r) for r in raw]
    li = sum(clamped) / len(clamped) if clamped else 1.0

    eigenvalues = gram_eigenvalues(embedder.embed_batch(list(texts)), alpha)
    sd = float(np.log(eigenvalues).sum() / len(eigenvalues))

    return ScoreBreakdown(
        phi_li=li,
        phi_sd=sd,
        phi_cs=lam * li + (1 - lam) * sd,
        lam=lam,
        alpha=alpha,
        per_boundary_li=tuple(clamped),
        per_boundary_li_raw=tuple(raw),
        eigenvalues=tuple(float(v) for v in eigenvalues),
        k=len(texts),
    )


def chunk_score(
    partition: Partition,
    scorer: TokenScorer,
    embedder: Embedder,
    lam: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
) -> ScoreBreakdown:
    return score_chunk_texts(partition.chunk_texts(), scorer, embedder, lam, alpha)


# -- ROUGE-L -----------------------------------------------------------------


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length, O(len(a) * len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS-based precision/recall/F1 over whitespace tokens (CJK per char)."""
    cand = mixed_tokens(candidate)
    ref = mixed_tokens(reference)
    if not cand or not ref:
        raise ValueError("both texts must be non-empty after tokenization")
    lcs = lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RougeScore(precision=precision, recall=recall, f1=f1)


# -- correlation and the lambda sweep ----------------------------------------


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need at least 2 points")
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError as exc:
        raise DegenerateInputError(f"degenerate input: {exc}") from exc


@dataclass(frozen=True)
class SweepGrid:
    start: float = 0.0
    end: float = 1.0
    step: float = 0.01

    def __post_init__(self):
        if not 0 <= self.start <= self.end <= 1:
            raise ValueError("grid must satisfy 0 <= start <= end <= 1")
        if self.step <= 0:
            raise ValueError("step must be positive")

    def points(self) -> list[float]:
        n = int(round((self.end - self.start) / self.step))
        values = [self.start + i * self.step for i in range(n + 1)]
        values[-1] = self.end
        return values


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    r: float | None  # None marks an undefined (degenerate) correlation


def lambda_sweep(
    component_pairs: Sequence[tuple[float, float]],
    downstream: Sequence[float],
    grid: SweepGrid = SweepGrid(),
) -> list[SweepPoint]:
    """Correlation of the recombined score with downstream quality, per weight.

    `component_pairs` holds one (phi_li, phi_sd) pair per chunking scheme and
    `downstream` the matching downstream quality figure. Degenerate rows are
    marked undefined instead of failing the sweep.
    """
    if len(component_pairs) != len(downstream):
        raise ValueError(
            f"length mismatch: {len(component_pairs)} schemes vs {len(downstream)} downstream values"
        )
    if len(component_pairs) < 3:
        raise ValueError("need at least 3 schemes to correlate")
    out: list[SweepPoint] = []
    for lam in grid.points():
        combined = [lam * li + (1 - lam) * sd for li, sd in component_pairs]
        try:
            r = pearson(combined, downstream)
        except DegenerateInputError:
            r = None
        out.append(SweepPoint(lam=lam, r=r))
    return out


def sweep_argmax(points: Sequence[SweepPoint]) -> int:
    """Index of the best defined correlation; ties go to the lowest weight."""
    best = -1
    for i, p in enumerate(points):
        if p.r is None:
            continue
        if best < 0 or p.r > points[best].r:
            best = i
    if best < 0:
        raise DegenerateInputError("every grid point has an undefined correlation")
    return best
