"""OpenAI-compatible HTTP backend for scoring, embedding, and generation.

The wire protocol is JSON over three endpoints:

    POST {base}/v1/chat/completions   generation
    POST {base}/v1/embeddings         embedding
    POST {base}/v1/completions        scoring, with logprobs + echo

Credentials come from the environment (MODEL_API_KEY bearer token,
MODEL_API_BASE base URL). Transient failures (connection errors, 429, 5xx)
are retried with exponential backoff and full jitter. The transport is an
injectable callable so tests replay recorded request/response fixtures with
no network.
"""

from __future__ import annotations

import logging
import os
import random
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import requests

from ..errors import BackendError, ConfigError
from .base import Embedder, Generator, SamplingParams, TokenScorer, truncate_context

log = logging.getLogger(__name__)

# (method, url, headers, payload, timeout) -> (status_code, parsed_json)
Transport = Callable[[str, str, dict, dict, float], tuple[int, dict]]

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass
class HttpConfig:
    base_url: str
    api_key: str | None = None
    generation_model: str = "default"
    embedding_model: str = "default"
    scoring_model: str = "default"
    max_context_tokens: int = 8192
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    supports_echo_scoring: bool = True

    @classmethod
    def from_env(cls, **overrides) -> "HttpConfig":
        base = overrides.pop("base_url", None) or os.environ.get("MODEL_API_BASE")
        if not base:
            raise ConfigError("http backend requires MODEL_API_BASE (or an explicit base_url)")
        key = overrides.pop("api_key", None) or os.environ.get("MODEL_API_KEY")
        return cls(base_url=base, api_key=key, **overrides)


def requests_transport(method: str, url: str, headers: dict, payload: dict, timeout: float):
    resp = requests.request(method, url, headers=headers, json=payload, timeout=timeout)
    try:
        body = resp.json()
    except ValueError as exc:
        raise BackendError(f"non-JSON response from {url}: {resp.text[:200]!r}") from exc
    return resp.status_code, body


class HttpBackend(TokenScorer, Embedder, Generator):
    def __init__(
        self,
        config: HttpConfig,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        if not config.supports_echo_scoring:
            raise ConfigError(
                "backend does not support echo scoring; conditional perplexity "
                "needs per-token logprobs over an echoed prompt"
            )
        self.config = config
        self.max_context_tokens = config.max_context_tokens
        self.last_truncated = False
        self._transport = transport or requests_transport
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._dimension: int | None = None

    # -- plumbing ----------------------------------------------------------

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        return headers

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + endpoint
        attempts = self.config.max_retries + 1
        last_err: str = ""
        for attempt in range(attempts):
            if attempt > 0:
                delay = self.config.backoff_base * (2 ** (attempt - 1)) * self._rng.random()
                self._sleep(delay)
            try:
                status, body = self._transport(
                    "POST", url, self._headers(), payload, self.config.timeout
                )
            except BackendError:
                raise
            except Exception as exc:  # connection reset, timeout, DNS, ...
                last_err = f"transport error: {exc}"
                log.warning("%s %s (attempt %d/%d)", url, last_err, attempt + 1, attempts)
                continue
            if status == 200:
                return body
            last_err = f"HTTP {status}: {_error_text(body)}"
            if status not in _RETRYABLE_STATUS:
                raise BackendError(f"{url}: {last_err}")
            log.warning("%s %s (attempt %d/%d)", url, last_err, attempt + 1, attempts)
        raise BackendError(f"{url}: giving up after {attempts} attempts ({last_err})")

    # -- TokenScorer -------------------------------------------------------

    def score_tokens(self, context: str, target: str) -> list[float]:
        if not target.split():
            raise ValueError("target tokenizes to zero tokens")
        context, truncated = truncate_context(context, target, self.max_context_tokens)
        self.last_truncated = truncated
        body = self._post(
            "/v1/completions",
            {
                "model": self.config.scoring_model,
                "prompt": context + target,
                "max_tokens": 0,
                "echo": True,
                "logprobs": 0,
            },
        )
        try:
            lp = body["choices"][0]["logprobs"]
            offsets = lp["text_offset"]
            values = lp["token_logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed scoring response: {exc}") from exc
        out: list[float] = []
        boundary = len(context)
        for pos, (off, val) in enumerate(zip(offsets, values)):
            if off < boundary:
                continue
            if val is None:
                if pos == 0:
                    # The very first prompt token has no conditioning and the
                    # protocol reports no logprob for it; skip it.
                    continue
                raise BackendError(f"null logprob for echoed token at offset {off}")
            val = float(val)
            if not np.isfinite(val) or val > 0:
                raise BackendError(f"invalid logprob {val} at offset {off}")
            out.append(val)
        if not out:
            raise BackendError("scoring response contains no target-region logprobs")
        return out

    # -- Embedder ----------------------------------------------------------

    @property
    def dimension(self) -> int:
        if self._dimension is None:
            raise BackendError("embedding dimension unknown before the first embed_batch call")
        return self._dimension

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            raise ValueError("embed_batch requires at least one text")
        body = self._post(
            "/v1/embeddings",
            {"model": self.config.embedding_model, "input": list(texts)},
        )
        try:
            rows = sorted(body["data"], key=lambda item: item["index"])
            vectors = [item["embedding"] for item in rows]
        except (KeyError, TypeError) as exc:
            raise BackendError(f"malformed embeddings response: {exc}") from exc
        if len(vectors) != len(texts):
            raise BackendError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise BackendError(f"dimension mismatch across batch: {sorted(dims)}")
        d = dims.pop()
        if self._dimension is None:
            self._dimension = d
        elif self._dimension != d:
            raise BackendError(f"embedding dimension changed: {self._dimension} -> {d}")
        mat = np.asarray(vectors, dtype=np.float64).T
        if not np.all(np.isfinite(mat)):
            raise BackendError("embeddings contain non-finite values")
        norms = np.linalg.norm(mat, axis=0)
        if np.any(norms < 1e-12):
            raise BackendError("embeddings contain a zero vector")
        return mat / norms

    # -- Generator ---------------------------------------------------------

    def generate_n(self, prompt: str, params: SamplingParams) -> list[str]:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        payload = {
            "model": self.config.generation_model,
            "messages": [{"role": "user", "content": prompt}],
            "n": params.n,
            "temperature": params.temperature,
            "top_p": params.top_p,
        }
        if params.seed is not None:
            payload["seed"] = params.seed
        for attempt in range(2):
            body = self._post("/v1/chat/completions", payload)
            try:
                contents = [c["message"]["content"] for c in body["choices"]]
            except (KeyError, TypeError) as exc:
                raise BackendError(f"malformed chat response: {exc}") from exc
            if len(contents) != params.n:
                raise BackendError(f"asked for {params.n} completions, got {len(contents)}")
            if all(c for c in contents):
                return contents
            # Empty completion: retry the whole request once, then surface.
            if attempt == 1:
                raise BackendError("backend returned an empty completion twice")
        raise AssertionError("unreachable")


def _error_text(body) -> str:
    if isinstance(body, dict):
        err = body.get("error")
        if isinstance(err, dict) and "message" in err:
            return str(err["message"])
        if err:
            return str(err)
    return str(body)[:200]
