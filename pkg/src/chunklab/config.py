"""Run configuration: one JSON file, overridden by flags, with env vars used
only for backend credentials."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .chunkers import ChunkerConfig
from .clients import HttpBackend, HttpConfig, SamplingParams, StubBackend
from .errors import ConfigError
from .metrics import DEFAULT_ALPHA, DEFAULT_LAMBDA

BACKENDS = ("stub", "http")


@dataclass(frozen=True)
class AppConfig:
    backend: str = "stub"
    seed: int = 0
    lam: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_ALPHA
    candidates_p: int = 5
    sampling: SamplingParams = field(default_factory=SamplingParams)
    chunker: ChunkerConfig = field(default_factory=ChunkerConfig)
    parallelism: int = 4
    embed_dim: int = 64
    review_window_tokens: int = 4000
    http: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if not 0 <= self.lam <= 1:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.candidates_p < 1:
            raise ConfigError(f"candidates_p must be >= 1, got {self.candidates_p}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")

    @classmethod
    def from_dict(cls, obj: dict) -> "AppConfig":
        known = {
            "backend",
            "seed",
            "lambda",
            "alpha",
            "candidates_p",
            "sampling",
            "chunker",
            "parallelism",
            "embed_dim",
            "review_window_tokens",
            "http",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {}
        for key in ("backend", "seed", "alpha", "candidates_p", "parallelism",
                    "embed_dim", "review_window_tokens", "http"):
            if key in obj:
                kwargs[key] = obj[key]
        if "lambda" in obj:
            kwargs["lam"] = obj["lambda"]
        if "sampling" in obj:
            try:
                kwargs["sampling"] = SamplingParams(**obj["sampling"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad sampling config: {exc}") from exc
        if "chunker" in obj:
            try:
                kwargs["chunker"] = ChunkerConfig(**obj["chunker"])
            except TypeError as exc:
                raise ConfigError(f"bad chunker config: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path | None, **overrides) -> "AppConfig":
        """Config file values first, then explicit flag overrides."""
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            try:
                obj = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ConfigError(f"config file {path} must hold a JSON object")
            cfg = cls.from_dict(obj)
        else:
            cfg = cls()
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if overrides:
            cfg = replace(cfg, **overrides)
        # A fixed run seed flows into sampling unless sampling pinned its own.
        if cfg.sampling.seed is None:
            cfg = replace(cfg, sampling=replace(cfg.sampling, seed=cfg.seed))
        return cfg


def build_backend(config: AppConfig):
    """One backend object serving scoring, embedding, and generation."""
    if config.backend == "stub":
        return StubBackend(seed=config.seed, embed_dim=config.embed_dim)
    http_kwargs = dict(config.http)
    return HttpBackend(HttpConfig.from_env(**http_kwargs))
