"""Deterministic text embeddings for semantic retrieval.

The default embedder is a local feature-hashing scheme so that retrieval
works offline and reproducibly: lowercase the text, split it into maximal
runs of Unicode alphanumerics, form all 1-grams and 2-grams, hash each
n-gram with 64-bit FNV-1a, and accumulate +1/-1 (the hash's top bit) into
bucket ``hash % dim``. The result is L2-normalized, so cosine similarity
reduces to a dot product.

A remote embedding endpoint can be substituted behind the same ``embed``
surface; its vectors are validated and normalized to keep the store's
unit-norm invariant.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, EmptyText, RemoteUnavailable

DEFAULT_DIM = 256
MIN_DIM = 8

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

EMBED_TOKEN_ENV = "NEURON_EMBED_TOKEN"

# Maximal runs of Unicode alphanumerics (\w minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

EMBEDDER_KINDS = ("deterministic-hash", "remote")


@dataclass(frozen=True)
class EmbedderConfig:
    """Which embedder to use and the vector space it produces.

    ``dim`` is fixed per store; mixing dimensions is an error downstream.
    The remote kind additionally needs a non-empty ``endpoint``.
    """

    kind: str = "deterministic-hash"
    dim: int = DEFAULT_DIM
    ngram_range: tuple[int, int] = (1, 2)
    endpoint: str = ""
    model: str = ""

    def __post_init__(self) -> None:
        if self.kind not in EMBEDDER_KINDS:
            raise ConfigError(f"unknown embedder kind {self.kind!r}")
        if self.dim < MIN_DIM:
            raise ConfigError(f"embedder dim must be >= {MIN_DIM}, got {self.dim}")
        lo, hi = self.ngram_range
        if lo < 1 or hi < lo:
            raise ConfigError(f"invalid ngram range {self.ngram_range!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("remote embedder requires a non-empty endpoint")

    def fingerprint(self) -> str:
        """Stable hex digest identifying the vector space of this config."""
        payload = json.dumps(
            {
                "kind": self.kind,
                "dim": self.dim,
                "ngram_range": list(self.ngram_range),
                "model": self.model if self.kind == "remote" else "",
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercased maximal alphanumeric runs, in order of appearance."""
    return _TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], lo: int, hi: int) -> list[str]:
    grams: list[str] = []
    for n in range(lo, hi + 1):
        grams.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return grams


def hash_embed(text: str, dim: int = DEFAULT_DIM, ngram_range: tuple[int, int] = (1, 2)) -> np.ndarray:
    """Feature-hash ``text`` into a unit-norm float64 vector of length ``dim``.

    Raises EmptyText when no tokens survive normalization; a zero vector has
    no cosine direction and must never enter the store.
    """
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText("text has no alphanumeric tokens")
    buckets = np.zeros(dim, dtype=np.float64)
    for gram in _ngrams(tokens, *ngram_range):
        h = fnv1a_64(gram.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        buckets[h % dim] += sign
    norm = float(np.linalg.norm(buckets))
    if norm == 0.0:
        # All signs cancelled in every bucket; treat like empty input.
        raise EmptyText("text hashed to the zero vector")
    return buckets / norm


def as_unit_vector(values: Sequence[float], dim: int) -> np.ndarray:
    """Validate and normalize externally supplied vector components."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != dim:
        raise DimensionMismatch(f"expected {dim} components, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise DimensionMismatch("vector contains non-finite components")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DimensionMismatch("zero vector has no direction")
    return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1], clamped against float rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DimensionMismatch("vectors must be finite")
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0:
        raise DimensionMismatch("zero vector has no direction")
    val = float(np.dot(a, b)) / denom
    return max(-1.0, min(1.0, val))


def format_component(x: float) -> str:
    """Canonical wire form of one vector component: 9 significant digits."""
    return format(x, ".9g")


def quantize(vec: np.ndarray) -> np.ndarray:
    """Round components to the canonical 9-significant-digit grid.

    Stored vectors go through this once at insert time so that in-memory
    state, event log, and snapshots all hold bit-identical values.
    """
    return np.array([float(format_component(float(x))) for x in vec], dtype=np.float64)


def canonical_values(vec: np.ndarray) -> list[str]:
    """Canonical serialization of a vector, component by component."""
    return [format_component(float(x)) for x in vec]


class Embedder:
    """Config-driven embedding frontend, shareable across threads.

    The deterministic-hash kind is a pure function. The remote kind posts
    ``{"model": ..., "input": [text]}`` to the configured endpoint and reads
    ``data[0].embedding`` back, retrying transient failures on the same
    backoff schedule as the chat client (0.5 s, 1 s, 2 s).
    """

    def __init__(
        self,
        config: EmbedderConfig,
        *,
        http_post: Callable[..., "object"] | None = None,
        sleep: Callable[[float], None] = time.sleep,
        max_attempts: int = 4,
        backoff_base: float = 0.5,
    ) -> None:
        self.config = config
        self._sleep = sleep
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base
        self._http_post = http_post
        self._lock = threading.Lock()
        self._client = None

    def embed(self, text: str) -> np.ndarray:
        if self.config.kind == "deterministic-hash":
            return hash_embed(text, self.config.dim, self.config.ngram_range)
        return self._embed_remote(text)

    # Remote path -------------------------------------------------------

    def _post(self, payload: dict) -> object:
        if self._http_post is not None:
            return self._http_post(self.config.endpoint, payload)
        import httpx

        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=30.0)
        headers = {}
        token = os.environ.get(EMBED_TOKEN_ENV, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return self._client.post(self.config.endpoint, json=payload, headers=headers)

    def _embed_remote(self, text: str) -> np.ndarray:
        if not tokenize(text):
            raise EmptyText("text has no alphanumeric tokens")
        payload = {"model": self.config.model, "input": [text]}
        last_error: Exception | None = None
        for attempt in range(self._max_attempts):
            if attempt > 0:
                self._sleep(self._backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self._post(payload)
            except Exception as exc:  # connection failures are retryable
                last_error = exc
                continue
            status = getattr(resp, "status_code", 0)
            if status == 429 or 500 <= status < 600:
                last_error = RemoteUnavailable(f"endpoint returned {status}")
                continue
            if status != 200:
                raise RemoteUnavailable(f"endpoint returned {status}")
            try:
                body = resp.json()
                values = body["data"][0]["embedding"]
            except Exception as exc:
                raise RemoteUnavailable(f"malformed embedding response: {exc}") from exc
            if len(values) != self.config.dim:
                raise DimensionMismatch(
                    f"remote returned {len(values)} components, expected {self.config.dim}"
                )
            return as_unit_vector(values, self.config.dim)
        raise RemoteUnavailable(f"embedding endpoint failed after {self._max_attempts} attempts: {last_error}")


def embed(text: str, config: EmbedderConfig) -> np.ndarray:
    """One-shot embedding with a fresh default Embedder."""
    return Embedder(config).embed(text)
