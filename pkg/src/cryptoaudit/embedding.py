"""Embedding providers and the cosine nearest-neighbour index.

Distance convention: s = 1 - cosine, so converting back with
cos_sim = 1 - s recovers the cosine exactly. The only search backend is an
exhaustive scan; corpus scale here is thousands of chunks, not millions.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus
from .errors import (
    CorpusFormatError,
    DimensionMismatchError,
    EmbeddingProviderError,
)

_INDEX_FORMAT = "cryptoaudit.vector-index/1"


class EmbeddingProvider:
    """Maps text batches to equal-length lists of vectors."""

    tag: str = ""
    dimension: int = 0

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError


class MockEmbeddingProvider(EmbeddingProvider):
    """Deterministic offline provider.

    Each text is expanded into a pseudo-random unit vector by stretching
    SHA-256 digests of (seed, counter, text) into float components. No text
    canonicalization happens: whitespace differences may change the vector.
    """

    def __init__(self, dimension: int = 64, seed: str = "kb-mock-v1"):
        self.dimension = dimension
        self.seed = seed
        self.tag = f"mock/{seed}/{dimension}d"

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._vector(t) for t in texts])

    def _vector(self, text: str) -> np.ndarray:
        components: list[float] = []
        counter = 0
        encoded = text.encode("utf-8")
        while len(components) < self.dimension:
            digest = hashlib.sha256(
                f"{self.seed}\x00{counter}\x00".encode("utf-8") + encoded
            ).digest()
            for i in range(0, 32, 8):
                word = int.from_bytes(digest[i : i + 8], "big")
                components.append(word / 2**63 - 1.0)  # uniform in [-1, 1)
            counter += 1
        v = np.asarray(components[: self.dimension], dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:  # pragma: no cover - 2^-4096 events need no branch coverage
            v[0] = 1.0
            norm = 1.0
        return v / norm


class HttpEmbeddingProvider(EmbeddingProvider):
    """Batch embeddings over HTTP using the common JSON wire shape.

    POST {"model": ..., "input": [texts]} and read back
    {"data": [{"embedding": [...]}, ...]}. The API key is read from an
    environment variable, never from config files.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int,
        api_key_env: str = "CRYPTOAUDIT_API_KEY",
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.tag = f"http/{model}/{dimension}d"

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            response = requests.post(
                self.endpoint,
                json={"model": self.model, "input": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            payload = response.json()
        except Exception as exc:
            raise EmbeddingProviderError(str(exc), provider_tag=self.tag) from exc
        try:
            vectors = [item["embedding"] for item in payload["data"]]
        except (KeyError, TypeError) as exc:
            raise EmbeddingProviderError(
                f"unexpected response shape: {exc}", provider_tag=self.tag
            ) from exc
        if len(vectors) != len(texts):
            raise EmbeddingProviderError(
                f"asked for {len(texts)} embeddings, got {len(vectors)}",
                provider_tag=self.tag,
            )
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.dimension:
            raise EmbeddingProviderError(
                f"expected dimension {self.dimension}, got shape {matrix.shape}",
                provider_tag=self.tag,
            )
        return matrix


def embed(text: str, provider: EmbeddingProvider) -> np.ndarray:
    """Embed one text into a unit-norm vector."""
    if not text:
        raise EmbeddingProviderError("cannot embed empty text", provider_tag=provider.tag)
    try:
        matrix = provider.embed_batch([text])
    except EmbeddingProviderError:
        raise
    except Exception as exc:
        raise EmbeddingProviderError(str(exc), provider_tag=provider.tag) from exc
    v = np.asarray(matrix[0], dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise EmbeddingProviderError("provider returned a zero vector", provider_tag=provider.tag)
    return v / norm


@dataclass(frozen=True)
class ScoredHit:
    chunk_id: str
    s: float  # cosine distance in [0, 2]

    @property
    def cos_sim(self) -> float:
        return 1.0 - self.s


@dataclass(frozen=True)
class VectorIndex:
    ids: tuple[str, ...]
    vectors: np.ndarray  # (n, dimension) float64, unit rows
    provider_tag: str
    dimension: int

    def __len__(self) -> int:
        return len(self.ids)


def build_index(
    corpus: Corpus | Iterable,
    provider: EmbeddingProvider,
    batch_size: int = 64,
) -> VectorIndex:
    """Embed every chunk's retrieval key into an index."""
    chunks = list(corpus)
    ids = [c.id for c in chunks]
    if len(set(ids)) != len(ids):
        raise CorpusFormatError("corpus contains duplicate chunk ids")
    keys = [c.retrieval_key for c in chunks]
    rows: list[np.ndarray] = []
    for start in range(0, len(keys), batch_size):
        batch = keys[start : start + batch_size]
        matrix = np.asarray(provider.embed_batch(batch), dtype=np.float64)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise EmbeddingProviderError("provider returned a zero vector", provider.tag)
        rows.append(matrix / norms)
    vectors = np.vstack(rows) if rows else np.zeros((0, provider.dimension))
    return VectorIndex(
        ids=tuple(ids),
        vectors=vectors,
        provider_tag=provider.tag,
        dimension=provider.dimension,
    )


def similarity_search(index: VectorIndex, query: np.ndarray, k: int) -> list[ScoredHit]:
    """k nearest entries under cosine distance, ties kept in insertion order."""
    if k < 1:
        raise ValueError("k must be positive")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (index.dimension,):
        raise DimensionMismatchError(
            f"query dimension {query.shape} does not match index dimension {index.dimension}"
        )
    if len(index) == 0:
        return []
    sims = index.vectors @ query
    order = np.argsort(-sims, kind="stable")[:k]
    return [ScoredHit(chunk_id=index.ids[i], s=float(1.0 - sims[i])) for i in order]


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Write the index: JSON header line, JSON id line, then raw float64 rows."""
    header = {
        "format": _INDEX_FORMAT,
        "dimension": index.dimension,
        "provider_tag": index.provider_tag,
        "count": len(index.ids),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(json.dumps(list(index.ids)).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(index.vectors, dtype=np.float64).tobytes())


def load_index(path: str | Path) -> VectorIndex:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        ids_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line)
        ids = json.loads(ids_line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"corrupt index file {path}: {exc}") from exc
    if header.get("format") != _INDEX_FORMAT:
        raise CorpusFormatError(f"unknown index format in {path}: {header.get('format')!r}")
    dimension = int(header["dimension"])
    count = int(header["count"])
    vectors = np.frombuffer(blob, dtype=np.float64)
    if vectors.size != count * dimension:
        raise CorpusFormatError(
            f"index file {path} truncated: expected {count * dimension} floats, got {vectors.size}"
        )
    vectors = vectors.reshape(count, dimension).copy()
    return VectorIndex(
        ids=tuple(str(i) for i in ids),
        vectors=vectors,
        provider_tag=str(header["provider_tag"]),
        dimension=dimension,
    )
