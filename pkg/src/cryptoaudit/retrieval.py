"""Threshold-gated knowledge retrieval and the dual-signal wrapper.

The retrieval step embeds a query, takes the k nearest chunks, converts
each raw distance s into cos_sim = 1 - s, keeps hits with cos_sim >= tau,
and numbers the survivors from 1. Chunks that carry an external id (the
StackExchange Q&A units) additionally get the full question-and-answer
content appended to the matched key text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .corpus import Corpus, KnowledgeChunk
from .embedding import EmbeddingProvider, VectorIndex, embed, similarity_search
from .errors import ConfigError, CorpusIndexMismatchError, ProviderTagMismatchError


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 5
    tau: float = 0.75

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"retrieval.k must be >= 1, got {self.k}")
        if not -1.0 <= self.tau <= 1.0:
            raise ConfigError(f"retrieval.tau must lie in [-1, 1], got {self.tau}")


class QueryKind(str, Enum):
    SEMANTIC_SUMMARY = "semantic_summary"
    COT_TRACE = "cot_trace"


@dataclass(frozen=True)
class RetrievedItem:
    index_number: int  # contiguous, starting at 1
    chunk_id: str
    cos_sim: float
    rendered_text: str


@dataclass(frozen=True)
class RetrievedBlock:
    query_kind: QueryKind
    items: tuple[RetrievedItem, ...] = field(default_factory=tuple)

    def chunk_ids(self) -> tuple[str, ...]:
        return tuple(item.chunk_id for item in self.items)


def render_chunk(chunk: KnowledgeChunk) -> str:
    """Matched key text, plus the full Q&A for external-id chunks."""
    text = chunk.retrieval_key
    if chunk.external_id is not None:
        text = f"{text}\n\n{chunk.content}"
    return text


def threshold_retrieve(
    index: VectorIndex,
    corpus: Corpus,
    query_text: str,
    cfg: RetrievalConfig,
    provider: EmbeddingProvider,
    query_kind: QueryKind = QueryKind.SEMANTIC_SUMMARY,
) -> RetrievedBlock:
    if provider.tag != index.provider_tag:
        raise ProviderTagMismatchError(
            f"index was built with provider {index.provider_tag!r} but the query uses "
            f"{provider.tag!r}; rebuild the index with the active provider"
        )
    query = embed(query_text, provider)
    hits = similarity_search(index, query, cfg.k)

    items: list[RetrievedItem] = []
    counter = 1
    for hit in hits:
        if hit.cos_sim < cfg.tau:
            continue
        chunk = corpus.get(hit.chunk_id)
        if chunk is None:
            raise CorpusIndexMismatchError(
                f"index entry {hit.chunk_id!r} is missing from the corpus; "
                "corpus and index are out of sync"
            )
        items.append(
            RetrievedItem(
                index_number=counter,
                chunk_id=hit.chunk_id,
                cos_sim=hit.cos_sim,
                rendered_text=render_chunk(chunk),
            )
        )
        counter += 1
    return RetrievedBlock(query_kind=query_kind, items=tuple(items))


def dual_retrieve(
    index: VectorIndex,
    corpus: Corpus,
    summary_text: str,
    cot_text: str,
    cfg: RetrievalConfig,
    provider: EmbeddingProvider,
) -> tuple[RetrievedBlock, RetrievedBlock]:
    """Run the two retrieval signals independently; dedup happens at prompt assembly."""
    if not summary_text or not cot_text:
        raise ValueError("both retrieval signals must be non-empty")
    summary_block = threshold_retrieve(
        index, corpus, summary_text, cfg, provider, QueryKind.SEMANTIC_SUMMARY
    )
    cot_block = threshold_retrieve(
        index, corpus, cot_text, cfg, provider, QueryKind.COT_TRACE
    )
    return summary_block, cot_block


def render_block(block: RetrievedBlock) -> str:
    """The numbered text exactly as it enters a prompt."""
    return "\n\n".join(f"[{item.index_number}] {item.rendered_text}" for item in block.items)
