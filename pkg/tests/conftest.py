from __future__ import annotations

import pytest

from cryptoaudit.corpus import Corpus, KnowledgeChunk, SourceType
from cryptoaudit.embedding import MockEmbeddingProvider, build_index
from cryptoaudit.gateway import Gateway, MockRecord, RetryPolicy, ScriptedMockBackend


@pytest.fixture
def mock_provider():
    return MockEmbeddingProvider()


def make_chunk(i: int, text: str, source_type=SourceType.BLOG, external_id=None,
               content=None) -> KnowledgeChunk:
    chunk = KnowledgeChunk(
        id=f"chunk-{i:03d}",
        source_type=source_type,
        title=f"chunk {i}",
        retrieval_key=text,
        content=content if content is not None else text,
        external_id=external_id,
        metadata={"origin": "test"},
    )
    chunk.validate()
    return chunk


def make_corpus(texts: list[str]) -> Corpus:
    return Corpus([make_chunk(i, t) for i, t in enumerate(texts)])


def indexed_corpus(texts: list[str], provider=None):
    provider = provider or MockEmbeddingProvider()
    corpus = make_corpus(texts)
    return build_index(corpus, provider), corpus, provider


def scripted_gateway(*records: tuple[str, str], model_tag="scripted-mock") -> Gateway:
    """Gateway over a scripted mock; (template_id, reply) pairs match any prompt."""
    backend = ScriptedMockBackend([MockRecord(t, "*", r) for t, r in records])
    return Gateway(backend=backend, model_tag=model_tag,
                   retry=RetryPolicy(attempts=3, delays=(0.0, 0.0, 0.0)))
