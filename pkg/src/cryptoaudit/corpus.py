"""Knowledge corpus construction: segmentation, chunking, JSONL persistence.

Raw source material (CTF writeups, blogs, CWE rules, books, research
abstracts, StackExchange Q&A dumps) is turned into typed knowledge chunks.
StackExchange records keep the question as the retrieval key and the full
Q&A as content; every other source uses the chunk text as both key and
content.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .errors import ChunkPolicyError, CorpusFormatError


class SourceType(str, Enum):
    CTF_WRITEUP = "ctf_writeup"
    BLOG = "blog"
    CWE_RULE = "cwe_rule"
    BOOK = "book"
    RESEARCH_ABSTRACT = "research_abstract"
    STACKEXCHANGE = "stackexchange"


@dataclass(frozen=True)
class KnowledgeChunk:
    """One retrievable knowledge unit."""

    id: str
    source_type: SourceType
    title: str
    retrieval_key: str
    content: str
    external_id: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    # Unknown fields seen in a corpus file; carried through save/load verbatim.
    extra: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.id:
            raise CorpusFormatError("chunk id is empty")
        if not self.retrieval_key:
            raise CorpusFormatError(f"chunk {self.id!r}: retrieval_key is empty")
        if not self.content:
            raise CorpusFormatError(f"chunk {self.id!r}: content is empty")
        if self.source_type is SourceType.STACKEXCHANGE:
            if not self.external_id:
                raise CorpusFormatError(
                    f"chunk {self.id!r}: stackexchange chunks require external_id"
                )
        elif self.retrieval_key != self.content:
            raise CorpusFormatError(
                f"chunk {self.id!r}: non-stackexchange chunks must use content as retrieval_key"
            )


@dataclass(frozen=True)
class RawDocument:
    source_type: SourceType
    body: str
    origin: str

    def __post_init__(self) -> None:
        if not self.body:
            raise ValueError(f"document {self.origin!r} has an empty body")


class Corpus:
    """Immutable chunk collection with id lookup; safe to share across threads."""

    def __init__(self, chunks: Iterable[KnowledgeChunk]):
        self._chunks: tuple[KnowledgeChunk, ...] = tuple(chunks)
        by_id: dict[str, KnowledgeChunk] = {}
        for chunk in self._chunks:
            if chunk.id in by_id:
                raise CorpusFormatError(f"duplicate chunk id: {chunk.id!r}")
            by_id[chunk.id] = chunk
        self._by_id = by_id

    def __len__(self) -> int:
        return len(self._chunks)

    def __iter__(self) -> Iterator[KnowledgeChunk]:
        return iter(self._chunks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self._chunks == other._chunks

    @property
    def chunks(self) -> tuple[KnowledgeChunk, ...]:
        return self._chunks

    def get(self, chunk_id: str) -> KnowledgeChunk | None:
        return self._by_id.get(chunk_id)


# --------------------------------------------------------------------------
# segmentation and chunking
# --------------------------------------------------------------------------

_FENCE_MARKERS = ("```", "~~~")


def _is_h3(line: str) -> bool:
    return line.startswith("### ") or line.rstrip() == "###"


def segment_markdown_by_h3(doc: RawDocument) -> list[tuple[str, str]]:
    """Split markdown into (title, body) sections at third-level headers.

    Content before the first header lands in a preamble section with an
    empty title. Fenced code blocks are opaque: a ``###`` inside a fence is
    literal text, never a section boundary.
    """
    lines = doc.body.splitlines()
    if not lines:
        return []

    sections: list[tuple[str, str]] = []
    title = ""
    body_lines: list[str] = []
    seen_header = False
    fence: str | None = None

    def flush() -> None:
        if seen_header or body_lines:
            sections.append((title, "\n".join(body_lines)))

    for line in lines:
        stripped = line.lstrip()
        if fence is not None:
            body_lines.append(line)
            if stripped.startswith(fence):
                fence = None
            continue
        opened = next((m for m in _FENCE_MARKERS if stripped.startswith(m)), None)
        if opened is not None:
            fence = opened
            body_lines.append(line)
            continue
        if _is_h3(line) and not line.startswith("####"):
            flush()
            title = line.rstrip()[3:].strip()
            body_lines = []
            seen_header = True
            continue
        body_lines.append(line)

    flush()
    return sections


def chunk_fixed(text: str, max_chars: int, overlap: int) -> list[str]:
    """Fixed-size chunking where consecutive chunks share `overlap` characters."""
    if max_chars <= 0:
        raise ValueError("max_chars must be positive")
    if overlap < 0:
        raise ValueError("overlap must be non-negative")
    if overlap >= max_chars:
        raise ValueError(f"overlap ({overlap}) must be smaller than max_chars ({max_chars})")
    if not text:
        return []

    stride = max_chars - overlap
    chunks: list[str] = []
    start = 0
    while True:
        chunks.append(text[start : start + max_chars])
        if start + max_chars >= len(text):
            break
        start += stride
    return chunks


class ChunkStrategy(str, Enum):
    H3_SECTIONS = "h3_sections"
    FIXED = "fixed"
    WHOLE = "whole"
    QA_RECORD = "qa_record"


@dataclass(frozen=True)
class ChunkRule:
    strategy: ChunkStrategy
    max_chars: int = 1600
    overlap: int = 200


@dataclass(frozen=True)
class ChunkingPolicy:
    rules: Mapping[SourceType, ChunkRule]

    def rule_for(self, source_type: SourceType) -> ChunkRule:
        try:
            return self.rules[source_type]
        except KeyError:
            raise ChunkPolicyError(
                f"no chunking rule configured for source type {source_type.value!r}"
            ) from None


DEFAULT_POLICY = ChunkingPolicy(
    rules={
        SourceType.CTF_WRITEUP: ChunkRule(ChunkStrategy.H3_SECTIONS),
        SourceType.BLOG: ChunkRule(ChunkStrategy.H3_SECTIONS),
        SourceType.CWE_RULE: ChunkRule(ChunkStrategy.WHOLE),
        SourceType.BOOK: ChunkRule(ChunkStrategy.FIXED),
        SourceType.RESEARCH_ABSTRACT: ChunkRule(ChunkStrategy.WHOLE),
        SourceType.STACKEXCHANGE: ChunkRule(ChunkStrategy.QA_RECORD),
    }
)


def load_policy(path: str | Path) -> ChunkingPolicy:
    """Read a chunking policy file: JSON map of source type to rule."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    rules: dict[SourceType, ChunkRule] = {}
    for key, value in raw.items():
        try:
            source_type = SourceType(key)
        except ValueError:
            raise ChunkPolicyError(f"unknown source type in policy file: {key!r}") from None
        rules[source_type] = ChunkRule(
            strategy=ChunkStrategy(value["strategy"]),
            max_chars=int(value.get("max_chars", 1600)),
            overlap=int(value.get("overlap", 200)),
        )
    return ChunkingPolicy(rules=rules)


def chunk_id_for(origin: str, section_index: int, chunk_index: int) -> str:
    """Stable chunk id; rebuilds of the same sources yield identical ids."""
    payload = f"{origin}\x00{section_index}\x00{chunk_index}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


def _make_chunk(
    doc: RawDocument,
    section_index: int,
    chunk_index: int,
    title: str,
    retrieval_key: str,
    content: str,
    external_id: str | None = None,
    section_path: str = "",
) -> KnowledgeChunk:
    metadata = {"origin": doc.origin}
    if section_path:
        metadata["section"] = section_path
    chunk = KnowledgeChunk(
        id=chunk_id_for(doc.origin, section_index, chunk_index),
        source_type=doc.source_type,
        title=title,
        retrieval_key=retrieval_key,
        content=content,
        external_id=external_id,
        metadata=metadata,
    )
    chunk.validate()
    return chunk


def _qa_chunk(doc: RawDocument) -> KnowledgeChunk:
    try:
        record = json.loads(doc.body)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(
            f"stackexchange record {doc.origin!r} is not valid JSON: {exc}"
        ) from exc
    for field_name in ("id", "question", "answer"):
        if field_name not in record:
            raise CorpusFormatError(
                f"stackexchange record {doc.origin!r} is missing {field_name!r}"
            )
    question = str(record["question"])
    answer = str(record["answer"])
    return _make_chunk(
        doc,
        section_index=0,
        chunk_index=0,
        title=str(record.get("title", question.splitlines()[0][:80])),
        retrieval_key=question,
        content=f"{question}\n\n{answer}",
        external_id=str(record["id"]),
    )


def build_chunks(
    docs: Iterable[RawDocument],
    policy: ChunkingPolicy = DEFAULT_POLICY,
) -> list[KnowledgeChunk]:
    """Turn raw documents into knowledge chunks under the per-source policy."""
    chunks: list[KnowledgeChunk] = []
    for doc in docs:
        rule = policy.rule_for(doc.source_type)
        if rule.strategy is ChunkStrategy.QA_RECORD:
            chunks.append(_qa_chunk(doc))
        elif rule.strategy is ChunkStrategy.WHOLE:
            chunks.append(
                _make_chunk(doc, 0, 0, title="", retrieval_key=doc.body, content=doc.body)
            )
        elif rule.strategy is ChunkStrategy.FIXED:
            for ci, piece in enumerate(chunk_fixed(doc.body, rule.max_chars, rule.overlap)):
                chunks.append(
                    _make_chunk(doc, 0, ci, title="", retrieval_key=piece, content=piece)
                )
        elif rule.strategy is ChunkStrategy.H3_SECTIONS:
            for si, (title, body) in enumerate(segment_markdown_by_h3(doc)):
                if not body.strip():
                    continue
                if len(body) > rule.max_chars:
                    pieces = chunk_fixed(body, rule.max_chars, rule.overlap)
                else:
                    pieces = [body]
                for ci, piece in enumerate(pieces):
                    chunks.append(
                        _make_chunk(
                            doc,
                            si,
                            ci,
                            title=title,
                            retrieval_key=piece,
                            content=piece,
                            section_path=f"{si}:{title}" if title else str(si),
                        )
                    )
        else:  # pragma: no cover - enum is exhaustive
            raise ChunkPolicyError(f"unhandled strategy {rule.strategy!r}")
    return chunks


def llm_extract_chunks(doc: RawDocument, gateway) -> list[KnowledgeChunk]:
    """Optional model-assisted ingestion: fine-grained units per writeup.

    The deterministic strategies above never need a model; this path exists
    for corpora where section structure is too noisy to chunk mechanically.
    Unit ids hang off the document origin with an extraction marker so they
    can never collide with ids from the deterministic modes.
    """
    from . import prompts
    from .gateway import parse_json_block

    reply = gateway.ask(
        prompts.TEMPLATE_KB_EXTRACT,
        prompts.KB_EXTRACT_PROMPT.format(origin=doc.origin, body=doc.body),
    )
    obj = parse_json_block(reply)
    units = obj.get("units")
    if not isinstance(units, list):
        from .errors import StructuredOutputError

        raise StructuredOutputError("extraction reply has no 'units' list", raw_text=reply)
    chunks = []
    for i, unit in enumerate(units):
        text = str(unit.get("text", "")).strip()
        if not text:
            continue
        chunk = KnowledgeChunk(
            id=chunk_id_for(f"{doc.origin}#llm", 0, i),
            source_type=doc.source_type,
            title=str(unit.get("title", "")),
            retrieval_key=text,
            content=text,
            metadata={"origin": doc.origin, "extraction": "llm"},
        )
        chunk.validate()
        chunks.append(chunk)
    return chunks


# --------------------------------------------------------------------------
# persistence (JSON Lines, UTF-8, LF)
# --------------------------------------------------------------------------

_KNOWN_FIELDS = ("id", "source_type", "title", "retrieval_key", "content", "external_id", "metadata")


def chunk_to_record(chunk: KnowledgeChunk) -> dict[str, Any]:
    record: dict[str, Any] = {
        "id": chunk.id,
        "source_type": chunk.source_type.value,
        "title": chunk.title,
        "retrieval_key": chunk.retrieval_key,
        "content": chunk.content,
        "metadata": dict(chunk.metadata),
    }
    if chunk.external_id is not None:
        record["external_id"] = chunk.external_id
    record.update(chunk.extra)
    return record


def record_to_chunk(record: dict[str, Any]) -> KnowledgeChunk:
    extra = {k: v for k, v in record.items() if k not in _KNOWN_FIELDS}
    chunk = KnowledgeChunk(
        id=str(record["id"]),
        source_type=SourceType(record["source_type"]),
        title=str(record.get("title", "")),
        retrieval_key=str(record["retrieval_key"]),
        content=str(record["content"]),
        external_id=(None if record.get("external_id") is None else str(record["external_id"])),
        metadata={str(k): str(v) for k, v in record.get("metadata", {}).items()},
        extra=extra,
    )
    chunk.validate()
    return chunk


def save_corpus(corpus: Corpus | Iterable[KnowledgeChunk], path: str | Path) -> None:
    chunks = corpus.chunks if isinstance(corpus, Corpus) else tuple(corpus)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk_to_record(chunk), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def load_corpus(path: str | Path) -> Corpus:
    chunks: list[KnowledgeChunk] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"malformed JSON: {exc.msg}", line_number) from exc
            if not isinstance(record, dict):
                raise CorpusFormatError("record is not a JSON object", line_number)
            try:
                chunk = record_to_chunk(record)
            except (KeyError, ValueError) as exc:
                raise CorpusFormatError(f"bad record: {exc}", line_number) from exc
            except CorpusFormatError as exc:
                raise CorpusFormatError(str(exc), line_number) from exc
            if chunk.id in seen:
                raise CorpusFormatError(
                    f"duplicate chunk id {chunk.id!r} (first seen on line {seen[chunk.id]})",
                    line_number,
                )
            seen[chunk.id] = line_number
            chunks.append(chunk)
    return Corpus(chunks)


# --------------------------------------------------------------------------
# source tree loading for `kb build`
# --------------------------------------------------------------------------

_SOURCE_DIRS = {
    "ctf": SourceType.CTF_WRITEUP,
    "blog": SourceType.BLOG,
    "cwe": SourceType.CWE_RULE,
    "book": SourceType.BOOK,
    "abstract": SourceType.RESEARCH_ABSTRACT,
    "stackexchange": SourceType.STACKEXCHANGE,
}


def load_source_tree(root: str | Path) -> list[RawDocument]:
    """Read a sources directory laid out as one subdirectory per source type.

    StackExchange files are JSONL dumps: each line becomes one RawDocument.
    Everything else is one document per file.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusFormatError(f"sources directory not found: {root}")
    docs: list[RawDocument] = []
    for dir_name, source_type in _SOURCE_DIRS.items():
        subdir = root / dir_name
        if not subdir.is_dir():
            continue
        for file_path in sorted(subdir.iterdir()):
            if not file_path.is_file():
                continue
            text = file_path.read_text(encoding="utf-8")
            rel = file_path.relative_to(root).as_posix()
            if source_type is SourceType.STACKEXCHANGE:
                for n, line in enumerate(text.splitlines(), start=1):
                    if line.strip():
                        docs.append(RawDocument(source_type, line, f"{rel}#L{n}"))
            elif text.strip():
                docs.append(RawDocument(source_type, text, rel))
    return docs
