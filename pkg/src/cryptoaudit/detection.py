"""Final detection phase: fuse pre-detection output with retrieved knowledge.

The phase-3 prompt carries, in order: the target code, the semantic
summary, compliance findings when present, the reasoning trace, and the two
retrieved knowledge blocks. Chunks retrieved by both signals appear once;
the second occurrence becomes a back-reference. When the assembled prompt
exceeds its budget, retrieved items are dropped lowest-cosine-first; the
code itself is never truncated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from . import prompts
from .errors import (
    CryptoAuditError,
    PromptOverBudgetError,
    StructuredOutputError,
)
from .gateway import Gateway, parse_json_block
from .predetection import (
    CodeSample,
    PreDetectionBundle,
    render_compliance_text,
    reasoning_signal,
)
from .retrieval import QueryKind, RetrievedBlock

REPORT_SCHEMA_VERSION = "cryptoaudit.report/1"


class Verdict(str, Enum):
    VULNERABLE = "vulnerable"
    LIKELY_VULNERABLE = "likely_vulnerable"
    NO_ISSUE_FOUND = "no_issue_found"
    ANALYSIS_FAILED = "analysis_failed"


class Severity(str, Enum):
    CRITICAL = "critical"
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"
    INFO = "info"


_SEVERITY_RANK = {
    Severity.CRITICAL: 4,
    Severity.HIGH: 3,
    Severity.MEDIUM: 2,
    Severity.LOW: 1,
    Severity.INFO: 0,
}


@dataclass(frozen=True)
class Finding:
    title: str
    category: str
    severity: Severity
    evidence: str
    remediation: str
    knowledge_citations: tuple[str, ...] = ()


@dataclass(frozen=True)
class PipelineMeta:
    model_tag: str
    embedding_tag: str
    tau: float
    k: int
    retrieved: dict[str, tuple[str, ...]]  # query kind -> chunk ids
    warnings: tuple[str, ...] = ()
    # Wall-clock phase timings; deliberately kept out of the serialized
    # report so mock runs stay byte-identical.
    timings_s: dict[str, float] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class DetectionReport:
    sample_id: str
    verdict: Verdict
    findings: tuple[Finding, ...]
    meta: PipelineMeta
    diagnostic: str | None = None

    def __post_init__(self) -> None:
        if self.verdict is Verdict.VULNERABLE:
            if not any(_SEVERITY_RANK[f.severity] >= _SEVERITY_RANK[Severity.MEDIUM]
                       for f in self.findings):
                raise CryptoAuditError(
                    "vulnerable verdict requires at least one finding of severity >= medium"
                )
        if self.verdict is Verdict.ANALYSIS_FAILED and not self.diagnostic:
            raise CryptoAuditError("analysis_failed reports must carry a diagnostic")


def derive_verdict(findings: tuple[Finding, ...]) -> Verdict:
    if any(_SEVERITY_RANK[f.severity] >= _SEVERITY_RANK[Severity.MEDIUM] for f in findings):
        return Verdict.VULNERABLE
    if findings:
        return Verdict.LIKELY_VULNERABLE
    return Verdict.NO_ISSUE_FOUND


# --------------------------------------------------------------------------
# prompt assembly
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptBudget:
    knowledge_chars: int = 12000
    total_chars: int = 64000


_BLOCK_LABELS = {
    QueryKind.SEMANTIC_SUMMARY: "Retrieved Knowledge (semantic summary signal)",
    QueryKind.COT_TRACE: "Retrieved Knowledge (reasoning trace signal)",
}


def _render_knowledge(
    blocks: tuple[RetrievedBlock, RetrievedBlock], dropped: set[tuple[str, int]]
) -> str:
    sections = []
    seen: dict[str, QueryKind] = {}
    for block in blocks:
        lines = [f"## {_BLOCK_LABELS[block.query_kind]}"]
        kept = [
            item for item in block.items
            if (block.query_kind.value, item.index_number) not in dropped
        ]
        if not kept:
            lines.append("(no knowledge retrieved above the similarity threshold)")
        for item in kept:
            first_kind = seen.get(item.chunk_id)
            if first_kind is not None and first_kind is not block.query_kind:
                lines.append(
                    f"[{item.index_number}] (duplicate of chunk {item.chunk_id} "
                    f"already listed under '{_BLOCK_LABELS[first_kind]}')"
                )
            else:
                seen.setdefault(item.chunk_id, block.query_kind)
                lines.append(f"[{item.index_number}] (chunk {item.chunk_id}, "
                             f"cos_sim {item.cos_sim:.4f})\n{item.rendered_text}")
        sections.append("\n".join(lines))
    return "\n\n".join(sections)


def assemble_phase3_prompt(
    sample: CodeSample,
    bundle: PreDetectionBundle,
    blocks: tuple[RetrievedBlock, RetrievedBlock],
    budget: PromptBudget = PromptBudget(),
) -> str:
    head = (
        f"{prompts.DETECT_INSTRUCTION}\n\n"
        f"## Target Code (id: {sample.id})\n```\n{sample.source_text.rstrip()}\n```\n\n"
        f"## Semantic Summary\n{bundle.summary.text}\n"
    )
    if bundle.summary.parameters:
        head += "Parameters: " + "; ".join(
            f"{name}={value} ({role})" for name, value, role in bundle.summary.parameters
        ) + "\n"
    head += "\n"
    if bundle.compliance is not None:
        head += f"## Compliance Findings\n{render_compliance_text(bundle.compliance)}\n\n"
    head += f"## Reasoning Trace\n{reasoning_signal(bundle)}\n\n"
    if bundle.curve is not None:
        flags = ", ".join(sorted(f.value for f in bundle.curve.flags)) or "none"
        head += (
            "## Curve Assessment\n"
            f"flags: {flags}; order: {bundle.curve.order}; "
            f"executor: {bundle.curve.executor.value}\n"
            f"{bundle.curve.evidence}\n\n"
        )
    tail = f"\n\n{prompts.DETECT_NOTICE}\n"

    scaffold_size = len(head) + len(tail)
    if scaffold_size > budget.total_chars:
        raise PromptOverBudgetError(
            f"target code and analysis scaffold need {scaffold_size} characters but the "
            f"prompt budget is {budget.total_chars}; the code cannot be truncated"
        )

    # Drop retrieved items lowest cos_sim first (later items first on ties)
    # until both the knowledge budget and the total budget are met.
    dropped: set[tuple[str, int]] = set()
    candidates = sorted(
        (
            (item.cos_sim, -position, block.query_kind.value, item.index_number)
            for block in blocks
            for position, item in enumerate(block.items)
        ),
    )
    drop_queue = [(kind, number) for _, _, kind, number in candidates]

    while True:
        knowledge = _render_knowledge(blocks, dropped)
        if (
            len(knowledge) <= budget.knowledge_chars
            and scaffold_size + len(knowledge) <= budget.total_chars
        ):
            return head + knowledge + tail
        while drop_queue and drop_queue[0] in dropped:
            drop_queue.pop(0)
        if not drop_queue:
            # Nothing left to drop; the empty-knowledge rendering has to fit.
            return head + knowledge + tail
        dropped.add(drop_queue.pop(0))


# --------------------------------------------------------------------------
# detection
# --------------------------------------------------------------------------


def _parse_findings(
    reply: str, retrieved_ids: set[str], warnings: list[str]
) -> tuple[Finding, ...]:
    obj = parse_json_block(reply)
    raw_findings = obj.get("findings")
    if not isinstance(raw_findings, list):
        raise StructuredOutputError("detection reply has no 'findings' list", raw_text=reply)
    findings: list[Finding] = []
    for raw in raw_findings:
        if not isinstance(raw, dict):
            raise StructuredOutputError("finding entry is not an object", raw_text=reply)
        try:
            severity = Severity(str(raw.get("severity", "")))
        except ValueError:
            raise StructuredOutputError(
                f"invalid severity {raw.get('severity')!r}", raw_text=reply
            ) from None
        title = str(raw.get("title", "")).strip()
        if not title:
            raise StructuredOutputError("finding has no title", raw_text=reply)
        citations: list[str] = []
        for cited in raw.get("citations", []) or []:
            cited = str(cited)
            if cited in retrieved_ids:
                citations.append(cited)
            else:
                warnings.append(
                    f"finding {title!r} cited chunk {cited!r} which was not retrieved "
                    "in this run; citation dropped"
                )
        findings.append(
            Finding(
                title=title,
                category=str(raw.get("category", "other")).strip().lower() or "other",
                severity=severity,
                evidence=str(raw.get("evidence", "")),
                remediation=str(raw.get("remediation", "")),
                knowledge_citations=tuple(citations),
            )
        )
    return tuple(findings)


def detect(
    sample: CodeSample,
    bundle: PreDetectionBundle,
    blocks: tuple[RetrievedBlock, RetrievedBlock],
    gateway: Gateway,
    embedding_tag: str,
    tau: float,
    k: int,
    budget: PromptBudget = PromptBudget(),
) -> DetectionReport:
    retrieved = {
        block.query_kind.value: block.chunk_ids() for block in blocks
    }
    meta_base = dict(
        model_tag=gateway.model_tag,
        embedding_tag=embedding_tag,
        tau=tau,
        k=k,
        retrieved=retrieved,
    )

    try:
        prompt = assemble_phase3_prompt(sample, bundle, blocks, budget)
    except PromptOverBudgetError as exc:
        return DetectionReport(
            sample_id=sample.id,
            verdict=Verdict.ANALYSIS_FAILED,
            findings=(),
            meta=PipelineMeta(**meta_base),
            diagnostic=str(exc),
        )

    retrieved_ids = {cid for ids in retrieved.values() for cid in ids}
    warnings: list[str] = []
    reply = gateway.ask(prompts.TEMPLATE_DETECT, prompt)
    try:
        findings = _parse_findings(reply, retrieved_ids, warnings)
    except StructuredOutputError:
        # One reformat-retry: re-prompt with the schema before giving up.
        retry_reply = gateway.ask(
            prompts.TEMPLATE_DETECT_REFORMAT, prompts.DETECT_REFORMAT_PROMPT % reply
        )
        try:
            findings = _parse_findings(retry_reply, retrieved_ids, warnings)
        except StructuredOutputError as exc:
            return DetectionReport(
                sample_id=sample.id,
                verdict=Verdict.ANALYSIS_FAILED,
                findings=(),
                meta=PipelineMeta(**meta_base, warnings=tuple(warnings)),
                diagnostic=(
                    f"detection output unparseable after one reformat retry: {exc}\n"
                    f"--- raw reply ---\n{exc.raw_text}"
                ),
            )

    return DetectionReport(
        sample_id=sample.id,
        verdict=derive_verdict(findings),
        findings=findings,
        meta=PipelineMeta(**meta_base, warnings=tuple(warnings)),
    )


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def report_to_record(report: DetectionReport) -> dict[str, Any]:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "sample_id": report.sample_id,
        "verdict": report.verdict.value,
        "findings": [
            {
                "title": f.title,
                "category": f.category,
                "severity": f.severity.value,
                "evidence": f.evidence,
                "remediation": f.remediation,
                "knowledge_citations": list(f.knowledge_citations),
            }
            for f in report.findings
        ],
        "meta": {
            "model_tag": report.meta.model_tag,
            "embedding_tag": report.meta.embedding_tag,
            "tau": report.meta.tau,
            "k": report.meta.k,
            "retrieved": {kind: list(ids) for kind, ids in sorted(report.meta.retrieved.items())},
            "warnings": list(report.meta.warnings),
        },
        "diagnostic": report.diagnostic,
    }


def parse_report(text: str) -> DetectionReport:
    record = json.loads(text)
    if record.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise CryptoAuditError(
            f"unsupported report schema: {record.get('schema_version')!r}"
        )
    return DetectionReport(
        sample_id=record["sample_id"],
        verdict=Verdict(record["verdict"]),
        findings=tuple(
            Finding(
                title=f["title"],
                category=f["category"],
                severity=Severity(f["severity"]),
                evidence=f["evidence"],
                remediation=f["remediation"],
                knowledge_citations=tuple(f["knowledge_citations"]),
            )
            for f in record["findings"]
        ),
        meta=PipelineMeta(
            model_tag=record["meta"]["model_tag"],
            embedding_tag=record["meta"]["embedding_tag"],
            tau=record["meta"]["tau"],
            k=record["meta"]["k"],
            retrieved={k: tuple(v) for k, v in record["meta"]["retrieved"].items()},
            warnings=tuple(record["meta"]["warnings"]),
        ),
        diagnostic=record.get("diagnostic"),
    )


def render_report(report: DetectionReport, format: str = "machine") -> str:
    if format == "machine":
        return json.dumps(report_to_record(report), indent=2, sort_keys=True,
                          ensure_ascii=False) + "\n"
    if format == "human":
        return _render_human(report)
    raise ValueError(f"unknown report format {format!r}")


def _render_human(report: DetectionReport) -> str:
    lines = [
        f"Sample: {report.sample_id}",
        f"Verdict: {report.verdict.value}",
        "",
    ]
    if report.verdict is Verdict.ANALYSIS_FAILED:
        lines.append("Analysis failed:")
        lines.append(report.diagnostic or "")
    elif not report.findings:
        lines.append("No issues found.")
    else:
        ordered = sorted(
            report.findings, key=lambda f: (-_SEVERITY_RANK[f.severity], f.title)
        )
        for finding in ordered:
            lines.append(f"[{finding.severity.value.upper()}] {finding.title} "
                         f"({finding.category})")
            lines.append(f"  Evidence: {finding.evidence}")
            lines.append(f"  Remediation: {finding.remediation}")
            if finding.knowledge_citations:
                lines.append("  Knowledge: " + ", ".join(finding.knowledge_citations))
            lines.append("")
    if report.meta.warnings:
        lines.append("Warnings:")
        lines.extend(f"  - {w}" for w in report.meta.warnings)
        lines.append("")
    lines.append(
        f"(model={report.meta.model_tag}, embeddings={report.meta.embedding_tag}, "
        f"tau={report.meta.tau}, k={report.meta.k})"
    )
    return "\n".join(lines).rstrip() + "\n"


__all__ = [
    "DetectionReport",
    "Finding",
    "PipelineMeta",
    "PromptBudget",
    "Severity",
    "Verdict",
    "assemble_phase3_prompt",
    "derive_verdict",
    "detect",
    "parse_report",
    "render_report",
    "report_to_record",
]
