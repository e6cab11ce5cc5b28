from __future__ import annotations

import json

import pytest

from conftest import scripted_gateway
from cryptoaudit.detection import (
    DetectionReport,
    Finding,
    PipelineMeta,
    PromptBudget,
    Severity,
    Verdict,
    assemble_phase3_prompt,
    derive_verdict,
    detect,
    parse_report,
    render_report,
)
from cryptoaudit.errors import CryptoAuditError, PromptOverBudgetError
from cryptoaudit.predetection import (
    CodeSample,
    PreDetectionBundle,
    ReasoningTrace,
    SemanticSummary,
)
from cryptoaudit.retrieval import QueryKind, RetrievedBlock, RetrievedItem

_SAMPLE = CodeSample(id="s1", source_text="cipher = AES.new(key, AES.MODE_ECB)")

_BUNDLE = PreDetectionBundle(
    sample_id="s1",
    summary=SemanticSummary(text="Encrypts records with AES in ECB mode."),
    trace=ReasoningTrace(steps=("block independence noted",)),
)


def _item(n, chunk_id, cos, text):
    return RetrievedItem(index_number=n, chunk_id=chunk_id, cos_sim=cos, rendered_text=text)


def _blocks(summary_items=(), cot_items=()):
    return (
        RetrievedBlock(query_kind=QueryKind.SEMANTIC_SUMMARY, items=tuple(summary_items)),
        RetrievedBlock(query_kind=QueryKind.COT_TRACE, items=tuple(cot_items)),
    )


def _finding(severity=Severity.HIGH, title="t", citations=()):
    return Finding(
        title=title, category="block-cipher-mode", severity=severity,
        evidence="e", remediation="r", knowledge_citations=tuple(citations),
    )


def _meta(**overrides):
    base = dict(model_tag="m", embedding_tag="e", tau=0.75, k=5, retrieved={})
    base.update(overrides)
    return PipelineMeta(**base)


def _detect_reply(findings) -> str:
    return "```json\n" + json.dumps({"findings": findings}) + "\n```"


# ---------------------------------------------------------------------------
# verdict derivation and report invariants
# ---------------------------------------------------------------------------


def test_derive_verdict():
    assert derive_verdict(()) is Verdict.NO_ISSUE_FOUND
    assert derive_verdict((_finding(Severity.INFO),)) is Verdict.LIKELY_VULNERABLE
    assert derive_verdict((_finding(Severity.LOW),)) is Verdict.LIKELY_VULNERABLE
    assert derive_verdict((_finding(Severity.MEDIUM),)) is Verdict.VULNERABLE
    assert derive_verdict((_finding(Severity.CRITICAL),)) is Verdict.VULNERABLE


def test_vulnerable_verdict_requires_medium_finding():
    with pytest.raises(CryptoAuditError):
        DetectionReport(
            sample_id="s", verdict=Verdict.VULNERABLE,
            findings=(_finding(Severity.LOW),), meta=_meta(),
        )


def test_analysis_failed_requires_diagnostic():
    with pytest.raises(CryptoAuditError):
        DetectionReport(
            sample_id="s", verdict=Verdict.ANALYSIS_FAILED, findings=(), meta=_meta(),
        )


# ---------------------------------------------------------------------------
# prompt assembly
# ---------------------------------------------------------------------------


def test_assembly_section_order():
    blocks = _blocks(
        [_item(1, "c1", 0.9, "semantic knowledge")],
        [_item(1, "c2", 0.8, "trace knowledge")],
    )
    prompt = assemble_phase3_prompt(_SAMPLE, _BUNDLE, blocks)
    positions = [
        prompt.index("MODE_ECB"),                     # code
        prompt.index("Encrypts records"),             # summary
        prompt.index("block independence noted"),     # trace
        prompt.index("semantic knowledge"),
        prompt.index("trace knowledge"),
    ]
    assert positions == sorted(positions)


def test_shared_chunk_appears_once_with_back_reference():
    shared = _item(1, "c-shared", 0.9, "the shared text body")
    blocks = _blocks([shared], [_item(1, "c-shared", 0.88, "the shared text body")])
    prompt = assemble_phase3_prompt(_SAMPLE, _BUNDLE, blocks)
    assert prompt.count("the shared text body") == 1
    assert "duplicate of chunk c-shared" in prompt


def test_empty_blocks_still_assemble():
    prompt = assemble_phase3_prompt(_SAMPLE, _BUNDLE, _blocks())
    assert "no knowledge retrieved above the similarity threshold" in prompt
    assert "MODE_ECB" in prompt


def test_over_budget_drops_lowest_cosine_first():
    items = [
        _item(n + 1, f"c{n}", cos, f"<<text-{n}>> " + "x" * 200)
        for n, cos in enumerate((0.99, 0.95, 0.90, 0.85, 0.80, 0.78))
    ]
    blocks = _blocks(items[:3], items[3:])
    budget = PromptBudget(knowledge_chars=800, total_chars=64000)
    prompt = assemble_phase3_prompt(_SAMPLE, _BUNDLE, blocks, budget)
    # the highest-cosine items survive; the lowest are dropped
    assert "<<text-0>>" in prompt
    dropped = [n for n in range(6) if f"<<text-{n}>>" not in prompt]
    kept = [n for n in range(6) if f"<<text-{n}>>" in prompt]
    assert dropped, "budget should force at least one drop"
    assert max(kept) < min(dropped) or all(
        items[d].cos_sim <= min(items[k].cos_sim for k in kept) for d in dropped
    )


def test_code_over_total_budget_raises():
    big = CodeSample(id="big", source_text="y = 1\n" * 4000)
    with pytest.raises(PromptOverBudgetError):
        assemble_phase3_prompt(big, _BUNDLE, _blocks(), PromptBudget(total_chars=2000))


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------


def test_detect_vulnerable_with_citation():
    blocks = _blocks([_item(1, "kb-1", 0.9, "ecb leaks block structure")])
    reply = _detect_reply(
        [
            {
                "title": "ECB mode leaks record structure",
                "category": "block-cipher-mode",
                "severity": "high",
                "evidence": "AES.MODE_ECB",
                "remediation": "use AES-GCM with unique nonces",
                "citations": ["kb-1"],
            }
        ]
    )
    report = detect(_SAMPLE, _BUNDLE, blocks, scripted_gateway(("detect", reply)),
                    embedding_tag="mock", tau=0.75, k=5)
    assert report.verdict is Verdict.VULNERABLE
    assert report.findings[0].knowledge_citations == ("kb-1",)
    assert report.meta.retrieved["semantic_summary"] == ("kb-1",)


def test_detect_benign_sample():
    report = detect(_SAMPLE, _BUNDLE, _blocks(),
                    scripted_gateway(("detect", _detect_reply([]))),
                    embedding_tag="mock", tau=0.75, k=5)
    assert report.verdict is Verdict.NO_ISSUE_FOUND
    assert report.findings == ()


def test_detect_drops_unretrieved_citation_with_warning():
    blocks = _blocks([_item(1, "kb-1", 0.9, "knowledge")])
    reply = _detect_reply(
        [
            {
                "title": "t", "category": "other", "severity": "medium",
                "evidence": "e", "remediation": "r",
                "citations": ["kb-1", "kb-hallucinated"],
            }
        ]
    )
    report = detect(_SAMPLE, _BUNDLE, blocks, scripted_gateway(("detect", reply)),
                    embedding_tag="mock", tau=0.75, k=5)
    assert report.findings[0].knowledge_citations == ("kb-1",)
    assert any("kb-hallucinated" in w for w in report.meta.warnings)


def test_detect_reformat_retry_recovers():
    good = _detect_reply(
        [{"title": "t", "category": "other", "severity": "low",
          "evidence": "e", "remediation": "r", "citations": []}]
    )
    gw = scripted_gateway(("detect", "no json here"), ("detect_reformat", good))
    report = detect(_SAMPLE, _BUNDLE, _blocks(), gw, embedding_tag="mock", tau=0.75, k=5)
    assert report.verdict is Verdict.LIKELY_VULNERABLE


def test_detect_analysis_failed_keeps_raw_reply():
    gw = scripted_gateway(("detect", "still not json"), ("detect_reformat", "nor this"))
    report = detect(_SAMPLE, _BUNDLE, _blocks(), gw, embedding_tag="mock", tau=0.75, k=5)
    assert report.verdict is Verdict.ANALYSIS_FAILED
    assert "nor this" in report.diagnostic


def test_detect_over_budget_reports_analysis_failed():
    big = CodeSample(id="big", source_text="y = 1\n" * 4000)
    report = detect(big, _BUNDLE, _blocks(), scripted_gateway(),
                    embedding_tag="mock", tau=0.75, k=5,
                    budget=PromptBudget(total_chars=2000))
    assert report.verdict is Verdict.ANALYSIS_FAILED
    assert "budget" in report.diagnostic


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _report():
    return DetectionReport(
        sample_id="s1",
        verdict=Verdict.VULNERABLE,
        findings=(_finding(Severity.HIGH, "finding one", ("kb-1",)),
                  _finding(Severity.INFO, "finding two")),
        meta=_meta(retrieved={"semantic_summary": ("kb-1",), "cot_trace": ()}),
    )


def test_machine_rendering_is_deterministic():
    report = _report()
    assert render_report(report, "machine") == render_report(report, "machine")


def test_machine_rendering_roundtrips():
    report = _report()
    assert parse_report(render_report(report, "machine")) == report


def test_human_rendering_groups_and_reports_no_issues():
    report = _report()
    text = render_report(report, "human")
    assert text.index("[HIGH]") < text.index("[INFO]")
    clean = DetectionReport(
        sample_id="s2", verdict=Verdict.NO_ISSUE_FOUND, findings=(), meta=_meta(),
    )
    assert "No issues found." in render_report(clean, "human")


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        render_report(_report(), "pdf")
