from __future__ import annotations

import json

import pytest

from conftest import scripted_gateway
from cryptoaudit.config import assets_path
from cryptoaudit.curves import CurveExecutorKind, CurveFlag
from cryptoaudit.errors import CurveExtractionError, StructuredOutputError
from cryptoaudit.predetection import (
    CheckStatus,
    CodeSample,
    Confidence,
    SemanticSummary,
    cot_reason,
    extract_curve_params,
    identify_route,
    load_algorithm_specs,
    load_few_shot_examples,
    normalize_algorithm,
    reasoning_signal,
    run_predetection,
    semantic_signal,
    summarize,
    verify_compliance,
)

SPECS = load_algorithm_specs(assets_path("specs"))
FEW_SHOT = load_few_shot_examples(assets_path("fewshot"))

_SAMPLE = CodeSample(id="s1", source_text="print('no crypto here')")


def _json_reply(obj) -> str:
    return "```json\n" + json.dumps(obj) + "\n```"


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------


def test_summarize_returns_mock_text_verbatim():
    reply = _json_reply(
        {
            "summary": "Implements textbook RSA without padding.",
            "algorithms": ["textbook rsa"],
            "parameters": [{"name": "n", "value": "1024 bits", "role": "modulus"}],
        }
    )
    gw = scripted_gateway(("summarize", reply))
    summary = summarize(_SAMPLE, gw)
    assert summary.text == "Implements textbook RSA without padding."
    assert summary.extracted_algorithms == ("rsa-textbook",)
    assert summary.parameters == (("n", "1024 bits", "modulus"),)


def test_summarize_no_crypto_content():
    gw = scripted_gateway(
        ("summarize", _json_reply({"summary": "Plain I/O code.", "algorithms": []}))
    )
    assert summarize(_SAMPLE, gw).extracted_algorithms == ()


def test_summarize_reports_signature_components():
    reply = _json_reply(
        {
            "summary": "ECDSA verification over P-256.",
            "algorithms": ["ecdsa"],
            "parameters": [
                {"name": "r", "value": "256-bit", "role": "signature component"},
                {"name": "s", "value": "256-bit", "role": "signature component"},
            ],
        }
    )
    summary = summarize(_SAMPLE, scripted_gateway(("summarize", reply)))
    names = [name for name, _, _ in summary.parameters]
    assert "r" in names and "s" in names


def test_summarize_unparseable_reply_carries_raw_text():
    gw = scripted_gateway(("summarize", "I will not answer in JSON."))
    with pytest.raises(StructuredOutputError) as excinfo:
        summarize(_SAMPLE, gw)
    assert "JSON" in excinfo.value.raw_text or excinfo.value.raw_text


def test_normalize_algorithm_vocabulary():
    assert normalize_algorithm("RSA OAEP") == "rsa-oaep"
    assert normalize_algorithm("AES_ECB") == "aes-ecb"
    assert normalize_algorithm("ecdsa") == "ecdsa-p256"
    assert normalize_algorithm("aes-gcm") == "aes-gcm"
    # unknowns preserved raw
    assert normalize_algorithm("Custom-Lattice-Thing") == "Custom-Lattice-Thing"


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------


def test_route_compliance_when_spec_matches():
    summary = SemanticSummary(text="t", extracted_algorithms=("rsa-oaep",))
    route = identify_route(summary, SPECS)
    assert route.kind == "compliance"
    assert route.algorithm_id == "rsa-oaep"


def test_route_cot_only_for_unknown_algorithm():
    summary = SemanticSummary(text="t", extracted_algorithms=("custom-lattice-thing",))
    assert identify_route(summary, SPECS).kind == "cot_only"


def test_route_cot_only_for_empty_extraction():
    assert identify_route(SemanticSummary(text="t"), SPECS).kind == "cot_only"


# ---------------------------------------------------------------------------
# compliance
# ---------------------------------------------------------------------------


def _verdicts_for(spec_id: str, default: str, overrides: dict[str, str] = {}):
    return [
        {
            "check_id": item.check_id,
            "status": overrides.get(item.check_id, default),
            "evidence": f"inspected {item.check_id}",
        }
        for item in SPECS[spec_id].checklist
    ]


def test_compliance_flags_padding_violation():
    verdicts = _verdicts_for("rsa-oaep", "pass", {"padding-scheme": "violation"})
    gw = scripted_gateway(("compliance", _json_reply({"verdicts": verdicts})))
    findings = verify_compliance(_SAMPLE, SPECS["rsa-oaep"], gw)
    by_id = {v.check_id: v for v in findings.verdicts}
    assert by_id["padding-scheme"].status is CheckStatus.VIOLATION
    assert len(findings.verdicts) == len(SPECS["rsa-oaep"].checklist)


def test_compliance_all_pass():
    verdicts = _verdicts_for("aes-gcm", "pass")
    gw = scripted_gateway(("compliance", _json_reply({"verdicts": verdicts})))
    findings = verify_compliance(_SAMPLE, SPECS["aes-gcm"], gw)
    assert all(v.status is CheckStatus.PASS for v in findings.verdicts)


def test_compliance_incomplete_answers_are_rejected():
    verdicts = _verdicts_for("rsa-oaep", "pass")[:-1]
    gw = scripted_gateway(("compliance", _json_reply({"verdicts": verdicts})))
    with pytest.raises(StructuredOutputError, match="cover the checklist"):
        verify_compliance(_SAMPLE, SPECS["rsa-oaep"], gw)


def test_compliance_duplicate_answer_rejected():
    verdicts = _verdicts_for("rsa-oaep", "pass")
    verdicts.append(verdicts[0])
    gw = scripted_gateway(("compliance", _json_reply({"verdicts": verdicts})))
    with pytest.raises(StructuredOutputError, match="more than once"):
        verify_compliance(_SAMPLE, SPECS["rsa-oaep"], gw)


# ---------------------------------------------------------------------------
# CoT reasoning
# ---------------------------------------------------------------------------


def test_cot_finds_deterministic_mode_flaw():
    reply = _json_reply(
        {
            "steps": ["ECB encrypts blocks independently", "no IV is used"],
            "candidate_flaws": [
                {
                    "label": "deterministic block cipher mode",
                    "confidence": "high",
                    "evidence": "createCipheriv('aes-128-ecb', key, null)",
                }
            ],
        }
    )
    trace = cot_reason(_SAMPLE, FEW_SHOT, scripted_gateway(("cot_reason", reply)))
    assert trace.candidate_flaws[0].label == "deterministic block cipher mode"
    assert trace.candidate_flaws[0].confidence is Confidence.HIGH


def test_cot_finds_modulo_bias():
    reply = _json_reply(
        {
            "steps": ["token chars map bytes with %"],
            "candidate_flaws": [
                {
                    "label": "modulo bias in random string generation",
                    "confidence": "medium",
                    "evidence": "bytes[i] % ALPHABET.length",
                }
            ],
        }
    )
    trace = cot_reason(_SAMPLE, FEW_SHOT, scripted_gateway(("cot_reason", reply)))
    assert "modulo bias" in trace.candidate_flaws[0].label


def test_cot_benign_sample_has_steps_but_no_flaws():
    reply = _json_reply({"steps": ["keys from CSPRNG", "unique nonce"], "candidate_flaws": []})
    trace = cot_reason(_SAMPLE, FEW_SHOT, scripted_gateway(("cot_reason", reply)))
    assert trace.candidate_flaws == ()
    assert len(trace.steps) == 2


def test_cot_requires_few_shot_examples():
    with pytest.raises(ValueError):
        cot_reason(_SAMPLE, (), scripted_gateway(("cot_reason", "x")))


def test_cot_empty_steps_rejected():
    gw = scripted_gateway(("cot_reason", _json_reply({"steps": [], "candidate_flaws": []})))
    with pytest.raises(StructuredOutputError):
        cot_reason(_SAMPLE, FEW_SHOT, gw)


# ---------------------------------------------------------------------------
# curve extraction
# ---------------------------------------------------------------------------


def test_extract_curve_literal_parameters():
    reply = _json_reply({"curve": {"p": 5, "a": 1, "b": 1, "claimed_order": None}})
    params = extract_curve_params(_SAMPLE, scripted_gateway(("curve_extract", reply)))
    assert (params.p, params.a, params.b) == (5, 1, 1)


def test_extract_curve_none_when_absent():
    reply = _json_reply({"curve": None})
    assert extract_curve_params(_SAMPLE, scripted_gateway(("curve_extract", reply))) is None


def test_extract_curve_rejects_composite_modulus():
    reply = _json_reply({"curve": {"p": 15, "a": 1, "b": 1}})
    with pytest.raises(CurveExtractionError, match="p=15"):
        extract_curve_params(_SAMPLE, scripted_gateway(("curve_extract", reply)))


def test_extract_curve_reduces_coefficients():
    reply = _json_reply({"curve": {"p": 5, "a": -3, "b": 11}})
    params = extract_curve_params(_SAMPLE, scripted_gateway(("curve_extract", reply)))
    assert (params.a, params.b) == (2, 1)


# ---------------------------------------------------------------------------
# full pre-detection and the retrieval signals
# ---------------------------------------------------------------------------


def _full_gateway(algorithms, compliance_spec=None, curve=None):
    records = [
        (
            "summarize",
            _json_reply({"summary": "summary text here", "algorithms": algorithms}),
        ),
        (
            "cot_reason",
            _json_reply(
                {
                    "steps": ["step one", "step two"],
                    "candidate_flaws": [
                        {"label": "weak kdf", "confidence": "high", "evidence": "1000 rounds"}
                    ],
                }
            ),
        ),
        ("curve_extract", _json_reply({"curve": curve})),
    ]
    if compliance_spec is not None:
        records.append(
            ("compliance", _json_reply({"verdicts": _verdicts_for(compliance_spec, "pass")}))
        )
    return scripted_gateway(*records)


def test_run_predetection_compliance_route():
    gw = _full_gateway(["pbkdf2"], compliance_spec="pbkdf2")
    bundle = run_predetection(_SAMPLE, SPECS, FEW_SHOT, gw)
    assert bundle.compliance is not None
    assert bundle.compliance.algorithm_id == "pbkdf2"
    assert bundle.curve is None
    signal = semantic_signal(bundle)
    assert signal.startswith("summary text here")
    assert "pbkdf2" in signal  # compliance findings join the semantic signal


def test_run_predetection_cot_only_route():
    gw = _full_gateway(["custom-thing"])
    bundle = run_predetection(_SAMPLE, SPECS, FEW_SHOT, gw)
    assert bundle.compliance is None
    assert semantic_signal(bundle) == "summary text here"
    signal = reasoning_signal(bundle)
    assert signal.splitlines()[0] == "1. step one"
    assert "candidate flaw [high]: weak kdf" in signal


def test_run_predetection_with_curve():
    gw = _full_gateway(["custom-thing"], curve={"p": 5, "a": 0, "b": 3})
    bundle = run_predetection(_SAMPLE, SPECS, FEW_SHOT, gw)
    assert bundle.curve is not None
    assert bundle.curve.executor is CurveExecutorKind.LOCAL_BRUTEFORCE
    # y^2 = x^3 + 3 over F_5 is non-singular; flags depend on its order
    assert CurveFlag.SINGULAR not in bundle.curve.flags


def test_run_predetection_rejected_curve_extraction_is_recorded():
    gw = _full_gateway(["custom-thing"], curve={"p": 21, "a": 0, "b": 3})
    bundle = run_predetection(_SAMPLE, SPECS, FEW_SHOT, gw)
    assert bundle.curve_params is None
    assert bundle.curve is not None
    assert bundle.curve.executor is CurveExecutorKind.SKIPPED
    assert "rejected" in bundle.curve.evidence


def test_bundled_specs_cover_known_flaw_classes():
    # at least six machine-readable checklists ship with the package
    assert len(SPECS) >= 6
    assert {"rsa-oaep", "ecdsa-p256", "pbkdf2", "secure-random", "aes-gcm"} <= set(SPECS)
    for spec in SPECS.values():
        assert spec.checklist
        assert spec.source
