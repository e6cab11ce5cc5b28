"""Pre-detection analysis for one code sample.

Four steps feed the later phases: a semantic summary, a standards
compliance check when the summary identifies an algorithm we have a
reference checklist for, few-shot chain-of-thought reasoning, and an
elliptic-curve parameter assessment. Compliance never replaces reasoning;
both run whenever a checklist matches.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import sympy

from . import prompts
from .curves import (
    CurveAssessment,
    CurveExecutorConfig,
    CurveExecutorKind,
    CurveParams,
    assess_curve,
)
from .errors import CurveExtractionError, StructuredOutputError
from .gateway import CotPrompt, Gateway, parse_json_block, render_cot_prompt


@dataclass(frozen=True)
class CodeSample:
    id: str
    source_text: str
    language_hint: str | None = None
    origin: str = ""

    def __post_init__(self) -> None:
        if not self.source_text:
            raise ValueError(f"sample {self.id!r} has empty source_text")


@dataclass(frozen=True)
class SemanticSummary:
    text: str
    extracted_algorithms: tuple[str, ...] = ()
    parameters: tuple[tuple[str, str, str], ...] = ()  # (name, value-or-size, role)


@dataclass(frozen=True)
class ChecklistItem:
    check_id: str
    requirement: str
    severity: str


@dataclass(frozen=True)
class AlgorithmSpec:
    algorithm_id: str
    checklist: tuple[ChecklistItem, ...]
    source: str

    def __post_init__(self) -> None:
        if not self.checklist:
            raise ValueError(f"spec {self.algorithm_id!r} has an empty checklist")
        ids = [item.check_id for item in self.checklist]
        if len(set(ids)) != len(ids):
            raise ValueError(f"spec {self.algorithm_id!r} has duplicate check ids")


class CheckStatus(str, Enum):
    PASS = "pass"
    VIOLATION = "violation"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class CheckVerdict:
    check_id: str
    status: CheckStatus
    evidence: str


@dataclass(frozen=True)
class ComplianceFindings:
    algorithm_id: str
    verdicts: tuple[CheckVerdict, ...]


class Confidence(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class FlawCandidate:
    label: str
    confidence: Confidence
    evidence: str


@dataclass(frozen=True)
class ReasoningTrace:
    steps: tuple[str, ...]
    candidate_flaws: tuple[FlawCandidate, ...] = ()


@dataclass(frozen=True)
class FewShotExample:
    title: str
    code: str
    walkthrough: str


@dataclass(frozen=True)
class Route:
    kind: str  # "compliance" or "cot_only"
    algorithm_id: str | None = None


@dataclass(frozen=True)
class PreDetectionBundle:
    sample_id: str
    summary: SemanticSummary
    trace: ReasoningTrace
    compliance: ComplianceFindings | None = None
    curve_params: CurveParams | None = None
    curve: CurveAssessment | None = None


# --------------------------------------------------------------------------
# algorithm vocabulary and spec loading
# --------------------------------------------------------------------------

_ALGORITHM_ALIASES = {
    "rsa oaep": "rsa-oaep",
    "rsaes-oaep": "rsa-oaep",
    "oaep": "rsa-oaep",
    "rsa pkcs1": "rsa-pkcs1v15",
    "rsa-pkcs1-v1.5": "rsa-pkcs1v15",
    "textbook rsa": "rsa-textbook",
    "raw rsa": "rsa-textbook",
    "ecdsa": "ecdsa-p256",
    "ecdsa p-256": "ecdsa-p256",
    "ecdsa-secp256r1": "ecdsa-p256",
    "aes gcm": "aes-gcm",
    "aes-256-gcm": "aes-gcm",
    "aes-128-gcm": "aes-gcm",
    "aes cbc": "aes-cbc",
    "aes-256-cbc": "aes-cbc",
    "aes-128-cbc": "aes-cbc",
    "aes ecb": "aes-ecb",
    "aes-128-ecb": "aes-ecb",
    "aes-256-ecb": "aes-ecb",
    "pbkdf2-hmac-sha256": "pbkdf2",
    "pbkdf2-sha256": "pbkdf2",
    "pbkdf2 hmac": "pbkdf2",
    "diffie-hellman": "dh-keyexchange",
    "dh": "dh-keyexchange",
    "random token generation": "secure-random",
    "csprng": "secure-random",
}


def normalize_algorithm(name: str) -> str:
    """Map a model-reported algorithm name onto the bundled vocabulary.

    Unknown names are preserved as given so downstream output stays honest.
    """
    slug = re.sub(r"[\s_]+", "-", name.strip().lower())
    spaced = slug.replace("-", " ")
    if slug in _ALGORITHM_ALIASES:
        return _ALGORITHM_ALIASES[slug]
    if spaced in _ALGORITHM_ALIASES:
        return _ALGORITHM_ALIASES[spaced]
    if slug in set(_ALGORITHM_ALIASES.values()):
        return slug
    return name


def load_algorithm_specs(spec_dir: str | Path) -> dict[str, AlgorithmSpec]:
    """Load every reference checklist (one JSON document per algorithm)."""
    spec_dir = Path(spec_dir)
    specs: dict[str, AlgorithmSpec] = {}
    for path in sorted(spec_dir.glob("*.json")):
        raw = json.loads(path.read_text(encoding="utf-8"))
        spec = AlgorithmSpec(
            algorithm_id=raw["algorithm_id"],
            checklist=tuple(
                ChecklistItem(
                    check_id=item["check_id"],
                    requirement=item["requirement"],
                    severity=item["severity"],
                )
                for item in raw["checklist"]
            ),
            source=raw.get("source", ""),
        )
        specs[spec.algorithm_id] = spec
    return specs


def load_few_shot_examples(directory: str | Path) -> tuple[FewShotExample, ...]:
    examples = []
    for path in sorted(Path(directory).glob("*.json")):
        raw = json.loads(path.read_text(encoding="utf-8"))
        examples.append(
            FewShotExample(
                title=raw["title"], code=raw["code"], walkthrough=raw["walkthrough"]
            )
        )
    return tuple(examples)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def summarize(sample: CodeSample, gateway: Gateway) -> SemanticSummary:
    reply = gateway.ask(prompts.TEMPLATE_SUMMARIZE, prompts.render_summary_prompt(sample))
    obj = parse_json_block(reply)
    text = obj.get("summary")
    if not isinstance(text, str) or not text.strip():
        raise StructuredOutputError("summary reply has no 'summary' text", raw_text=reply)
    algorithms = obj.get("algorithms", [])
    parameters = obj.get("parameters", [])
    if not isinstance(algorithms, list) or not isinstance(parameters, list):
        raise StructuredOutputError("summary reply fields have wrong types", raw_text=reply)
    return SemanticSummary(
        text=text,
        extracted_algorithms=tuple(normalize_algorithm(str(a)) for a in algorithms),
        parameters=tuple(
            (str(p.get("name", "")), str(p.get("value", "")), str(p.get("role", "")))
            for p in parameters
            if isinstance(p, dict)
        ),
    )


def identify_route(summary: SemanticSummary, specs: Mapping[str, AlgorithmSpec]) -> Route:
    """Compliance route when any extracted algorithm has a bundled checklist."""
    for algorithm in summary.extracted_algorithms:
        if algorithm in specs:
            return Route(kind="compliance", algorithm_id=algorithm)
    return Route(kind="cot_only")


def verify_compliance(
    sample: CodeSample, spec: AlgorithmSpec, gateway: Gateway
) -> ComplianceFindings:
    reply = gateway.ask(
        prompts.TEMPLATE_COMPLIANCE, prompts.render_compliance_prompt(sample, spec)
    )
    obj = parse_json_block(reply)
    raw_verdicts = obj.get("verdicts")
    if not isinstance(raw_verdicts, list):
        raise StructuredOutputError("compliance reply has no 'verdicts' list", raw_text=reply)

    by_id: dict[str, CheckVerdict] = {}
    for raw in raw_verdicts:
        if not isinstance(raw, dict):
            raise StructuredOutputError("verdict entry is not an object", raw_text=reply)
        check_id = str(raw.get("check_id", ""))
        if check_id in by_id:
            raise StructuredOutputError(
                f"check {check_id!r} answered more than once", raw_text=reply
            )
        try:
            status = CheckStatus(str(raw.get("status", "")))
        except ValueError:
            raise StructuredOutputError(
                f"check {check_id!r} has invalid status {raw.get('status')!r}", raw_text=reply
            ) from None
        by_id[check_id] = CheckVerdict(
            check_id=check_id, status=status, evidence=str(raw.get("evidence", ""))
        )

    expected = {item.check_id for item in spec.checklist}
    answered = set(by_id)
    if answered != expected:
        missing = sorted(expected - answered)
        surplus = sorted(answered - expected)
        raise StructuredOutputError(
            f"compliance verdicts must cover the checklist exactly "
            f"(missing={missing}, unknown={surplus})",
            raw_text=reply,
        )
    # keep checklist order
    verdicts = tuple(by_id[item.check_id] for item in spec.checklist)
    return ComplianceFindings(algorithm_id=spec.algorithm_id, verdicts=verdicts)


def cot_reason(
    sample: CodeSample, few_shot_examples: Sequence[FewShotExample], gateway: Gateway
) -> ReasoningTrace:
    if not few_shot_examples:
        raise ValueError("cot_reason requires at least one few-shot example")
    example_text = "\n\n".join(
        f"### {ex.title}\n```\n{ex.code.rstrip()}\n```\nWalkthrough: {ex.walkthrough}"
        for ex in few_shot_examples
    )
    prompt = render_cot_prompt(
        CotPrompt(
            instruction=prompts.COT_INSTRUCTION,
            example=example_text,
            notice=prompts.COT_NOTICE,
            target_code=sample.source_text,
        )
    )
    reply = gateway.ask(prompts.TEMPLATE_COT_REASON, prompt)
    obj = parse_json_block(reply)
    steps = obj.get("steps")
    if not isinstance(steps, list) or not steps:
        raise StructuredOutputError("reasoning reply has no non-empty 'steps'", raw_text=reply)
    raw_flaws = obj.get("candidate_flaws", [])
    if not isinstance(raw_flaws, list):
        raise StructuredOutputError("'candidate_flaws' is not a list", raw_text=reply)
    flaws = []
    for raw in raw_flaws:
        if not isinstance(raw, dict):
            raise StructuredOutputError("flaw entry is not an object", raw_text=reply)
        try:
            confidence = Confidence(str(raw.get("confidence", "")))
        except ValueError:
            raise StructuredOutputError(
                f"invalid confidence {raw.get('confidence')!r}", raw_text=reply
            ) from None
        flaws.append(
            FlawCandidate(
                label=str(raw.get("label", "")),
                confidence=confidence,
                evidence=str(raw.get("evidence", "")),
            )
        )
    return ReasoningTrace(steps=tuple(str(s) for s in steps), candidate_flaws=tuple(flaws))


def extract_curve_params(sample: CodeSample, gateway: Gateway) -> CurveParams | None:
    reply = gateway.ask(
        prompts.TEMPLATE_CURVE_EXTRACT, prompts.render_curve_extract_prompt(sample)
    )
    obj = parse_json_block(reply)
    if "curve" not in obj:
        raise StructuredOutputError("curve reply has no 'curve' field", raw_text=reply)
    raw = obj["curve"]
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise StructuredOutputError("'curve' must be an object or null", raw_text=reply)
    try:
        p = int(raw["p"])
        a = int(raw["a"]) % p if p > 0 else int(raw["a"])
        b = int(raw["b"]) % p if p > 0 else int(raw["b"])
        claimed = raw.get("claimed_order")
        claimed_order = None if claimed is None else int(claimed)
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuredOutputError(f"bad curve parameters: {exc}", raw_text=reply) from exc
    # Never trust the model's arithmetic: primality is re-checked locally.
    if p < 3 or not sympy.isprime(p):
        raise CurveExtractionError(
            f"model-reported modulus p={p} failed the local primality check; extraction rejected"
        )
    return CurveParams(p=p, a=a, b=b, claimed_order=claimed_order)


def run_predetection(
    sample: CodeSample,
    specs: Mapping[str, AlgorithmSpec],
    few_shot_examples: Sequence[FewShotExample],
    gateway: Gateway,
    curve_cfg: CurveExecutorConfig = CurveExecutorConfig(),
) -> PreDetectionBundle:
    """Run the full pre-detection phase for one sample."""
    summary = summarize(sample, gateway)
    route = identify_route(summary, specs)
    compliance = None
    if route.kind == "compliance":
        compliance = verify_compliance(sample, specs[route.algorithm_id], gateway)
    trace = cot_reason(sample, few_shot_examples, gateway)

    curve_params: CurveParams | None = None
    curve: CurveAssessment | None = None
    try:
        curve_params = extract_curve_params(sample, gateway)
    except CurveExtractionError as exc:
        curve = CurveAssessment(
            order=None,
            flags=frozenset(),
            evidence=str(exc),
            executor=CurveExecutorKind.SKIPPED,
        )
    if curve_params is not None:
        curve = assess_curve(curve_params, curve_cfg)

    return PreDetectionBundle(
        sample_id=sample.id,
        summary=summary,
        trace=trace,
        compliance=compliance,
        curve_params=curve_params,
        curve=curve,
    )


# --------------------------------------------------------------------------
# retrieval signals
# --------------------------------------------------------------------------


def render_compliance_text(findings: ComplianceFindings) -> str:
    lines = [f"Compliance check against {findings.algorithm_id}:"]
    for verdict in findings.verdicts:
        lines.append(f"- {verdict.check_id}: {verdict.status.value} ({verdict.evidence})")
    return "\n".join(lines)


def semantic_signal(bundle: PreDetectionBundle) -> str:
    """Retrieval signal 1: the summary, with compliance findings appended."""
    parts = [bundle.summary.text]
    if bundle.compliance is not None:
        parts.append(render_compliance_text(bundle.compliance))
    return "\n\n".join(parts)


def reasoning_signal(bundle: PreDetectionBundle) -> str:
    """Retrieval signal 2: the intermediate reasoning, rendered as text."""
    lines = [f"{i}. {step}" for i, step in enumerate(bundle.trace.steps, start=1)]
    for flaw in bundle.trace.candidate_flaws:
        lines.append(f"candidate flaw [{flaw.confidence.value}]: {flaw.label} ({flaw.evidence})")
    return "\n".join(lines)
