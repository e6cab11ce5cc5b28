"""Prompt templates and template ids used across the pipeline.

Every prompt that expects a machine reply mandates a single fenced JSON
block; parsing is handled by gateway.parse_json_block.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .predetection import AlgorithmSpec, CodeSample

TEMPLATE_KB_EXTRACT = "kb_extract"
TEMPLATE_SUMMARIZE = "summarize"
TEMPLATE_COMPLIANCE = "compliance"
TEMPLATE_COT_REASON = "cot_reason"
TEMPLATE_CURVE_EXTRACT = "curve_extract"
TEMPLATE_DETECT = "detect"
TEMPLATE_DETECT_REFORMAT = "detect_reformat"
TEMPLATE_JUDGE_SEMANTIC = "judge_semantic_match"
TEMPLATE_JUDGE_COVERAGE = "judge_coverage"
TEMPLATE_JUDGE_CREDIBILITY = "judge_credibility"


def _code_fence(text: str) -> str:
    return f"```\n{text.rstrip()}\n```"


# --------------------------------------------------------------------------
# knowledge extraction (optional model-assisted ingestion of writeups)
# --------------------------------------------------------------------------

KB_EXTRACT_PROMPT = """\
Extract self-contained cryptographic knowledge units from the writeup below.
Each unit must teach one reusable fact, attack pattern, or defensive check,
phrased so it stands alone without the original challenge context. Skip
narrative filler, scoreboard talk, and tooling trivia.

Reply with one fenced JSON block:
```json
{{"units": [{{"title": "<short name>", "text": "<the knowledge unit>"}}]}}
```

Writeup (source: {origin}):
{body}
"""

# --------------------------------------------------------------------------
# semantic summary
# --------------------------------------------------------------------------

SUMMARY_INSTRUCTION = """\
You are auditing source code for cryptographic logic flaws. Summarize the
code below with emphasis on its cryptographic logic: which primitives and
protocols it implements, the sizes and roles of every parameter (keys,
moduli, nonces, salts, iteration counts, signature components such as r and
s), and any algebraic structure it relies on (groups, fields, curves,
rings). Do not judge security yet; describe what the code does."""

SUMMARY_NOTICE = """\
Reply with one fenced JSON block and nothing else inside the fence:
```json
{
  "summary": "<prose summary of the cryptographic logic>",
  "algorithms": ["<algorithm identifier>", ...],
  "parameters": [{"name": "...", "value": "<value or size>", "role": "..."}, ...]
}
```
Use lowercase dash-separated algorithm identifiers (for example rsa-oaep,
ecdsa-p256, aes-gcm, pbkdf2). List an empty algorithms array if the code
contains no cryptography."""


def render_summary_prompt(sample: CodeSample) -> str:
    return (
        f"{SUMMARY_INSTRUCTION}\n\n"
        f"{SUMMARY_NOTICE}\n\n"
        f"Code (id: {sample.id}):\n{_code_fence(sample.source_text)}\n"
    )


# --------------------------------------------------------------------------
# standards compliance verification
# --------------------------------------------------------------------------

COMPLIANCE_INSTRUCTION = """\
Check the code below against the reference checklist for {algorithm_id}.
Work the way a manual audit would: trace parameter generation, key handling,
and the encryption/decryption or sign/verify flow, then decide each
checklist item strictly from evidence in the code. If the code neither
satisfies nor violates an item, answer indeterminate."""

COMPLIANCE_NOTICE = """\
Answer every check exactly once. Reply with one fenced JSON block:
```json
{
  "verdicts": [
    {"check_id": "...", "status": "pass|violation|indeterminate", "evidence": "<code evidence>"}
  ]
}
```"""


def render_compliance_prompt(sample: CodeSample, spec: AlgorithmSpec) -> str:
    checklist = "\n".join(
        f"- {item.check_id} [{item.severity}]: {item.requirement}" for item in spec.checklist
    )
    return (
        f"{COMPLIANCE_INSTRUCTION.format(algorithm_id=spec.algorithm_id)}\n\n"
        f"Checklist (source: {spec.source}):\n{checklist}\n\n"
        f"{COMPLIANCE_NOTICE}\n\n"
        f"Code (id: {sample.id}):\n{_code_fence(sample.source_text)}\n"
    )


# --------------------------------------------------------------------------
# few-shot CoT reasoning (Instruction / Example / Notice scaffold)
# --------------------------------------------------------------------------

COT_INSTRUCTION = """\
You are a cryptography auditor reasoning step by step about logic flaws, not
mere API misuse. Break each security goal into concrete checks and walk the
code against them:
1. Confidentiality: key and nonce generation, mode of operation, padding,
   randomness sources and any bias in how random values are mapped.
2. Integrity: authentication tags, MAC usage and ordering, signature
   construction and every range or validity check on signature components.
3. Authentication and parameters: input validation on attacker-controlled
   values, parameter sizes, group and curve properties, iteration counts.
Pay particular attention to typical trouble spots: missing input validation,
misused primitives, and error paths that skip checks. Reason explicitly;
every suspicion must name the line or expression that triggered it."""

COT_NOTICE = """\
After reasoning, reply with one fenced JSON block:
```json
{
  "steps": ["<reasoning step>", ...],
  "candidate_flaws": [
    {"label": "<short flaw label>", "confidence": "low|medium|high", "evidence": "<line or expression>"}
  ]
}
```
List candidate_flaws as an empty array when the walkthrough surfaces no
suspicion. Steps must never be empty."""


# --------------------------------------------------------------------------
# curve parameter extraction
# --------------------------------------------------------------------------

CURVE_EXTRACT_INSTRUCTION = """\
Inspect the code below for an explicit elliptic curve definition over a
prime field: a modulus p and Weierstrass coefficients a and b for
y^2 = x^3 + a*x + b (mod p). Only report parameters that literally appear in
or are directly computed by the code; never guess standard curves from
names alone. Report coefficients reduced into [0, p)."""

CURVE_EXTRACT_NOTICE = """\
Reply with one fenced JSON block. If no curve is defined:
```json
{"curve": null}
```
Otherwise:
```json
{"curve": {"p": <int>, "a": <int>, "b": <int>, "claimed_order": <int or null>}}
```"""


def render_curve_extract_prompt(sample: CodeSample) -> str:
    return (
        f"{CURVE_EXTRACT_INSTRUCTION}\n\n"
        f"{CURVE_EXTRACT_NOTICE}\n\n"
        f"Code (id: {sample.id}):\n{_code_fence(sample.source_text)}\n"
    )


# --------------------------------------------------------------------------
# final detection
# --------------------------------------------------------------------------

DETECT_INSTRUCTION = """\
You are completing a cryptographic logic audit. Below you have the target
code, a semantic summary, standards-compliance findings when available, the
reasoning trace from the preliminary analysis, and two numbered blocks of
retrieved cryptographic knowledge. Weigh the retrieved knowledge against
the preliminary findings: confirm, refute, or refine each suspicion, and
report only defects you can tie to specific code."""

DETECT_CATEGORIES = (
    "signature-verification",
    "padding",
    "block-cipher-mode",
    "randomness-bias",
    "key-derivation",
    "parameter-generation",
    "curve-weakness",
    "key-management",
    "other",
)

DETECT_NOTICE = """\
Reply with one fenced JSON block:
```json
{
  "findings": [
    {
      "title": "<one-line defect title>",
      "category": "<one of: %s>",
      "severity": "critical|high|medium|low|info",
      "evidence": "<the code that is wrong and why>",
      "remediation": "<concrete fix>",
      "citations": ["<chunk id from a retrieved block>", ...]
    }
  ]
}
```
Cite only chunk ids that appear in the retrieved blocks; use an empty
citations array otherwise. An empty findings array means the code is clean.""" % ", ".join(
    DETECT_CATEGORIES
)

DETECT_REFORMAT_PROMPT = """\
Your previous reply could not be parsed. Reproduce your findings as exactly
one fenced JSON block matching this schema, with no other fenced blocks:
```json
{"findings": [{"title": "...", "category": "...", "severity": "critical|high|medium|low|info", "evidence": "...", "remediation": "...", "citations": ["..."]}]}
```

Previous reply:
%s"""


# --------------------------------------------------------------------------
# judge prompts
# --------------------------------------------------------------------------

JUDGE_SEMANTIC_PROMPT = """\
You are judging whether a generated vulnerability analysis says the same
thing as a reference analysis. Score semantic alignment between 0 and 1:
1 means the generated analysis identifies the same vulnerability with the
same root cause; 0 means it describes something unrelated or contradicts
the reference. Partial credit for partially matching root causes.

Reference analysis:
{reference}

Generated analysis:
{generated}

Reply with one fenced JSON block: ```json
{{"score": <number between 0 and 1>}}
```"""

JUDGE_COVERAGE_PROMPT = """\
You are judging how much of the reference analysis a generated analysis
covers with informative, relevant content. Treat the reference as a list of
distinct relevant points and score the fraction of those points the
generated analysis addresses, between 0 and 1. Irrelevant padding earns
nothing; repeating a point earns nothing extra.

Reference analysis:
{reference}

Generated analysis:
{generated}

Reply with one fenced JSON block: ```json
{{"score": <number between 0 and 1>}}
```"""

JUDGE_CREDIBILITY_PROMPT = """\
You are judging the quality of a generated vulnerability analysis against a
reference. Score three dimensions independently, each an integer from 0 to
100:
- relevance: does it talk about the actual code and the actual flaw?
- informativeness: does it give actionable detail (root cause, impact, fix)?
- logical_soundness: does the reasoning hold together without leaps or
  contradictions?

Reference analysis:
{reference}

Generated analysis:
{generated}

Reply with one fenced JSON block: ```json
{{"relevance": <0-100>, "informativeness": <0-100>, "logical_soundness": <0-100>}}
```"""
