#!/usr/bin/env python3
"""Regenerate every bundled mock/fixture artifact from the authored plans.

Produces, under src/cryptoaudit/assets/:
  fixtures/fixture_corpus.jsonl   30-chunk knowledge corpus
  mock_scripts/bundled_scan.jsonl scripted replies for `scan --mock`
  mock_scripts/bundled_eval.jsonl scripted judge replies for `eval --mock`
  benchmark/mini_cases.jsonl      5-case mini benchmark
  goldens/*.json                  machine reports from a real `scan --mock`

The scan mock script is keyed by exact prompt hashes, so it must be
regenerated whenever prompt templates, bundled samples, or algorithm
checklists change: run  python scripts/regen_bundled_artifacts.py
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from cryptoaudit import prompts  # noqa: E402
from cryptoaudit.cli import LANGUAGE_BY_EXTENSION, dispatch  # noqa: E402
from cryptoaudit.config import assets_path  # noqa: E402
from cryptoaudit.corpus import (  # noqa: E402
    RawDocument,
    SourceType,
    build_chunks,
    load_source_tree,
    save_corpus,
)
from cryptoaudit.detection import assemble_phase3_prompt  # noqa: E402
from cryptoaudit.embedding import MockEmbeddingProvider, build_index, save_index  # noqa: E402
from cryptoaudit.gateway import (  # noqa: E402
    ChatRequest,
    Gateway,
    MockRecord,
    RecordingBackend,
    save_mock_script,
)
from cryptoaudit.predetection import (  # noqa: E402
    CodeSample,
    load_algorithm_specs,
    load_few_shot_examples,
    reasoning_signal,
    run_predetection,
    semantic_signal,
)
from cryptoaudit.retrieval import RetrievalConfig, dual_retrieve  # noqa: E402

ASSETS = assets_path()
SPECS = load_algorithm_specs(ASSETS / "specs")
FEW_SHOT = load_few_shot_examples(ASSETS / "fewshot")

SEMANTIC_TOP = "@SEMANTIC_TOP@"  # placeholder for the top retrieved chunk id


def _json_block(obj) -> str:
    return "```json\n" + json.dumps(obj, indent=2) + "\n```"


def _verdicts(spec_id: str, overrides: dict[str, tuple[str, str]]):
    out = []
    for item in SPECS[spec_id].checklist:
        status, evidence = overrides.get(
            item.check_id, ("pass", f"no conflict with {item.check_id} found in the code")
        )
        out.append({"check_id": item.check_id, "status": status, "evidence": evidence})
    return out


@dataclass
class SamplePlan:
    summary: str
    algorithms: list[str]
    parameters: list[dict]
    cot_steps: list[str]
    cot_flaws: list[dict]
    compliance_spec: str | None = None
    compliance_overrides: dict = field(default_factory=dict)
    findings: list[dict] = field(default_factory=list)
    plant_semantic_chunk: bool = False
    expect_semantic_hits: int = 0


PLANS: dict[str, SamplePlan] = {
    "ecdsa_verify_no_range_check": SamplePlan(
        summary=(
            "ECDSA signature verification over the P-256 group. The code inverts s "
            "modulo the group order n, forms the scalars u1 = e*w and u2 = r*w, "
            "computes P = u1*G + u2*Q with a Shamir double multiplication, and accepts "
            "when P.x reduced mod n equals r. The signature components r and s are "
            "consumed exactly as supplied by the caller; no interval check against "
            "[1, n-1] appears anywhere before the modular inversion."
        ),
        algorithms=["ecdsa"],
        parameters=[
            {"name": "r", "value": "attacker-supplied bignum", "role": "signature component"},
            {"name": "s", "value": "attacker-supplied bignum", "role": "signature component"},
            {"name": "n", "value": "P-256 group order", "role": "modulus for scalar arithmetic"},
        ],
        compliance_spec="ecdsa-p256",
        compliance_overrides={
            "rs-range": (
                "violation",
                "bn_mod_inverse(&w, s, &CURVE_N) runs on the raw s and r feeds "
                "bn_cmp directly; nothing rejects r = 0, s = 0, or values >= n",
            ),
            "pubkey-validation": (
                "violation",
                "ec_shamir_trick consumes Q without an on-curve, infinity, or order check",
            ),
            "nonce-generation": ("indeterminate", "verification-only code; no signing nonce"),
            "hash-truncation": ("indeterminate", "digest e arrives pre-truncated from the caller"),
            "constant-time-scalar": ("indeterminate", "no private scalars are handled here"),
        },
        cot_steps=[
            "Authentication goal: verification must only accept signatures produced with the private key.",
            "r and s flow from the caller into bn_mod_inverse and bn_mod_mul with no range validation.",
            "If the bignum library maps inv(0) to 0, then s = 0 forces u1 = u2 = 0, P becomes degenerate, and the final comparison reduces to r == 0.",
            "Thus the all-zero signature (0, 0) verifies for every message and every public key.",
            "Q is also used without curve-membership validation, enabling invalid-curve inputs.",
        ],
        cot_flaws=[
            {"label": "missing r/s range check in signature verification",
             "confidence": "high",
             "evidence": "bn_mod_inverse(&w, s, &CURVE_N) before any bounds test on r or s"},
            {"label": "public key accepted without validation",
             "confidence": "medium",
             "evidence": "ec_shamir_trick(&P, &u1, &CURVE_G, &u2, Q) on the raw Q"},
        ],
        findings=[
            {
                "title": "Signature verification accepts out-of-range r and s",
                "category": "signature-verification",
                "severity": "critical",
                "evidence": "r and s are used directly (bn_mod_inverse on s, bn_cmp against r) with no [1, n-1] interval check, so the forged pair (0, 0) verifies when inv(0) degenerates to 0",
                "remediation": "reject any signature with r or s outside [1, n-1] before performing modular arithmetic",
                "citations": [SEMANTIC_TOP],
            },
            {
                "title": "Public key used without curve-membership validation",
                "category": "parameter-generation",
                "severity": "high",
                "evidence": "Q flows into ec_shamir_trick without on-curve, infinity, or order checks",
                "remediation": "validate Q: on curve, not infinity, order n, before verification arithmetic",
                "citations": [],
            },
        ],
        plant_semantic_chunk=True,
        expect_semantic_hits=1,
    ),
    "rsa_textbook_padding": SamplePlan(
        summary=(
            "RSA key generation and encryption implemented from first principles. "
            "Encryption converts the message bytes to an integer and computes m^e mod n "
            "directly, with no padding scheme of any kind; the applicable standard for "
            "RSA encryption here would be OAEP. Keys default to 1024-bit moduli whose "
            "primes come from Python's random.getrandbits, a Mersenne Twister."
        ),
        algorithms=["rsa-oaep"],
        parameters=[
            {"name": "n", "value": "1024 bits by default", "role": "modulus"},
            {"name": "e", "value": "65537", "role": "public exponent"},
            {"name": "m", "value": "raw message integer", "role": "plaintext, unpadded"},
        ],
        compliance_spec="rsa-oaep",
        compliance_overrides={
            "padding-scheme": (
                "violation",
                "encrypt() computes pow(m, e, n) on the raw message integer; there is no OAEP encoding step and no randomness per encryption",
            ),
            "modulus-size": ("violation", "generate_keypair defaults to bits=1024"),
            "prime-generation": (
                "violation",
                "_random_prime draws candidates from random.getrandbits (Mersenne Twister), not a CSPRNG",
            ),
            "public-exponent": ("pass", "e = 65537"),
            "decrypt-error-uniformity": ("indeterminate", "no padding check exists to leak"),
        },
        cot_steps=[
            "Confidentiality goal: identical plaintexts must not produce identical ciphertexts.",
            "encrypt() is deterministic: pow(m, e, n) with no padding, so equal messages encrypt equally and small messages with e = 65537 can fall to meet-in-the-middle or broadcast attacks.",
            "Textbook RSA is also malleable: c * r^e mod n decrypts to m * r.",
            "Key material derives from random.getrandbits, which is predictable from 624 outputs.",
        ],
        cot_flaws=[
            {"label": "unpadded (textbook) RSA encryption",
             "confidence": "high",
             "evidence": "return pow(m, e, n) in encrypt()"},
            {"label": "keys generated from a non-cryptographic PRNG",
             "confidence": "high",
             "evidence": "random.getrandbits(bits) in _random_prime"},
        ],
        findings=[
            {
                "title": "RSA encryption applies no padding",
                "category": "padding",
                "severity": "critical",
                "evidence": "encrypt() computes pow(m, e, n) directly on the message integer; ciphertexts are deterministic and malleable",
                "remediation": "use OAEP with a fresh random seed per encryption (RSAES-OAEP)",
                "citations": [SEMANTIC_TOP],
            },
            {
                "title": "Key primes drawn from a predictable PRNG",
                "category": "parameter-generation",
                "severity": "high",
                "evidence": "_random_prime uses random.getrandbits, reconstructible from observed outputs",
                "remediation": "generate primes from the OS CSPRNG (secrets / os.urandom)",
                "citations": [],
            },
            {
                "title": "1024-bit default modulus",
                "category": "parameter-generation",
                "severity": "medium",
                "evidence": "generate_keypair(bits=1024)",
                "remediation": "default to at least 2048-bit moduli",
                "citations": [],
            },
        ],
        plant_semantic_chunk=True,
        expect_semantic_hits=1,
    ),
    "aes_ecb_profile": SamplePlan(
        summary=(
            "Encrypts JSON user-profile records with AES-128-ECB under a key derived by "
            "a single unsalted MD5 hash of a hard-coded string constant. Every 16-byte "
            "block is encrypted independently: no IV, no nonce, no authentication tag."
        ),
        algorithms=["aes-ecb", "md5-key-derivation"],
        parameters=[
            {"name": "key", "value": "16 bytes = MD5(constant secret)", "role": "AES key"},
            {"name": "mode", "value": "aes-128-ecb", "role": "block cipher mode"},
        ],
        compliance_spec=None,
        cot_steps=[
            "Confidentiality goal: ciphertext must not reveal plaintext structure.",
            "createCipheriv('aes-128-ecb', key, null) encrypts each block independently, so equal profile fields produce equal ciphertext blocks across records.",
            "The key is MD5 of a string literal committed to the repository; one hash call is not a KDF and the secret is static for every deployment.",
            "No authentication exists, so ciphertext splicing attacks apply to stored profiles.",
        ],
        cot_flaws=[
            {"label": "deterministic block cipher mode",
             "confidence": "high",
             "evidence": "crypto.createCipheriv('aes-128-ecb', key, null)"},
            {"label": "key derived from hard-coded secret with a single MD5 hash",
             "confidence": "high",
             "evidence": "crypto.createHash('md5').update(SECRET).digest()"},
        ],
        findings=[
            {
                "title": "ECB mode leaks record structure",
                "category": "block-cipher-mode",
                "severity": "high",
                "evidence": "aes-128-ecb encrypts blocks independently; equal JSON fields yield equal ciphertext blocks and records can be spliced block-wise",
                "remediation": "switch to AES-GCM with a unique nonce per record and authenticate the whole blob",
                "citations": [SEMANTIC_TOP],
            },
            {
                "title": "Static key from hard-coded secret via single MD5",
                "category": "key-derivation",
                "severity": "high",
                "evidence": "deriveKey() = MD5('profile-service-secret'), constant across all deployments",
                "remediation": "generate random per-deployment keys and store them in a secret manager",
                "citations": [],
            },
        ],
        plant_semantic_chunk=True,
        expect_semantic_hits=1,
    ),
    "token_modulo_bias": SamplePlan(
        summary=(
            "Generates password-reset tokens by drawing bytes from the operating "
            "system CSPRNG and mapping each byte onto a 62-character alphabet with a "
            "modulo reduction, one character per byte."
        ),
        algorithms=["csprng"],
        parameters=[
            {"name": "alphabet", "value": "62 characters", "role": "token symbol set"},
            {"name": "length", "value": "32 characters default", "role": "token length"},
        ],
        compliance_spec="secure-random",
        compliance_overrides={
            "csprng-source": ("pass", "crypto.randomBytes is the platform CSPRNG"),
            "uniform-mapping": (
                "violation",
                "bytes[i] % ALPHABET.length with 256 mod 62 = 8: characters 0..7 of the alphabet appear with probability 5/256 instead of 4/256",
            ),
            "token-entropy": (
                "indeterminate",
                "nominal 32 * log2(62) bits, reduced by the mapping bias",
            ),
        },
        cot_steps=[
            "Confidentiality goal: reset tokens must be uniformly unpredictable.",
            "The byte source is fine (crypto.randomBytes), so the question is the mapping.",
            "256 is not a multiple of 62, so byte % 62 over-represents the first 256 mod 62 = 8 alphabet characters by 25 percent relative.",
            "A guessing attacker weights trials by the skew and gains a measurable advantage over the nominal entropy.",
        ],
        cot_flaws=[
            {"label": "modulo bias in random string generation",
             "confidence": "high",
             "evidence": "ALPHABET[bytes[i] % ALPHABET.length]"},
        ],
        findings=[
            {
                "title": "Modulo bias skews token characters",
                "category": "randomness-bias",
                "severity": "high",
                "evidence": "byte % 62 maps 256 values onto 62 symbols unevenly: the first 8 symbols are 25% more likely, cutting effective token entropy",
                "remediation": "use rejection sampling (discard bytes >= 248) or a bias-free ranged draw",
                "citations": [SEMANTIC_TOP],
            }
        ],
        plant_semantic_chunk=True,
        expect_semantic_hits=1,
    ),
    "pbkdf2_weak_iterations": SamplePlan(
        summary=(
            "Derives a 32-byte vault master key from a passphrase with "
            "PBKDF2-HMAC-SHA256 at 1000 iterations and a constant 13-byte string "
            "salt; passphrase verification compares freshly derived keys."
        ),
        algorithms=["pbkdf2-hmac-sha256"],
        parameters=[
            {"name": "iterations", "value": "1000", "role": "PBKDF2 work factor"},
            {"name": "salt", "value": "constant string 'vault-salt-v1'", "role": "KDF salt"},
            {"name": "dkLen", "value": "32 bytes", "role": "derived key length"},
        ],
        compliance_spec="pbkdf2",
        compliance_overrides={
            "iteration-count": ("violation", "const KdfRounds = 1000, orders of magnitude below the 600000 floor"),
            "salt-length": ("violation", "SaltText is a 13-byte compile-time constant"),
            "salt-uniqueness": ("violation", "the same salt is reused for every vault and every user"),
            "derived-length": ("pass", "32-byte output matches an AES-256 key"),
        },
        cot_steps=[
            "Confidentiality goal: the master key must resist offline passphrase guessing.",
            "1000 PBKDF2 iterations cost roughly a microsecond-scale GPU guess; a leaked vault falls to dictionary attack in hours.",
            "The constant salt lets an attacker precompute one rainbow table for all vaults.",
        ],
        cot_flaws=[
            {"label": "weak KDF iteration count",
             "confidence": "high",
             "evidence": "const KdfRounds = 1000"},
            {"label": "constant salt shared by all vaults",
             "confidence": "high",
             "evidence": "const SaltText = \"vault-salt-v1\""},
        ],
        findings=[
            {
                "title": "PBKDF2 iteration count far below current guidance",
                "category": "key-derivation",
                "severity": "high",
                "evidence": "KdfRounds = 1000; offline guessing of the vault passphrase is cheap",
                "remediation": "raise to >= 600000 iterations or move to a memory-hard KDF (Argon2id)",
                "citations": [],
            },
            {
                "title": "Constant salt reused across vaults",
                "category": "key-derivation",
                "severity": "medium",
                "evidence": "SaltText is a compile-time constant, enabling precomputation across users",
                "remediation": "generate a random 16-byte salt per vault and store it beside the ciphertext",
                "citations": [],
            },
        ],
        plant_semantic_chunk=False,
        expect_semantic_hits=0,
    ),
    "aes_gcm_envelope": SamplePlan(
        summary=(
            "Envelope encryption with AES-256-GCM: keys are 32 bytes from os.urandom, "
            "every message gets a fresh 12-byte nonce from os.urandom, and decryption "
            "verifies the GCM authentication tag over ciphertext and associated data "
            "before returning plaintext."
        ),
        algorithms=["aes-256-gcm"],
        parameters=[
            {"name": "key", "value": "32 bytes, os.urandom", "role": "AES-256 key"},
            {"name": "nonce", "value": "12 bytes, fresh per message", "role": "GCM nonce"},
            {"name": "tag", "value": "16 bytes, library-verified", "role": "authentication tag"},
        ],
        compliance_spec="aes-gcm",
        compliance_overrides={
            "nonce-uniqueness": ("pass", "os.urandom(12) per seal() call; random 96-bit nonces"),
            "tag-verification": ("pass", "AESGCM.decrypt verifies the tag before releasing plaintext"),
            "tag-length": ("pass", "library default 128-bit tag"),
            "key-source": ("pass", "os.urandom(32)"),
        },
        cot_steps=[
            "Confidentiality: AES-256-GCM with a fresh random 96-bit nonce per message; within birthday limits for any realistic message volume.",
            "Integrity: the AEAD tag covers ciphertext and associated data and is checked by the library before plaintext release.",
            "Input validation: short blobs are rejected before slicing the nonce.",
        ],
        cot_flaws=[],
        findings=[],
        plant_semantic_chunk=False,
        expect_semantic_hits=0,
    ),
}

# three extra single-chunk documents so the fixture corpus lands on 30 chunks
FILLER_ABSTRACTS = [
    "We study nonce-misuse resilience of deployed AEAD wrappers and find that "
    "random-nonce GCM deployments routinely ignore the 2^32 invocation bound when "
    "keys are long-lived; we give rotation schedules that keep collision probability "
    "below 2^-32 under measured traffic and a static check for nonce construction.",
    "A measurement of key derivation practices across open-source password managers: "
    "a third still ship PBKDF2 iteration counts chosen before 2015, and a tenth reuse "
    "global salts. We quantify cracking cost on current GPU clusters and propose "
    "storing the work factor next to the ciphertext so it can ratchet.",
    "We catalogue integer-range validation omissions in signature verifiers across "
    "nine libraries and show that absent interval checks on signature components are "
    "the dominant root cause of verification bypasses, ahead of hash confusion and "
    "encoding ambiguity; we ship grep-able patterns for auditors.",
]


def build_fixture_corpus(signal_docs: list[RawDocument]) -> list:
    docs = load_source_tree(ASSETS / "corpus_sources")
    docs.extend(signal_docs)
    chunks = build_chunks(docs)
    need = 30 - len(chunks)
    if need < 0:
        raise SystemExit(f"fixture corpus would exceed 30 chunks by {-need}")
    if need > len(FILLER_ABSTRACTS):
        raise SystemExit(f"not enough filler abstracts: need {need}")
    for i in range(need):
        docs.append(
            RawDocument(
                source_type=SourceType.RESEARCH_ABSTRACT,
                body=FILLER_ABSTRACTS[i],
                origin=f"filler/abstract_{i:02d}.txt",
            )
        )
    chunks = build_chunks(docs)
    assert len(chunks) == 30, f"fixture corpus has {len(chunks)} chunks, wanted 30"
    return chunks


def load_samples() -> list[CodeSample]:
    samples = []
    for path in sorted((ASSETS / "samples").iterdir()):
        samples.append(
            CodeSample(
                id=path.stem,
                source_text=path.read_text(encoding="utf-8"),
                language_hint=LANGUAGE_BY_EXTENSION.get(path.suffix),
                origin=str(path),
            )
        )
    return samples


def planned_reply(plan: SamplePlan, spec_id: str | None):
    """Map template ids onto this sample's scripted replies."""
    replies = {
        prompts.TEMPLATE_SUMMARIZE: _json_block(
            {"summary": plan.summary, "algorithms": plan.algorithms,
             "parameters": plan.parameters}
        ),
        prompts.TEMPLATE_COT_REASON: _json_block(
            {"steps": plan.cot_steps, "candidate_flaws": plan.cot_flaws}
        ),
        prompts.TEMPLATE_CURVE_EXTRACT: _json_block({"curve": None}),
    }
    if spec_id is not None:
        replies[prompts.TEMPLATE_COMPLIANCE] = _json_block(
            {"verdicts": _verdicts(spec_id, plan.compliance_overrides)}
        )
    def answer(req: ChatRequest) -> str:
        try:
            return replies[req.template_id]
        except KeyError:
            raise SystemExit(f"no planned reply for template {req.template_id!r}")
    return answer


def main() -> None:
    provider = MockEmbeddingProvider()
    samples = load_samples()
    assert set(PLANS) == {s.id for s in samples}, "plans and bundled samples diverged"

    records: list[MockRecord] = []
    bundles = {}

    # pre-detection first: signals do not depend on the index
    for sample in samples:
        plan = PLANS[sample.id]
        backend = RecordingBackend(planned_reply(plan, plan.compliance_spec))
        bundle = run_predetection(sample, SPECS, FEW_SHOT, Gateway(backend=backend))
        records.extend(backend.records)
        bundles[sample.id] = bundle
        routed = bundle.compliance.algorithm_id if bundle.compliance else None
        assert routed == plan.compliance_spec, (sample.id, routed, plan.compliance_spec)

    # fixture corpus: planted chunks carry the exact semantic signal text
    signal_docs = []
    for sample in samples:
        if PLANS[sample.id].plant_semantic_chunk:
            signal_docs.append(
                RawDocument(
                    source_type=SourceType.BLOG,
                    body=semantic_signal(bundles[sample.id]),
                    origin=f"patterns/{sample.id}.md",
                )
            )
    chunks = build_fixture_corpus(signal_docs)
    corpus_path = ASSETS / "fixtures" / "fixture_corpus.jsonl"
    save_corpus(chunks, corpus_path)
    print(f"wrote {corpus_path} ({len(chunks)} chunks)")

    from cryptoaudit.corpus import Corpus

    corpus = Corpus(chunks)
    index = build_index(corpus, provider)
    cfg = RetrievalConfig()

    # detection replies need the retrieved ids for their citations
    for sample in samples:
        plan = PLANS[sample.id]
        bundle = bundles[sample.id]
        blocks = dual_retrieve(
            index, corpus, semantic_signal(bundle), reasoning_signal(bundle),
            cfg, provider,
        )
        semantic_block, cot_block = blocks
        assert len(semantic_block.items) == plan.expect_semantic_hits, (
            sample.id, [ (i.chunk_id, round(i.cos_sim, 3)) for i in semantic_block.items ],
        )
        assert cot_block.items == (), (sample.id, "cot block expected empty")

        findings = []
        for finding in plan.findings:
            resolved = dict(finding)
            citations = []
            for cite in resolved["citations"]:
                if cite == SEMANTIC_TOP:
                    if semantic_block.items:
                        citations.append(semantic_block.items[0].chunk_id)
                else:
                    citations.append(cite)
            resolved["citations"] = citations
            findings.append(resolved)

        prompt = assemble_phase3_prompt(sample, bundle, blocks)
        backend = RecordingBackend(lambda req: _json_block({"findings": findings}))
        Gateway(backend=backend).ask(prompts.TEMPLATE_DETECT, prompt)
        records.extend(backend.records)

    scan_script = ASSETS / "mock_scripts" / "bundled_scan.jsonl"
    save_mock_script(records, scan_script)
    print(f"wrote {scan_script} ({len(records)} records)")

    # run the real CLI twice and freeze the machine reports as goldens
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        index_path = tmp / "index.bin"
        save_index(index, index_path)
        outs = []
        for run in (1, 2):
            out = tmp / f"run{run}"
            rc = dispatch([
                "scan", "--input", str(ASSETS / "samples"),
                "--index", str(index_path), "--corpus", str(corpus_path),
                "--out", str(out), "--format", "machine",
                "--mock", str(scan_script),
            ])
            assert rc == 1, f"scan expected exit 1 (vulnerable findings), got {rc}"
            outs.append(out)
        reports1 = sorted(outs[0].glob("*.json"))
        reports2 = sorted(outs[1].glob("*.json"))
        assert [p.name for p in reports1] == [p.name for p in reports2]
        for p1, p2 in zip(reports1, reports2):
            assert p1.read_bytes() == p2.read_bytes(), f"nondeterministic: {p1.name}"
        goldens = ASSETS / "goldens"
        shutil.rmtree(goldens, ignore_errors=True)
        goldens.mkdir(parents=True)
        for p in reports1:
            shutil.copy2(p, goldens / p.name)
        print(f"wrote {len(reports1)} goldens to {goldens}")
        for p in reports1:
            verdict = json.loads(p.read_text())["verdict"]
            print(f"  {p.stem}: {verdict}")

    # mini benchmark + scripted judge replies for the echo configuration
    references = {
        "ecdsa_verify_no_range_check": (
            "The verifier omits the mandatory range check on the signature components: "
            "r and s must be rejected outside [1, n-1] before any modular arithmetic. "
            "Because s is inverted blindly, the forged all-zero signature (0, 0) "
            "verifies for any message and key, a complete signature bypass."
        ),
        "rsa_textbook_padding": (
            "Encryption is textbook RSA: pow(m, e, n) with no OAEP padding, so "
            "ciphertexts are deterministic and malleable; additionally the primes come "
            "from a Mersenne Twister and the default modulus is 1024 bits."
        ),
        "aes_ecb_profile": (
            "Profiles are encrypted with AES-128-ECB under a key that is a single MD5 "
            "of a hard-coded secret. ECB leaks record structure through equal blocks "
            "and the static key is recoverable from the source."
        ),
        "token_modulo_bias": (
            "Reset tokens map CSPRNG bytes onto a 62-character alphabet with byte % 62, "
            "over-representing eight characters by 25 percent and reducing effective "
            "token entropy; rejection sampling is required."
        ),
        "pbkdf2_weak_iterations": (
            "The vault derives its master key with PBKDF2 at 1000 iterations and a "
            "constant salt, leaving passphrases open to cheap offline guessing with "
            "precomputation shared across all vaults."
        ),
    }
    judge_values = {
        "ecdsa_verify_no_range_check": (0.95, 0.9, (96, 92, 94)),
        "rsa_textbook_padding": (1.0, 0.85, (98, 90, 95)),
        "aes_ecb_profile": (0.9, 0.8, (94, 88, 91)),
        "token_modulo_bias": (1.0, 0.95, (97, 93, 96)),
        "pbkdf2_weak_iterations": (0.95, 0.9, (95, 91, 93)),
    }
    bench_path = ASSETS / "benchmark" / "mini_cases.jsonl"
    eval_records: list[MockRecord] = []
    with open(bench_path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            if sample.id not in references:
                continue
            reference = references[sample.id]
            fh.write(json.dumps({
                "id": sample.id,
                "code": sample.source_text,
                "language": sample.language_hint,
                "source": "synthetic",
                "reference_analysis": reference,
            }, ensure_ascii=False, sort_keys=True) + "\n")
            semantic, coverage, cred = judge_values[sample.id]
            pairs = [
                (prompts.TEMPLATE_JUDGE_SEMANTIC,
                 prompts.JUDGE_SEMANTIC_PROMPT.format(reference=reference, generated=reference),
                 {"score": semantic}),
                (prompts.TEMPLATE_JUDGE_COVERAGE,
                 prompts.JUDGE_COVERAGE_PROMPT.format(reference=reference, generated=reference),
                 {"score": coverage}),
                (prompts.TEMPLATE_JUDGE_CREDIBILITY,
                 prompts.JUDGE_CREDIBILITY_PROMPT.format(reference=reference, generated=reference),
                 {"relevance": cred[0], "informativeness": cred[1],
                  "logical_soundness": cred[2]}),
            ]
            for template_id, prompt, reply in pairs:
                backend = RecordingBackend(lambda req, r=reply: _json_block(r))
                Gateway(backend=backend).ask(template_id, prompt)
                eval_records.extend(backend.records)
    eval_script = ASSETS / "mock_scripts" / "bundled_eval.jsonl"
    save_mock_script(eval_records, eval_script)
    print(f"wrote {bench_path} (5 cases) and {eval_script} ({len(eval_records)} records)")

    # smoke the bundled eval end to end
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        index_path = tmp / "index.bin"
        save_index(index, index_path)
        out = tmp / "eval.json"
        rc = dispatch([
            "eval", "--cases", str(bench_path), "--index", str(index_path),
            "--corpus", str(corpus_path), "--out", str(out),
            "--pipeline", "echo", "--mock", str(eval_script),
        ])
        assert rc == 0, f"eval exited {rc}"
        record = json.loads(out.read_text())
        assert abs(record["means"]["cosine_similarity"] - 1.0) <= 1e-6
        print(f"eval smoke ok: means = {record['means']}")


if __name__ == "__main__":
    main()
