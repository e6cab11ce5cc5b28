"""Acceptance suite: one test per release criterion, one PASS line each.

Run with:  pytest tests/test_acceptance.py -v -s
"""

from __future__ import annotations

import json
import math
import os
import random
import string
import time
from pathlib import Path

import pytest

from conftest import scripted_gateway
from cryptoaudit.cli import (
    BUNDLED_BENCHMARK,
    BUNDLED_EVAL_MOCK,
    BUNDLED_FIXTURE_CORPUS,
    BUNDLED_GOLDENS_DIR,
    BUNDLED_SAMPLES_DIR,
    BUNDLED_SCAN_MOCK,
    dispatch,
)
from cryptoaudit.corpus import (
    Corpus,
    KnowledgeChunk,
    RawDocument,
    SourceType,
    chunk_fixed,
    load_corpus,
    save_corpus,
    segment_markdown_by_h3,
)
from cryptoaudit.curves import (
    CurveFlag,
    CurveParams,
    assess_curve,
    count_points,
    discriminant_is_zero,
    hasse_interval,
)
from cryptoaudit.embedding import MockEmbeddingProvider, build_index, embed
from cryptoaudit.errors import JudgeError
from cryptoaudit.evaluation import cosine_metric, credibility, judge_semantic_match
from cryptoaudit.retrieval import RetrievalConfig, threshold_retrieve

H3_FIXTURES = sorted((Path(__file__).parent / "data" / "h3_fixtures").glob("*.md"))


def _pass(criterion: str, detail: str) -> None:
    print(f"\nACCEPTANCE PASS [{criterion}]: {detail}")


def _json_reply(obj) -> str:
    return "```json\n" + json.dumps(obj) + "\n```"


# ---------------------------------------------------------------------------
# 1. retrieval oracle equivalence, >= 200 randomized trials, < 30 s
# ---------------------------------------------------------------------------


def test_criterion_1_retrieval_oracle_equivalence():
    started = time.perf_counter()
    rng = random.Random(20250809)
    provider = MockEmbeddingProvider()
    words = ("nonce padding curve modulus salt bias oracle lattice subgroup "
             "keystream exponent residue twist signature digest").split()

    trials = 0
    nonempty_blocks = 0
    while trials < 220:
        n_chunks = rng.randint(1, 64)
        texts = list(
            dict.fromkeys(
                " ".join(rng.choices(words, k=rng.randint(2, 7))) + f" #{i}"
                for i in range(n_chunks)
            )
        )
        corpus = Corpus(
            [
                KnowledgeChunk(
                    id=f"c{i}", source_type=SourceType.BLOG, title="",
                    retrieval_key=t, content=t,
                )
                for i, t in enumerate(texts)
            ]
        )
        index = build_index(corpus, provider)
        for _ in range(4):
            trials += 1
            # mix far queries with exact replays so the tau filter keeps items
            if rng.random() < 0.5:
                query = texts[rng.randrange(len(texts))]
            else:
                query = " ".join(rng.choices(words, k=8)) + " ???"
            cfg = RetrievalConfig(k=rng.randint(1, 10), tau=rng.uniform(0.0, 0.9))
            block = threshold_retrieve(index, corpus, query, cfg, provider)

            # exhaustive oracle: cosine against every entry, stable sort,
            # truncate to k, filter by tau, number from 1
            qv = embed(query, provider)
            scored = sorted(
                (
                    (-sum(float(a) * float(b) for a, b in zip(index.vectors[pos], qv)), pos)
                    for pos in range(len(index.ids))
                ),
            )
            expected = [
                (index.ids[pos], -neg) for neg, pos in scored[: cfg.k] if -neg >= cfg.tau
            ]

            assert [i.chunk_id for i in block.items] == [cid for cid, _ in expected]
            for item, (_, cos) in zip(block.items, expected):
                assert abs(item.cos_sim - cos) <= 1e-9
            assert [i.index_number for i in block.items] == list(
                range(1, len(block.items) + 1)
            )
            if block.items:
                nonempty_blocks += 1

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"criterion 1 exceeded its runtime budget: {elapsed:.1f}s"
    assert nonempty_blocks > 20, "trial mix failed to exercise the keep branch"
    _pass(
        "1 retrieval-oracle-equivalence",
        f"{trials} randomized trials matched the exhaustive oracle within 1e-9 "
        f"({nonempty_blocks} with non-empty blocks) in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2. threshold-retrieval fidelity at tau = 0.75 on the bundled fixture corpus
# ---------------------------------------------------------------------------


def test_criterion_2_threshold_fidelity_on_fixture_corpus():
    corpus = load_corpus(BUNDLED_FIXTURE_CORPUS)
    assert len(corpus) == 30
    provider = MockEmbeddingProvider()
    index = build_index(corpus, provider)
    cfg = RetrievalConfig()  # k = 5, tau = 0.75 defaults
    assert cfg.tau == 0.75

    se_chunks = [c for c in corpus if c.external_id is not None]
    assert se_chunks, "fixture corpus must contain StackExchange chunks"

    blocks = []
    for chunk in se_chunks:
        block = threshold_retrieve(index, corpus, chunk.retrieval_key, cfg, provider)
        assert block.items, f"exact-key query for {chunk.id} fell below tau"
        top = block.items[0]
        assert top.chunk_id == chunk.id
        # full Q&A rendering: the matched key plus question and answer content
        assert chunk.retrieval_key in top.rendered_text
        assert chunk.content in top.rendered_text
        answer_part = chunk.content.split("\n\n", 1)[1]
        assert answer_part in top.rendered_text
        blocks.append(block)

    # a far query plus every block obey the threshold and numbering contracts
    blocks.append(
        threshold_retrieve(index, corpus, "query text matching nothing", cfg, provider)
    )
    for block in blocks:
        assert all(item.cos_sim >= 0.75 for item in block.items)
        assert [i.index_number for i in block.items] == list(range(1, len(block.items) + 1))
        assert len(block.items) <= cfg.k
    assert blocks[-1].items == ()

    _pass(
        "2 threshold-fidelity",
        f"tau=0.75 honored on the 30-chunk fixture corpus; {len(se_chunks)} "
        "StackExchange hits rendered full Q&A with contiguous numbering",
    )


# ---------------------------------------------------------------------------
# 3. end-to-end golden determinism under scripted mocks
# ---------------------------------------------------------------------------

_EXPECTED_VERDICTS = {
    "ecdsa_verify_no_range_check": "vulnerable",
    "rsa_textbook_padding": "vulnerable",
    "aes_ecb_profile": "vulnerable",
    "token_modulo_bias": "vulnerable",
    "pbkdf2_weak_iterations": "vulnerable",
    "aes_gcm_envelope": "no_issue_found",
}


def test_criterion_3_golden_scan_determinism(tmp_path):
    index_path = tmp_path / "index.bin"
    rc = dispatch([
        "kb", "index", "--corpus", str(BUNDLED_FIXTURE_CORPUS),
        "--out", str(index_path),
    ])
    assert rc == 0

    outs = []
    for run in (1, 2):
        out = tmp_path / f"run{run}"
        rc = dispatch([
            "scan", "--input", str(BUNDLED_SAMPLES_DIR),
            "--index", str(index_path), "--corpus", str(BUNDLED_FIXTURE_CORPUS),
            "--out", str(out), "--format", "machine",
            "--mock", str(BUNDLED_SCAN_MOCK),
        ])
        assert rc == 1, "five vulnerable verdicts must gate the exit code to 1"
        outs.append(out)

    names = sorted(p.name for p in outs[0].glob("*.json"))
    assert names == sorted(f"{s}.json" for s in _EXPECTED_VERDICTS)
    for name in names:
        first = (outs[0] / name).read_bytes()
        second = (outs[1] / name).read_bytes()
        golden = (Path(BUNDLED_GOLDENS_DIR) / name).read_bytes()
        assert first == second, f"{name}: two runs differ"
        assert first == golden, f"{name}: run does not match the committed golden"
        verdict = json.loads(first)["verdict"]
        assert verdict == _EXPECTED_VERDICTS[name.removesuffix(".json")]

    _pass(
        "3 golden-determinism",
        f"two scan --mock runs over {len(names)} bundled samples were "
        "byte-identical and matched the committed goldens "
        "(5 vulnerable, 1 no_issue_found)",
    )


# ---------------------------------------------------------------------------
# 4. curve analyzer oracle suite, < 10 s
# ---------------------------------------------------------------------------


def test_criterion_4_curve_oracle_suite():
    import sympy

    started = time.perf_counter()

    checked = 0
    for p in (5, 7, 11, 13):
        d = next(d for d in range(1, p) if sympy.legendre_symbol(d, p) == -1)
        low, high = hasse_interval(p)
        for a in range(p):
            for b in range(p):
                if discriminant_is_zero(p, a, b):
                    continue
                order = count_points(p, a, b)
                assert low <= order <= high, (p, a, b, order)
                twist = count_points(p, (a * d * d) % p, (b * d**3) % p)
                assert order + twist == 2 * p + 2, (p, a, b)
                checked += 1

    singular = assess_curve(CurveParams(p=5, a=0, b=0))
    assert CurveFlag.SINGULAR in singular.flags

    anomalous = None
    for p in (q for q in range(5, 98) if sympy.isprime(q)):
        for a in range(p):
            for b in range(p):
                if discriminant_is_zero(p, a, b):
                    continue
                if count_points(p, a, b) == p:
                    anomalous = (p, a, b)
                    break
            if anomalous:
                break
        if anomalous:
            break
    assert anomalous is not None
    assessment = assess_curve(CurveParams(*anomalous))
    assert CurveFlag.ANOMALOUS in assessment.flags
    assert assessment.order == anomalous[0]

    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"criterion 4 exceeded its runtime budget: {elapsed:.1f}s"
    _pass(
        "4 curve-oracle-suite",
        f"{checked} non-singular curves over p in {{5,7,11,13}} satisfied the Hasse "
        f"bound and curve+twist = 2p+2; (5,0,0) singular; anomalous example "
        f"{anomalous} flagged; {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 5. metric properties
# ---------------------------------------------------------------------------


def test_criterion_5_metric_properties():
    provider = MockEmbeddingProvider()
    rng = random.Random(5150)

    texts = [
        "".join(rng.choices(string.ascii_lowercase + " ", k=rng.randint(5, 60))).strip() or "x"
        for _ in range(40)
    ]
    for text in texts[:10]:
        assert abs(cosine_metric(text, text, provider) - 1.0) <= 1e-6

    for _ in range(100):
        a, b = rng.choice(texts), rng.choice(texts)
        assert cosine_metric(a, b, provider) == cosine_metric(b, a, provider)
        assert 0.0 <= cosine_metric(a, b, provider) <= 1.0

    gw = scripted_gateway(("judge_semantic_match", _json_reply({"score": 0.7})))
    assert judge_semantic_match("g", "r", gw) == 0.7
    bad = scripted_gateway(("judge_semantic_match", _json_reply({"score": 1.5})))
    with pytest.raises(JudgeError):
        judge_semantic_match("g", "r", bad)

    cred = credibility(
        "g", "r",
        scripted_gateway(
            ("judge_credibility",
             _json_reply({"relevance": 60, "informativeness": 70,
                          "logical_soundness": 80}))
        ),
    )
    assert cred.score == 70.0

    _pass(
        "5 metric-properties",
        "cosine identity within 1e-6, symmetry on 100 pairs, judge range "
        "validation enforced, credibility mean(60,70,80) = 70",
    )


# ---------------------------------------------------------------------------
# 6. corpus invariants at volume
# ---------------------------------------------------------------------------


def test_criterion_6_corpus_invariants(tmp_path):
    rng = random.Random(606)

    # JSONL round-trip identity on 1,000 randomized chunks
    alphabet = string.printable + "äöüß∂≈漢字"
    chunks = []
    for i in range(1000):
        source_type = rng.choice(list(SourceType))
        text = "".join(rng.choices(alphabet, k=rng.randint(1, 120)))
        if source_type is SourceType.STACKEXCHANGE:
            key = text
            content = text + "\n\n" + "".join(rng.choices(alphabet, k=30))
            external_id = str(rng.randrange(10**6))
        else:
            key = content = text
            external_id = None
        chunks.append(
            KnowledgeChunk(
                id=f"r{i:05d}", source_type=source_type, title=f"t{i}",
                retrieval_key=key, content=content, external_id=external_id,
                metadata={"origin": f"o{i % 17}"},
            )
        )
    corpus = Corpus(chunks)
    path = tmp_path / "volume.jsonl"
    save_corpus(corpus, path)
    assert load_corpus(path) == corpus

    # chunk_fixed reconstruction on 1,000 randomized inputs
    for _ in range(1000):
        text = "".join(rng.choices(alphabet, k=rng.randrange(0, 400)))
        max_chars = rng.randint(1, 120)
        overlap = rng.randint(0, max_chars - 1)
        pieces = chunk_fixed(text, max_chars, overlap)
        rebuilt = pieces[0] + "".join(p[overlap:] for p in pieces[1:]) if pieces else ""
        assert rebuilt == text
        assert all(len(p) <= max_chars for p in pieces)
        if text:
            stride = max_chars - overlap
            assert len(pieces) == max(1, math.ceil((len(text) - overlap) / stride))

    # h3 splitter content preservation over the 20-document fixture set
    assert len(H3_FIXTURES) == 20
    for fixture in H3_FIXTURES:
        body = fixture.read_text(encoding="utf-8")
        sections = segment_markdown_by_h3(
            RawDocument(source_type=SourceType.BLOG, body=body, origin=fixture.name)
        )
        rebuilt_lines: list[str] = []
        for title, section_body in sections:
            if title:
                rebuilt_lines.append(f"### {title}")
            if section_body:
                rebuilt_lines.extend(section_body.split("\n"))
        assert rebuilt_lines == body.splitlines(), fixture.name

    _pass(
        "6 corpus-invariants",
        "1000-chunk JSONL round-trip identical, 1000 chunking reconstructions "
        "exact, 20 splitter fixtures (fenced-code traps included) preserved",
    )


# ---------------------------------------------------------------------------
# 7. mini-benchmark run through the CLI
# ---------------------------------------------------------------------------


def test_criterion_7_mini_benchmark(tmp_path):
    index_path = tmp_path / "index.bin"
    assert dispatch([
        "kb", "index", "--corpus", str(BUNDLED_FIXTURE_CORPUS),
        "--out", str(index_path),
    ]) == 0

    out = tmp_path / "eval.json"
    rc = dispatch([
        "eval", "--cases", str(BUNDLED_BENCHMARK), "--index", str(index_path),
        "--corpus", str(BUNDLED_FIXTURE_CORPUS), "--out", str(out),
        "--pipeline", "echo", "--mock", str(BUNDLED_EVAL_MOCK),
    ])
    assert rc == 0

    record = json.loads(out.read_text(encoding="utf-8"))
    assert record["case_count"] == 5
    assert record["errored_count"] == 0
    assert set(record["means"]) == {
        "credibility", "cosine_similarity", "semantic_match", "coverage",
    }
    assert abs(record["means"]["cosine_similarity"] - 1.0) <= 1e-6
    for case in record["cases"]:
        assert set(case["metrics"]) == {
            "credibility", "cosine_similarity", "semantic_match", "coverage",
        }

    _pass(
        "7 mini-benchmark",
        "eval --mock scored 5 bundled cases, emitted the four metric columns, "
        f"echo pipeline mean cosine_similarity = {record['means']['cosine_similarity']}",
    )


# ---------------------------------------------------------------------------
# 8. optional live smoke test (manual; requires configured endpoints + key)
# ---------------------------------------------------------------------------


@pytest.mark.skipif(
    not os.environ.get("CRYPTOAUDIT_LIVE_CONFIG"),
    reason="live smoke test runs only with CRYPTOAUDIT_LIVE_CONFIG pointing at "
           "a config file with real chat/embedding endpoints",
)
def test_criterion_8_live_smoke(tmp_path):
    from cryptoaudit.detection import parse_report

    config = os.environ["CRYPTOAUDIT_LIVE_CONFIG"]
    index_path = tmp_path / "index.bin"
    assert dispatch([
        "kb", "index", "--corpus", str(BUNDLED_FIXTURE_CORPUS),
        "--out", str(index_path), "--config", config, "--embedding", "http",
    ]) == 0
    out = tmp_path / "reports"
    rc = dispatch([
        "scan", "--input", str(Path(BUNDLED_SAMPLES_DIR) / "token_modulo_bias.js"),
        "--index", str(index_path), "--corpus", str(BUNDLED_FIXTURE_CORPUS),
        "--out", str(out), "--format", "machine", "--config", config,
    ])
    assert rc in (0, 1)
    report = parse_report((out / "token_modulo_bias.json").read_text(encoding="utf-8"))
    assert report.sample_id == "token_modulo_bias"
    _pass("8 live-smoke", f"live scan completed with verdict {report.verdict.value}")
