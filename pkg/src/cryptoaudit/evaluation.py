"""Benchmark harness: four metrics scored against reference analyses.

Per case: a credibility score (0-100, unweighted mean of three judged
dimensions), embedding cosine similarity clamped to [0, 1], a judged
semantic match rate, and a judged coverage score. Judge replies outside
their range get one retry, then the case is marked errored and excluded
from the means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from . import prompts
from .embedding import EmbeddingProvider, embed
from .errors import CryptoAuditError, JudgeError
from .gateway import Gateway, parse_json_block
from .predetection import CodeSample


@dataclass(frozen=True)
class CaseTags:
    source: str  # cve | ctf | synthetic
    language: str


@dataclass(frozen=True)
class BenchmarkCase:
    id: str
    sample: CodeSample
    reference_analysis: str
    tags: CaseTags

    def __post_init__(self) -> None:
        if not self.reference_analysis:
            raise ValueError(f"case {self.id!r} has an empty reference analysis")


@dataclass(frozen=True)
class MetricSet:
    credibility: float        # [0, 100]
    cosine_similarity: float  # [0, 1]
    semantic_match: float     # [0, 1]
    coverage: float           # [0, 1]

    def __post_init__(self) -> None:
        if not 0.0 <= self.credibility <= 100.0:
            raise ValueError(f"credibility {self.credibility} outside [0, 100]")
        for name in ("cosine_similarity", "semantic_match", "coverage"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} {value} outside [0, 1]")


@dataclass(frozen=True)
class CredibilityResult:
    score: float
    relevance: float
    informativeness: float
    logical_soundness: float


def load_benchmark(path: str | Path) -> list[BenchmarkCase]:
    cases = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                cases.append(
                    BenchmarkCase(
                        id=raw["id"],
                        sample=CodeSample(
                            id=raw["id"],
                            source_text=raw["code"],
                            language_hint=raw.get("language"),
                            origin=raw.get("origin", ""),
                        ),
                        reference_analysis=raw["reference_analysis"],
                        tags=CaseTags(
                            source=raw.get("source", "synthetic"),
                            language=raw.get("language", ""),
                        ),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CryptoAuditError(f"bad benchmark case on line {line_number}: {exc}") from exc
    return cases


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def cosine_metric(generated: str, reference: str, provider: EmbeddingProvider) -> float:
    """Embedding cosine between the two texts, clamped into [0, 1]."""
    if not generated or not reference:
        raise ValueError("cosine_metric requires two non-empty texts")
    vg = embed(generated, provider)
    vr = embed(reference, provider)
    return min(1.0, max(0.0, float(vg @ vr)))


def _judge_once(template_id: str, prompt: str, gateway: Gateway) -> dict[str, Any]:
    return parse_json_block(gateway.ask(template_id, prompt))


def _judge_scalar(template_id: str, prompt: str, gateway: Gateway) -> float:
    """Ask for a 0-1 score; one retry on out-of-range or unparseable replies."""
    last_problem = ""
    for _ in range(2):
        try:
            obj = _judge_once(template_id, prompt, gateway)
            score = float(obj["score"])
        except Exception as exc:
            last_problem = str(exc)
            continue
        if 0.0 <= score <= 1.0:
            return score
        last_problem = f"score {score} outside [0, 1]"
    raise JudgeError(f"judge {template_id} failed after retry: {last_problem}")


def judge_semantic_match(generated: str, reference: str, gateway: Gateway) -> float:
    prompt = prompts.JUDGE_SEMANTIC_PROMPT.format(reference=reference, generated=generated)
    return _judge_scalar(prompts.TEMPLATE_JUDGE_SEMANTIC, prompt, gateway)


def judge_coverage(generated: str, reference: str, gateway: Gateway) -> float:
    prompt = prompts.JUDGE_COVERAGE_PROMPT.format(reference=reference, generated=generated)
    return _judge_scalar(prompts.TEMPLATE_JUDGE_COVERAGE, prompt, gateway)


_CREDIBILITY_DIMENSIONS = ("relevance", "informativeness", "logical_soundness")


def credibility(generated: str, reference: str, gateway: Gateway) -> CredibilityResult:
    """Unweighted mean of three 0-100 judged dimensions; sub-scores kept for audit."""
    prompt = prompts.JUDGE_CREDIBILITY_PROMPT.format(reference=reference, generated=generated)
    last_problem = ""
    for _ in range(2):
        try:
            obj = _judge_once(prompts.TEMPLATE_JUDGE_CREDIBILITY, prompt, gateway)
            values = {dim: float(obj[dim]) for dim in _CREDIBILITY_DIMENSIONS}
        except Exception as exc:
            last_problem = str(exc)
            continue
        if all(0.0 <= v <= 100.0 for v in values.values()):
            return CredibilityResult(
                score=sum(values.values()) / len(values),
                relevance=values["relevance"],
                informativeness=values["informativeness"],
                logical_soundness=values["logical_soundness"],
            )
        last_problem = f"sub-score outside [0, 100]: {values}"
    raise JudgeError(f"credibility judge failed after retry: {last_problem}")


# --------------------------------------------------------------------------
# harness
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseScore:
    case_id: str
    generated: str
    metrics: MetricSet | None
    credibility_parts: CredibilityResult | None
    error: str | None = None


@dataclass(frozen=True)
class BenchmarkReport:
    scores: tuple[CaseScore, ...]
    means: dict[str, float] | None  # None when no case scored
    case_count: int
    errored_count: int


METRIC_COLUMNS = ("credibility", "cosine_similarity", "semantic_match", "coverage")


def echo_pipeline(case: BenchmarkCase) -> str:
    """Upper-bound pipeline: emit the reference analysis verbatim."""
    return case.reference_analysis


def _score_case(
    case: BenchmarkCase,
    pipeline: Callable[[BenchmarkCase], str],
    provider: EmbeddingProvider,
    gateway: Gateway,
) -> CaseScore:
    generated = ""
    try:
        generated = pipeline(case)
        cred = credibility(generated, case.reference_analysis, gateway)
        metrics = MetricSet(
            credibility=cred.score,
            cosine_similarity=cosine_metric(generated, case.reference_analysis, provider),
            semantic_match=judge_semantic_match(generated, case.reference_analysis, gateway),
            coverage=judge_coverage(generated, case.reference_analysis, gateway),
        )
        return CaseScore(case_id=case.id, generated=generated, metrics=metrics,
                         credibility_parts=cred)
    except Exception as exc:
        return CaseScore(
            case_id=case.id,
            generated=generated,
            metrics=None,
            credibility_parts=None,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_benchmark(
    cases: Sequence[BenchmarkCase],
    pipeline: Callable[[BenchmarkCase], str],
    provider: EmbeddingProvider,
    gateway: Gateway,
    concurrency: int = 4,
) -> BenchmarkReport:
    """Score every case; errored cases are reported apart from the means.

    Cases are scored in parallel under the concurrency cap; aggregation is a
    single fold after all cases settle, so results stay order-stable.
    """
    if not cases:
        scores: list[CaseScore] = []
    elif concurrency <= 1 or len(cases) == 1:
        scores = [_score_case(c, pipeline, provider, gateway) for c in cases]
    else:
        from concurrent.futures import ThreadPoolExecutor

        workers = min(concurrency, len(cases))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(
                pool.map(lambda c: _score_case(c, pipeline, provider, gateway), cases)
            )

    scored = [s.metrics for s in scores if s.metrics is not None]
    means: dict[str, float] | None = None
    if scored:
        means = {
            column: sum(getattr(m, column) for m in scored) / len(scored)
            for column in METRIC_COLUMNS
        }
    return BenchmarkReport(
        scores=tuple(scores),
        means=means,
        case_count=len(cases),
        errored_count=sum(1 for s in scores if s.error is not None),
    )


def benchmark_to_record(report: BenchmarkReport) -> dict[str, Any]:
    return {
        "schema_version": "cryptoaudit.benchmark/1",
        "case_count": report.case_count,
        "errored_count": report.errored_count,
        "zero_cases": report.case_count == 0,
        "means": report.means,
        "cases": [
            {
                "case_id": s.case_id,
                "error": s.error,
                "metrics": (
                    None
                    if s.metrics is None
                    else {column: getattr(s.metrics, column) for column in METRIC_COLUMNS}
                ),
                "credibility_parts": (
                    None
                    if s.credibility_parts is None
                    else {
                        "relevance": s.credibility_parts.relevance,
                        "informativeness": s.credibility_parts.informativeness,
                        "logical_soundness": s.credibility_parts.logical_soundness,
                    }
                ),
            }
            for s in report.scores
        ],
    }


def render_benchmark_table(report: BenchmarkReport) -> str:
    """Aligned text table with exactly the four metric columns."""
    headers = ("case", "credibility", "cosine_similarity", "semantic_match", "coverage")
    rows: list[tuple[str, ...]] = []
    for s in report.scores:
        if s.metrics is None:
            rows.append((s.case_id, "error", "error", "error", "error"))
        else:
            rows.append(
                (
                    s.case_id,
                    f"{s.metrics.credibility:.2f}",
                    f"{s.metrics.cosine_similarity:.4f}",
                    f"{s.metrics.semantic_match:.4f}",
                    f"{s.metrics.coverage:.4f}",
                )
            )
    if report.means is not None:
        rows.append(
            (
                "MEAN",
                f"{report.means['credibility']:.2f}",
                f"{report.means['cosine_similarity']:.4f}",
                f"{report.means['semantic_match']:.4f}",
                f"{report.means['coverage']:.4f}",
            )
        )
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(headers[i].ljust(widths[i]) for i in range(len(headers))),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    lines.extend("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))) for r in rows)
    if report.case_count == 0:
        lines.append("(zero cases: nothing to score)")
    elif report.errored_count:
        lines.append(
            f"({report.errored_count} of {report.case_count} cases errored; "
            "errored cases are excluded from the means)"
        )
    return "\n".join(lines) + "\n"
