"""End-to-end per-sample pipeline and the parallel batch scanner."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import Corpus
from .curves import CurveExecutorConfig
from .detection import DetectionReport, PipelineMeta, PromptBudget, Verdict, detect
from .embedding import EmbeddingProvider, VectorIndex
from .errors import CryptoAuditError
from .gateway import Gateway
from .predetection import (
    AlgorithmSpec,
    CodeSample,
    FewShotExample,
    reasoning_signal,
    run_predetection,
    semantic_signal,
)
from .retrieval import RetrievalConfig, dual_retrieve


@dataclass
class PipelineContext:
    gateway: Gateway
    provider: EmbeddingProvider
    index: VectorIndex
    corpus: Corpus
    specs: dict[str, AlgorithmSpec]
    few_shot: tuple[FewShotExample, ...]
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    curve_cfg: CurveExecutorConfig = field(default_factory=CurveExecutorConfig)
    budget: PromptBudget = field(default_factory=PromptBudget)
    concurrency: int = 4


def run_sample(sample: CodeSample, ctx: PipelineContext) -> DetectionReport:
    """Pre-detection, dual retrieval, then detection for one sample.

    Pipeline failures become analysis_failed reports so batch scans always
    produce one report per sample.
    """
    timings: dict[str, float] = {}
    try:
        t0 = time.perf_counter()
        bundle = run_predetection(
            sample, ctx.specs, ctx.few_shot, ctx.gateway, ctx.curve_cfg
        )
        timings["predetection"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        blocks = dual_retrieve(
            ctx.index,
            ctx.corpus,
            semantic_signal(bundle),
            reasoning_signal(bundle),
            ctx.retrieval,
            ctx.provider,
        )
        timings["retrieval"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        report = detect(
            sample,
            bundle,
            blocks,
            ctx.gateway,
            embedding_tag=ctx.provider.tag,
            tau=ctx.retrieval.tau,
            k=ctx.retrieval.k,
            budget=ctx.budget,
        )
        timings["detection"] = time.perf_counter() - t0
        report.meta.timings_s.update(timings)
        return report
    except CryptoAuditError as exc:
        return DetectionReport(
            sample_id=sample.id,
            verdict=Verdict.ANALYSIS_FAILED,
            findings=(),
            meta=PipelineMeta(
                model_tag=ctx.gateway.model_tag,
                embedding_tag=ctx.provider.tag,
                tau=ctx.retrieval.tau,
                k=ctx.retrieval.k,
                retrieved={},
                timings_s=timings,
            ),
            diagnostic=f"{type(exc).__name__}: {exc}",
        )


def scan_samples(samples: list[CodeSample], ctx: PipelineContext) -> list[DetectionReport]:
    """Analyze samples in parallel under the configured concurrency cap."""
    if not samples:
        return []
    workers = max(1, min(ctx.concurrency, len(samples)))
    if workers == 1:
        return [run_sample(sample, ctx) for sample in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_sample(s, ctx), samples))
