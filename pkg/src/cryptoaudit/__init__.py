"""cryptoaudit: knowledge-augmented auditor for cryptographic logic flaws.

The pipeline summarizes target code, verifies it against bundled algorithm
checklists, reasons about it with few-shot chain-of-thought prompting,
retrieves supporting knowledge from a vectorized corpus behind a cosine
similarity threshold, and emits structured vulnerability reports. An
evaluation harness scores generated analyses against references with four
benchmark metrics.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Corpus,
    KnowledgeChunk,
    RawDocument,
    SourceType,
    build_chunks,
    chunk_fixed,
    load_corpus,
    save_corpus,
    segment_markdown_by_h3,
)
from .curves import CurveAssessment, CurveFlag, CurveParams, assess_curve  # noqa: F401
from .detection import DetectionReport, Finding, Severity, Verdict, detect  # noqa: F401
from .embedding import (  # noqa: F401
    MockEmbeddingProvider,
    ScoredHit,
    VectorIndex,
    build_index,
    embed,
    load_index,
    save_index,
    similarity_search,
)
from .evaluation import (  # noqa: F401
    BenchmarkCase,
    MetricSet,
    cosine_metric,
    credibility,
    judge_coverage,
    judge_semantic_match,
    run_benchmark,
)
from .gateway import CotPrompt, Gateway, ScriptedMockBackend, render_cot_prompt  # noqa: F401
from .predetection import (  # noqa: F401
    AlgorithmSpec,
    CodeSample,
    PreDetectionBundle,
    ReasoningTrace,
    SemanticSummary,
    cot_reason,
    extract_curve_params,
    identify_route,
    run_predetection,
    summarize,
    verify_compliance,
)
from .retrieval import (  # noqa: F401
    QueryKind,
    RetrievalConfig,
    RetrievedBlock,
    dual_retrieve,
    threshold_retrieve,
)
