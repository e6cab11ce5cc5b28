"""Command-line driver: corpus lifecycle, scanning, evaluation, curve checks.

Exit codes: 0 = ran, 1 = at least one vulnerable verdict (CI gating),
2 = usage or operational error.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Sequence

import click

from . import __version__
from .config import AppConfig, assets_path, load_config, validate_config
from .corpus import (
    DEFAULT_POLICY,
    build_chunks,
    load_corpus,
    load_policy,
    load_source_tree,
    save_corpus,
)
from .curves import CurveExecutorConfig, CurveParams, assess_curve
from .detection import render_report
from .embedding import (
    EmbeddingProvider,
    HttpEmbeddingProvider,
    MockEmbeddingProvider,
    build_index,
    load_index,
    save_index,
)
from .errors import ConfigError, CryptoAuditError
from .evaluation import (
    benchmark_to_record,
    echo_pipeline,
    load_benchmark,
    render_benchmark_table,
    run_benchmark,
)
from .gateway import Gateway, HttpChatBackend, RetryPolicy, ScriptedMockBackend
from .pipeline import PipelineContext, run_sample, scan_samples
from .predetection import CodeSample, load_algorithm_specs, load_few_shot_examples
from .retrieval import RetrievalConfig, render_block, threshold_retrieve

LANGUAGE_BY_EXTENSION = {
    ".py": "python",
    ".js": "javascript",
    ".ts": "typescript",
    ".c": "c",
    ".h": "c",
    ".cpp": "cpp",
    ".cc": "cpp",
    ".java": "java",
    ".go": "go",
    ".rs": "rust",
    ".rb": "ruby",
    ".php": "php",
    ".nim": "nim",
    ".cs": "csharp",
}


def _fail_on_violations(cfg: AppConfig, require_paths: Sequence[str] = ()) -> None:
    violations = validate_config(cfg, require_paths)
    if violations:
        raise click.UsageError(
            "invalid configuration:\n" + "\n".join(f"  {v}" for v in violations)
        )


def _embedding_provider(cfg: AppConfig) -> EmbeddingProvider:
    if cfg.embedding_provider == "mock":
        return MockEmbeddingProvider(dimension=cfg.embedding_dimension)
    return HttpEmbeddingProvider(
        endpoint=cfg.embedding_endpoint,
        model=cfg.embedding_model,
        dimension=cfg.embedding_dimension,
        api_key_env=cfg.api_key_env,
    )


def _gateway(cfg: AppConfig) -> Gateway:
    retry = RetryPolicy(attempts=cfg.retry_attempts)
    if cfg.mock_script:
        backend = ScriptedMockBackend.from_file(cfg.mock_script)
        return Gateway(backend=backend, model_tag=backend.tag, retry=retry)
    if not cfg.chat_endpoint:
        raise click.UsageError(
            "no chat backend configured: set chat.endpoint in the config file "
            "or pass --mock <script>"
        )
    backend = HttpChatBackend(
        endpoint=cfg.chat_endpoint, model=cfg.chat_model, api_key_env=cfg.api_key_env
    )
    return Gateway(backend=backend, model_tag=cfg.chat_model, retry=retry)


def _pipeline_context(cfg: AppConfig) -> PipelineContext:
    return PipelineContext(
        gateway=_gateway(cfg),
        provider=_embedding_provider(cfg),
        index=load_index(cfg.index_path),
        corpus=load_corpus(cfg.corpus_path),
        specs=load_algorithm_specs(cfg.specs_dir),
        few_shot=load_few_shot_examples(cfg.fewshot_dir),
        retrieval=cfg.retrieval_config(),
        curve_cfg=cfg.curve_config(),
        budget=cfg.prompt_budget(),
        concurrency=cfg.concurrency,
    )


def _collect_samples(input_path: Path) -> list[CodeSample]:
    if input_path.is_file():
        files = [input_path]
        base = input_path.parent
    else:
        files = sorted(
            p for p in input_path.rglob("*")
            if p.is_file() and p.suffix in LANGUAGE_BY_EXTENSION
        )
        base = input_path
    samples = []
    for path in files:
        rel = path.relative_to(base).as_posix()
        sample_id = rel.rsplit(".", 1)[0].replace("/", "__")
        samples.append(
            CodeSample(
                id=sample_id,
                source_text=path.read_text(encoding="utf-8"),
                language_hint=LANGUAGE_BY_EXTENSION.get(path.suffix),
                origin=str(path),
            )
        )
    return samples


@click.group()
@click.version_option(version=__version__, prog_name="cryptoaudit")
def main() -> None:
    """Batch auditor for cryptographic logic flaws in source code."""


@main.group()
def kb() -> None:
    """Knowledge-base lifecycle: build, index, query."""


@kb.command("build")
@click.option("--sources", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory with one subdirectory per source type.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Corpus file to write (JSON Lines).")
@click.option("--policy", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Chunking policy file (JSON); defaults to the built-in policy.")
def kb_build(sources: str, out: str, policy: str | None) -> None:
    """Ingest raw source material into a knowledge corpus file."""
    chunk_policy = load_policy(policy) if policy else DEFAULT_POLICY
    docs = load_source_tree(sources)
    chunks = build_chunks(docs, chunk_policy)
    save_corpus(chunks, out)
    click.echo(f"built corpus: {len(docs)} documents -> {len(chunks)} chunks -> {out}")


@kb.command("index")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Corpus file to embed.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Index file to write.")
@click.option("--embedding", "embedding_provider", type=click.Choice(["mock", "http"]),
              default=None, help="Embedding provider (overrides config).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Config file (YAML).")
def kb_index(corpus_path: str, out: str, embedding_provider: str | None,
             config_path: str | None) -> None:
    """Embed every chunk's retrieval key into a vector index."""
    cfg = load_config(config_path, embedding_provider=embedding_provider)
    _fail_on_violations(cfg)
    corpus = load_corpus(corpus_path)
    index = build_index(corpus, _embedding_provider(cfg))
    save_index(index, out)
    click.echo(f"indexed {len(index)} chunks ({index.provider_tag}) -> {out}")


@kb.command("query")
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Index file.")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Corpus file.")
@click.option("--text", required=True, help="Query text.")
@click.option("--k", type=int, default=None, help="Top-k nearest chunks (default 5).")
@click.option("--tau", type=float, default=None,
              help="Cosine similarity threshold (default 0.75).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Config file (YAML).")
def kb_query(index_path: str, corpus_path: str, text: str, k: int | None,
             tau: float | None, config_path: str | None) -> None:
    """Print the numbered knowledge block exactly as it would enter a prompt."""
    cfg = load_config(config_path, k=k, tau=tau)
    _fail_on_violations(cfg)
    block = threshold_retrieve(
        load_index(index_path),
        load_corpus(corpus_path),
        text,
        cfg.retrieval_config(),
        _embedding_provider(cfg),
    )
    click.echo(render_block(block))


@main.command("scan")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Source file or directory to audit.")
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Index file.")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Corpus file.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for per-sample reports.")
@click.option("--tau", type=float, default=None, help="Cosine similarity threshold.")
@click.option("--k", type=int, default=None, help="Top-k nearest chunks.")
@click.option("--format", "report_format", type=click.Choice(["machine", "human", "both"]),
              default="both", show_default=True, help="Report format(s) to write.")
@click.option("--mock", "mock_script", type=click.Path(exists=True, dir_okay=False),
              default=None,
              help="Scripted mock chat replies; also swaps embeddings to the mock provider.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Config file (YAML).")
@click.pass_context
def scan(ctx: click.Context, input_path: str, index_path: str, corpus_path: str,
         out_dir: str, tau: float | None, k: int | None, report_format: str,
         mock_script: str | None, config_path: str | None) -> None:
    """Audit samples and write structured vulnerability reports."""
    overrides = dict(
        corpus_path=corpus_path, index_path=index_path, tau=tau, k=k,
        mock_script=mock_script,
    )
    if mock_script:
        # --mock swaps every model-facing backend uniformly.
        overrides["embedding_provider"] = "mock"
    cfg = load_config(config_path, **overrides)
    _fail_on_violations(cfg, require_paths=("corpus", "index", "specs_dir", "fewshot_dir"))

    samples = _collect_samples(Path(input_path))
    if not samples:
        raise click.UsageError(f"no recognizable source files under {input_path}")
    pipeline_ctx = _pipeline_context(cfg)
    reports = scan_samples(samples, pipeline_ctx)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vulnerable = 0
    for report in reports:
        if report_format in ("machine", "both"):
            (out / f"{report.sample_id}.json").write_text(
                render_report(report, "machine"), encoding="utf-8"
            )
        if report_format in ("human", "both"):
            (out / f"{report.sample_id}.txt").write_text(
                render_report(report, "human"), encoding="utf-8"
            )
        if report.verdict.value == "vulnerable":
            vulnerable += 1
        click.echo(f"{report.sample_id}: {report.verdict.value}")
    click.echo(f"scanned {len(reports)} samples, {vulnerable} vulnerable -> {out}")
    if vulnerable:
        ctx.exit(1)


@main.command("eval")
@click.option("--cases", "cases_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Benchmark cases file (JSON Lines).")
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Index file.")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Corpus file.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Aggregate report file to write (JSON).")
@click.option("--pipeline", "pipeline_kind", type=click.Choice(["full", "echo"]),
              default="full", show_default=True,
              help="'echo' emits the reference verbatim (metric upper bound).")
@click.option("--mock", "mock_script", type=click.Path(exists=True, dir_okay=False),
              default=None,
              help="Scripted mock chat replies; also swaps embeddings to the mock provider.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Config file (YAML).")
def eval_command(cases_path: str, index_path: str, corpus_path: str, out_path: str,
                 pipeline_kind: str, mock_script: str | None,
                 config_path: str | None) -> None:
    """Score a pipeline over benchmark cases with the four metrics."""
    import json as _json

    overrides = dict(corpus_path=corpus_path, index_path=index_path, mock_script=mock_script)
    if mock_script:
        overrides["embedding_provider"] = "mock"
    cfg = load_config(config_path, **overrides)
    _fail_on_violations(cfg, require_paths=("corpus", "index"))

    cases = load_benchmark(cases_path)
    gateway = _gateway(cfg)
    provider = _embedding_provider(cfg)
    if pipeline_kind == "echo":
        pipeline = echo_pipeline
    else:
        pipeline_ctx = _pipeline_context(cfg)

        def pipeline(case):  # noqa: ANN001 - click command scope
            report = run_sample(case.sample, pipeline_ctx)
            return render_report(report, "human")

    report = run_benchmark(cases, pipeline, provider, gateway,
                           concurrency=cfg.concurrency)
    Path(out_path).write_text(
        _json.dumps(benchmark_to_record(report), indent=2, sort_keys=True,
                    ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    click.echo(render_benchmark_table(report), nl=False)
    click.echo(f"wrote {out_path}")


@main.command("curve-check")
@click.option("--p", "prime", required=True, type=str, help="Prime field modulus.")
@click.option("--a", required=True, type=str, help="Weierstrass coefficient a.")
@click.option("--b", required=True, type=str, help="Weierstrass coefficient b.")
@click.option("--claimed-order", type=str, default=None,
              help="Order the code claims, for cross-checking.")
@click.option("--remote", "remote_endpoint", default=None,
              help="Remote computer-algebra endpoint for large moduli.")
def curve_check(prime: str, a: str, b: str, claimed_order: str | None,
                remote_endpoint: str | None) -> None:
    """Assess elliptic curve parameters for known weaknesses."""
    try:
        p_int = int(prime)
        params = CurveParams(
            p=p_int,
            a=int(a) % p_int,
            b=int(b) % p_int,
            claimed_order=None if claimed_order is None else int(claimed_order),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    cfg = CurveExecutorConfig(
        kind="remote" if remote_endpoint else "local", remote_endpoint=remote_endpoint
    )
    assessment = assess_curve(params, cfg)
    flags = ", ".join(sorted(f.value for f in assessment.flags)) or "none"
    click.echo(f"curve: y^2 = x^3 + {params.a}x + {params.b} over F_{params.p}")
    click.echo(f"flags: {flags}")
    click.echo(f"order: {assessment.order if assessment.order is not None else 'not computed'}")
    click.echo(f"executor: {assessment.executor.value}")
    click.echo(f"evidence: {assessment.evidence}")


def dispatch(argv: Sequence[str]) -> int:
    """Route argv to a subcommand and normalize the exit code contract."""
    try:
        # without standalone mode, click hands back ctx.exit codes as values
        rv = main.main(args=list(argv), prog_name="cryptoaudit", standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    except (CryptoAuditError, ConfigError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def run() -> None:
    sys.exit(dispatch(sys.argv[1:]))


# Default fixture locations, handy for demos and tests.
BUNDLED_FIXTURE_CORPUS = assets_path("fixtures", "fixture_corpus.jsonl")
BUNDLED_SAMPLES_DIR = assets_path("samples")
BUNDLED_SCAN_MOCK = assets_path("mock_scripts", "bundled_scan.jsonl")
BUNDLED_EVAL_MOCK = assets_path("mock_scripts", "bundled_eval.jsonl")
BUNDLED_BENCHMARK = assets_path("benchmark", "mini_cases.jsonl")
BUNDLED_GOLDENS_DIR = assets_path("goldens")
