"""Application configuration: YAML file, flag overrides, validation.

Precedence is flags > config file > defaults. Secrets never live in the
config file; only the name of the environment variable holding the API key
does.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable

import yaml

from .curves import CurveExecutorConfig
from .detection import PromptBudget
from .errors import ConfigError
from .retrieval import RetrievalConfig

_ASSETS_DIR = Path(__file__).resolve().parent / "assets"


def assets_path(*parts: str) -> Path:
    return _ASSETS_DIR.joinpath(*parts)


@dataclass(frozen=True)
class AppConfig:
    # chat backend
    chat_endpoint: str | None = None
    chat_model: str = "default"
    # embedding backend
    embedding_provider: str = "mock"  # "mock" or "http"
    embedding_endpoint: str | None = None
    embedding_model: str = "all-MiniLM-L6-v2"
    embedding_dimension: int = 64
    api_key_env: str = "CRYPTOAUDIT_API_KEY"
    # retrieval
    k: int = 5
    tau: float = 0.75
    # paths
    corpus_path: str | None = None
    index_path: str | None = None
    specs_dir: str = str(assets_path("specs"))
    fewshot_dir: str = str(assets_path("fewshot"))
    mock_script: str | None = None
    # curve executor
    curve_executor: str = "local"
    curve_remote_endpoint: str | None = None
    # gateway behaviour
    concurrency: int = 4
    retry_attempts: int = 3
    knowledge_budget: int = 12000
    total_budget: int = 64000

    def retrieval_config(self) -> RetrievalConfig:
        return RetrievalConfig(k=self.k, tau=self.tau)

    def curve_config(self) -> CurveExecutorConfig:
        return CurveExecutorConfig(
            kind=self.curve_executor, remote_endpoint=self.curve_remote_endpoint
        )

    def prompt_budget(self) -> PromptBudget:
        return PromptBudget(
            knowledge_chars=self.knowledge_budget, total_chars=self.total_budget
        )


@dataclass(frozen=True)
class ConfigViolation:
    key: str
    value: Any
    constraint: str

    def __str__(self) -> str:
        return f"{self.key}={self.value!r} violates: {self.constraint}"


_FILE_KEYS = {
    ("chat", "endpoint"): "chat_endpoint",
    ("chat", "model"): "chat_model",
    ("embedding", "provider"): "embedding_provider",
    ("embedding", "endpoint"): "embedding_endpoint",
    ("embedding", "model"): "embedding_model",
    ("embedding", "dimension"): "embedding_dimension",
    ("embedding", "api_key_env"): "api_key_env",
    ("retrieval", "k"): "k",
    ("retrieval", "tau"): "tau",
    ("paths", "corpus"): "corpus_path",
    ("paths", "index"): "index_path",
    ("paths", "specs_dir"): "specs_dir",
    ("paths", "fewshot_dir"): "fewshot_dir",
    ("paths", "mock_script"): "mock_script",
    ("curve", "executor"): "curve_executor",
    ("curve", "remote_endpoint"): "curve_remote_endpoint",
    ("gateway", "concurrency"): "concurrency",
    ("gateway", "retry_attempts"): "retry_attempts",
    ("budget", "knowledge_chars"): "knowledge_budget",
    ("budget", "total_chars"): "total_budget",
}


def load_config(path: str | Path | None = None, **overrides: Any) -> AppConfig:
    """Build the effective config: defaults, then file values, then overrides.

    Overrides equal to None mean "not set on the command line" and are
    ignored.
    """
    cfg = AppConfig()
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        updates: dict[str, Any] = {}
        for (section, key), attr in _FILE_KEYS.items():
            if isinstance(raw.get(section), dict) and key in raw[section]:
                updates[attr] = raw[section][key]
        unknown_sections = set(raw) - {section for section, _ in _FILE_KEYS}
        if unknown_sections:
            raise ConfigError(
                f"unknown config section(s) {sorted(unknown_sections)} in {path}"
            )
        cfg = replace(cfg, **updates)
    effective = {k: v for k, v in overrides.items() if v is not None}
    if effective:
        cfg = replace(cfg, **effective)
    return cfg


def validate_config(cfg: AppConfig, require_paths: Iterable[str] = ()) -> list[ConfigViolation]:
    """Empty list iff every invariant holds; each violation names its key."""
    violations: list[ConfigViolation] = []
    if cfg.k < 1:
        violations.append(ConfigViolation("retrieval.k", cfg.k, "k must be >= 1"))
    if not -1.0 <= cfg.tau <= 1.0:
        violations.append(
            ConfigViolation("retrieval.tau", cfg.tau, "tau must lie in [-1, 1]")
        )
    if cfg.embedding_provider not in ("mock", "http"):
        violations.append(
            ConfigViolation(
                "embedding.provider", cfg.embedding_provider, "must be 'mock' or 'http'"
            )
        )
    if cfg.embedding_provider == "http" and not cfg.embedding_endpoint:
        violations.append(
            ConfigViolation(
                "embedding.endpoint", cfg.embedding_endpoint,
                "required when embedding.provider is 'http'",
            )
        )
    if cfg.embedding_dimension < 1:
        violations.append(
            ConfigViolation("embedding.dimension", cfg.embedding_dimension, "must be >= 1")
        )
    if cfg.concurrency < 1:
        violations.append(
            ConfigViolation("gateway.concurrency", cfg.concurrency, "must be >= 1")
        )
    if cfg.retry_attempts < 1:
        violations.append(
            ConfigViolation("gateway.retry_attempts", cfg.retry_attempts, "must be >= 1")
        )
    if cfg.curve_executor not in ("local", "remote"):
        violations.append(
            ConfigViolation("curve.executor", cfg.curve_executor, "must be 'local' or 'remote'")
        )
    if cfg.knowledge_budget < 0 or cfg.total_budget < 1:
        violations.append(
            ConfigViolation(
                "budget", (cfg.knowledge_budget, cfg.total_budget),
                "knowledge_chars must be >= 0 and total_chars >= 1",
            )
        )

    required = {
        "corpus": ("paths.corpus", cfg.corpus_path),
        "index": ("paths.index", cfg.index_path),
        "specs_dir": ("paths.specs_dir", cfg.specs_dir),
        "fewshot_dir": ("paths.fewshot_dir", cfg.fewshot_dir),
        "mock_script": ("paths.mock_script", cfg.mock_script),
    }
    for name in require_paths:
        key, value = required[name]
        if not value:
            violations.append(ConfigViolation(key, value, "path is required for this command"))
        elif not Path(value).exists():
            violations.append(ConfigViolation(key, value, "path does not exist"))
    return violations
