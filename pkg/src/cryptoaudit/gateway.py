"""Uniform chat-model contract: templated requests, retries, scripted mocks.

Temperature defaults to 0 everywhere so that live behaviour stays as close
to deterministic as the backend allows, and so scripted-mock runs are a
pure function of their inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from .errors import (
    GatewayError,
    GatewayExhaustedError,
    StructuredOutputError,
    TransientBackendError,
    UnscriptedCallError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChatRequest:
    template_id: str
    rendered_prompt: str
    model_tag: str = "default"
    temperature: float = 0.0
    max_output: int = 4096

    def __post_init__(self) -> None:
        if not self.rendered_prompt:
            raise ValueError("rendered_prompt must be non-empty")
        if self.max_output < 1:
            raise ValueError("max_output must be positive")


def prompt_hash(rendered_prompt: str) -> str:
    return hashlib.sha256(rendered_prompt.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# CoT prompt scaffold: Instruction, Example, Notice, then the target code
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CotPrompt:
    instruction: str  # principle and reasoning steps
    example: str      # worked code walkthrough
    notice: str       # output format and key reminders
    target_code: str


def render_cot_prompt(p: CotPrompt) -> str:
    for name in ("instruction", "example", "notice"):
        if not getattr(p, name).strip():
            raise ValueError(f"CoT prompt section {name!r} is empty")
    if not p.target_code:
        raise ValueError("CoT prompt has no target code")
    return (
        "## Instruction\n"
        f"{p.instruction.rstrip()}\n\n"
        "## Example\n"
        f"{p.example.rstrip()}\n\n"
        "## Notice\n"
        f"{p.notice.rstrip()}\n\n"
        "## Target Code\n"
        "```\n"
        f"{p.target_code.rstrip()}\n"
        "```\n"
    )


# --------------------------------------------------------------------------
# backends
# --------------------------------------------------------------------------


class ChatBackend:
    tag: str = ""

    def complete(self, req: ChatRequest) -> str:
        raise NotImplementedError


class HttpChatBackend(ChatBackend):
    """JSON-over-HTTP chat-completion wire shape: messages in, text out."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "CRYPTOAUDIT_API_KEY",
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.tag = model

    def complete(self, req: ChatRequest) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": req.rendered_prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output,
        }
        try:
            response = requests.post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransientBackendError(f"request failed: {exc}") from exc
        if response.status_code >= 500:
            raise TransientBackendError(f"backend returned {response.status_code}")
        if response.status_code >= 400:
            raise GatewayError(f"backend rejected request ({response.status_code}): {response.text[:500]}")
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"unexpected completion payload: {exc}") from exc
        usage = payload.get("usage")
        if isinstance(usage, dict):
            logger.info(
                "chat usage template=%s model=%s prompt_tokens=%s completion_tokens=%s",
                req.template_id, self.model,
                usage.get("prompt_tokens"), usage.get("completion_tokens"),
            )
        return text


@dataclass
class MockRecord:
    template_id: str
    prompt_sha256: str  # full hash, or "*" to match any prompt for the template
    reply: str


class ScriptedMockBackend(ChatBackend):
    """Replays recorded replies keyed by (template_id, prompt hash).

    Strict by design: a request with no matching record raises
    UnscriptedCallError, which is how tests catch prompt drift.
    """

    tag = "scripted-mock"

    def __init__(self, records: Sequence[MockRecord]):
        self._exact: dict[tuple[str, str], str] = {}
        self._wildcard: dict[str, str] = {}
        for record in records:
            if record.prompt_sha256 == "*":
                self._wildcard[record.template_id] = record.reply
            else:
                self._exact[(record.template_id, record.prompt_sha256)] = record.reply

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedMockBackend":
        return cls(load_mock_script(path))

    def complete(self, req: ChatRequest) -> str:
        digest = prompt_hash(req.rendered_prompt)
        reply = self._exact.get((req.template_id, digest))
        if reply is None:
            reply = self._wildcard.get(req.template_id)
        if reply is None:
            raise UnscriptedCallError(
                f"unscripted call: template={req.template_id!r} prompt_sha256={digest}"
            )
        return reply


class RecordingBackend(ChatBackend):
    """Wraps a reply function and records every exchange as MockRecords."""

    tag = "recording"

    def __init__(self, reply_fn: Callable[[ChatRequest], str]):
        self._reply_fn = reply_fn
        self.records: list[MockRecord] = []

    def complete(self, req: ChatRequest) -> str:
        reply = self._reply_fn(req)
        self.records.append(
            MockRecord(req.template_id, prompt_hash(req.rendered_prompt), reply)
        )
        return reply


def load_mock_script(path: str | Path) -> list[MockRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                records.append(
                    MockRecord(raw["template_id"], raw["prompt_sha256"], raw["reply"])
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise GatewayError(f"bad mock script line {line_number}: {exc}") from exc
    return records


def save_mock_script(records: Sequence[MockRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(
                json.dumps(
                    {
                        "template_id": record.template_id,
                        "prompt_sha256": record.prompt_sha256,
                        "reply": record.reply,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            fh.write("\n")


# --------------------------------------------------------------------------
# the chat call with retries
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    delays: tuple[float, ...] = (1.0, 2.0, 4.0)


@dataclass
class ChatLogEntry:
    template_id: str
    model_tag: str
    attempts: int
    duration_s: float
    prompt_chars: int
    reply_chars: int


def chat(
    req: ChatRequest,
    backend: ChatBackend,
    retry: RetryPolicy = RetryPolicy(),
    audit_log: list[ChatLogEntry] | None = None,
) -> str:
    """Send one request, retrying transient failures with backoff."""
    started = time.perf_counter()
    last_error: Exception | None = None
    for attempt in range(1, retry.attempts + 1):
        try:
            reply = backend.complete(req)
        except TransientBackendError as exc:
            last_error = exc
            logger.warning(
                "chat transient failure template=%s model=%s attempt=%d/%d: %s",
                req.template_id, req.model_tag, attempt, retry.attempts, exc,
            )
            if attempt < retry.attempts:
                delay = retry.delays[min(attempt - 1, len(retry.delays) - 1)]
                if delay > 0:
                    time.sleep(delay)
            continue
        duration = time.perf_counter() - started
        logger.info(
            "chat template=%s model=%s attempts=%d duration=%.3fs prompt_chars=%d reply_chars=%d",
            req.template_id, req.model_tag, attempt, duration,
            len(req.rendered_prompt), len(reply),
        )
        if audit_log is not None:
            audit_log.append(
                ChatLogEntry(
                    template_id=req.template_id,
                    model_tag=req.model_tag,
                    attempts=attempt,
                    duration_s=duration,
                    prompt_chars=len(req.rendered_prompt),
                    reply_chars=len(reply),
                )
            )
        return reply
    raise GatewayExhaustedError(
        f"template {req.template_id!r} failed after {retry.attempts} attempts: {last_error}"
    )


@dataclass
class Gateway:
    """Backend plus call policy; the handle pipeline operations receive."""

    backend: ChatBackend
    model_tag: str = "default"
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_output: int = 4096
    audit_log: list[ChatLogEntry] = field(default_factory=list)

    def ask(self, template_id: str, prompt: str, temperature: float = 0.0) -> str:
        req = ChatRequest(
            template_id=template_id,
            rendered_prompt=prompt,
            model_tag=self.model_tag,
            temperature=temperature,
            max_output=self.max_output,
        )
        return chat(req, self.backend, self.retry, self.audit_log)


# --------------------------------------------------------------------------
# structured output parsing
# --------------------------------------------------------------------------

_JSON_FENCE_RE = re.compile(r"```(?:json)?[ \t]*\n(.*?)```", re.DOTALL)


def parse_json_block(text: str) -> dict[str, Any]:
    """Extract the mandated fenced JSON block from a model reply.

    Lenient about prose before/after the fence, strict about the block
    itself: malformed JSON inside the fence is an error, not a fallback.
    """
    match = _JSON_FENCE_RE.search(text)
    if match is not None:
        inner = match.group(1)
    else:
        stripped = text.strip()
        if stripped.startswith("{"):
            inner = stripped
        else:
            raise StructuredOutputError("no fenced JSON block in reply", raw_text=text)
    try:
        obj = json.loads(inner)
    except json.JSONDecodeError as exc:
        raise StructuredOutputError(f"invalid JSON inside block: {exc}", raw_text=text) from exc
    if not isinstance(obj, dict):
        raise StructuredOutputError("expected a JSON object in block", raw_text=text)
    return obj
