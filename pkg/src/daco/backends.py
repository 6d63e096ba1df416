"""Chat-completion backends and per-episode usage accounting.

Two implementations of the same `complete()` contract: a remote
OpenAI-compatible HTTP client (multimodal, retrying transport failures) and a
deterministic scripted backend for tests and replay, keyed on
(episode, step, call kind, replan ordinal).
"""

from __future__ import annotations

import base64
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import requests

from .errors import (
    AuthenticationError,
    BackendError,
    HTTPStatusError,
    OracleMissError,
    TransportError,
)

API_KEY_ENV = "DACO_API_KEY"
DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 1000
DEFAULT_RETRIES = 3

CALL_KINDS = ("planning", "replan", "action", "describe", "target")


@dataclass
class TextPart:
    text: str


@dataclass
class ImagePart:
    path: str | None = None
    data: bytes | None = None
    mime: str = "image/png"


Part = TextPart | ImagePart


@dataclass
class ChatMessage:
    role: str  # system | user | assistant
    parts: list[Part]


@dataclass
class CompletionRequest:
    messages: list[ChatMessage]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    call_kind: str = "action"
    # oracle keying, stamped by the episode runner; ignored by remote backends
    episode_id: str | None = None
    step: int | None = None
    replan_ordinal: int = 0


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    estimated: bool = False


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def serialize_request(request: CompletionRequest) -> str:
    """Flatten a request to text: verbatim text parts, placeholders for images."""
    lines = []
    for message in request.messages:
        lines.append(f"[{message.role}]")
        for part in message.parts:
            if isinstance(part, TextPart):
                lines.append(part.text)
            elif part.path is not None:
                lines.append(f"[image: {part.path}]")
            else:
                lines.append(f"[image: inline {len(part.data or b'')} bytes]")
    return "\n".join(lines)


@dataclass
class CallRecord:
    kind: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    estimated: bool = False


class UsageLedger:
    """Per-episode usage sums. Single-writer: owned by one episode runner."""

    def __init__(self, episode_id: str):
        self.episode_id = episode_id
        self.records: list[CallRecord] = []
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self.wall_time = 0.0

    def record(self, kind: str, result: CompletionResult) -> None:
        self.records.append(
            CallRecord(kind, result.prompt_tokens, result.completion_tokens, result.latency, result.estimated)
        )
        self.prompt_tokens += result.prompt_tokens
        self.completion_tokens += result.completion_tokens
        self.wall_time += result.latency

    def verify(self) -> None:
        """Check stored totals against a recomputation over the records."""
        if self.prompt_tokens != sum(r.prompt_tokens for r in self.records):
            raise AssertionError("ledger prompt-token total drifted from its records")
        if self.completion_tokens != sum(r.completion_tokens for r in self.records):
            raise AssertionError("ledger completion-token total drifted from its records")
        if abs(self.wall_time - sum(r.latency for r in self.records)) > 1e-9:
            raise AssertionError("ledger wall-time total drifted from its records")

    def to_dict(self) -> dict:
        return {
            "episode": self.episode_id,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "wall_time": self.wall_time,
            "calls": [
                {
                    "kind": r.kind,
                    "prompt_tokens": r.prompt_tokens,
                    "completion_tokens": r.completion_tokens,
                    "latency": r.latency,
                    "estimated": r.estimated,
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "UsageLedger":
        ledger = cls(str(raw.get("episode", "")))
        for call in raw.get("calls", []):
            ledger.record(
                call.get("kind", ""),
                CompletionResult(
                    text="",
                    prompt_tokens=int(call["prompt_tokens"]),
                    completion_tokens=int(call["completion_tokens"]),
                    latency=float(call["latency"]),
                    estimated=bool(call.get("estimated", False)),
                ),
            )
        return ledger


def _validate_request(request: CompletionRequest) -> None:
    if not request.messages:
        raise BackendError("request has no messages")
    for message in request.messages:
        if not message.parts:
            raise BackendError("chat message has no parts")


def complete(backend, request: CompletionRequest, ledger: UsageLedger | None = None) -> CompletionResult:
    """Dispatch a request and record the result in the episode's ledger."""
    _validate_request(request)
    result = backend.complete(request)
    if ledger is not None:
        ledger.record(request.call_kind, result)
    return result


class ScriptedBackend:
    """Deterministic lookup backend.

    Script records: {"episode", "step", "kind", "replan_ordinal", "response"}.
    "*" in episode or step acts as a wildcard default, matched after exact
    keys, which makes always-X oracles one-liners.
    """

    def __init__(self, entries: Iterable[dict] = ()):
        self._table: dict[tuple, str] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: dict) -> None:
        key = (
            str(entry.get("episode", "*")),
            entry.get("step", "*") if entry.get("step", "*") == "*" else int(entry["step"]),
            str(entry["kind"]),
            entry.get("replan_ordinal", "*") if entry.get("replan_ordinal", "*") == "*" else int(entry["replan_ordinal"]),
        )
        self._table[key] = str(entry["response"])

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ScriptedBackend":
        backend = cls()
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if line:
                backend.add(json.loads(line))
        return backend

    def complete(self, request: CompletionRequest) -> CompletionResult:
        episode = request.episode_id if request.episode_id is not None else "*"
        step = request.step if request.step is not None else "*"
        candidates = (
            (episode, step, request.call_kind, request.replan_ordinal),
            (episode, step, request.call_kind, "*"),
            (episode, "*", request.call_kind, "*"),
            ("*", "*", request.call_kind, "*"),
        )
        for key in candidates:
            if key in self._table:
                text = self._table[key]
                return CompletionResult(
                    text=text,
                    prompt_tokens=estimate_tokens(serialize_request(request)),
                    completion_tokens=estimate_tokens(text),
                    latency=0.0,
                    estimated=True,
                )
        raise OracleMissError(
            f"no scripted response for episode={episode!r} step={step!r} "
            f"kind={request.call_kind!r} replan_ordinal={request.replan_ordinal!r}"
        )


class RemoteBackend:
    """OpenAI-compatible /v1/chat/completions client with multimodal messages.

    Transient transport failures are retried up to `max_retries` times with
    exponential backoff; HTTP errors are surfaced immediately with the body.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        max_retries: int = DEFAULT_RETRIES,
        timeout: float = 120.0,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff = backoff

    def __repr__(self) -> str:  # never leak the key
        return f"RemoteBackend(endpoint={self.endpoint!r}, model={self.model!r})"

    def _encode_part(self, part: Part) -> dict:
        if isinstance(part, TextPart):
            return {"type": "text", "text": part.text}
        if part.path is not None:
            path = Path(part.path)
            if not path.is_file():
                raise BackendError(f"image not readable: {part.path}")
            data = path.read_bytes()
            mime = "image/jpeg" if path.suffix.lower() in (".jpg", ".jpeg") else "image/png"
        else:
            data = part.data or b""
            mime = part.mime
        encoded = base64.b64encode(data).decode("ascii")
        return {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{encoded}"}}

    def complete(self, request: CompletionRequest) -> CompletionResult:
        payload = {
            "model": self.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [
                {"role": m.role, "content": [self._encode_part(p) for p in m.parts]}
                for m in request.messages
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        url = f"{self.endpoint}/v1/chat/completions"
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            start = time.monotonic()
            try:
                response = requests.post(url, json=payload, headers=headers, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
                continue
            latency = time.monotonic() - start
            if response.status_code in (401, 403):
                raise AuthenticationError(response.status_code, response.text)
            if not (200 <= response.status_code < 300):
                raise HTTPStatusError(response.status_code, response.text)
            return self._parse_response(request, response, latency)
        raise TransportError(
            f"transport failure after {self.max_retries + 1} attempts: {last_exc}"
        ) from last_exc

    def _parse_response(self, request: CompletionRequest, response, latency: float) -> CompletionResult:
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {response.text[:500]}") from exc
        usage = body.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return CompletionResult(
                text=text,
                prompt_tokens=int(usage["prompt_tokens"]),
                completion_tokens=int(usage["completion_tokens"]),
                latency=latency,
            )
        return CompletionResult(
            text=text,
            prompt_tokens=estimate_tokens(serialize_request(request)),
            completion_tokens=estimate_tokens(text),
            latency=latency,
            estimated=True,
        )


def report_usage(ledgers: Sequence[UsageLedger]) -> dict:
    """Averages in the cost-report shape: time and tokens per task, latency per call."""
    if not ledgers:
        raise BackendError("cannot report usage over an empty set of ledgers")
    tasks = len(ledgers)
    all_calls = [r for ledger in ledgers for r in ledger.records]
    return {
        "tasks": tasks,
        "calls": len(all_calls),
        "time_per_task": sum(l.wall_time for l in ledgers) / tasks,
        "prompt_tokens_per_task": sum(l.prompt_tokens for l in ledgers) / tasks,
        "completion_tokens_per_task": sum(l.completion_tokens for l in ledgers) / tasks,
        "latency_per_call": (sum(r.latency for r in all_calls) / len(all_calls)) if all_calls else 0.0,
        "estimated_counts": any(r.estimated for r in all_calls),
    }
