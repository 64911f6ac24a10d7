"""HTTP client for a chat-completions-compatible backend.

Wire shape: POST {base_url}/v1/chat/completions with a JSON body of
{"model", "messages", "temperature"}; the reply text is read from
choices[0].message.content. Only transport-level failures are retried;
a bad status or malformed body would just resample the model.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import requests

from .errors import (
    BackendTransportError,
    BadStatus,
    MalformedReply,
    Timeout,
    Unparseable,
    Unreachable,
)
from .model import Label
from .prompting import ChatMessage, ExampleBank, PromptSpec, build_messages

CHAT_COMPLETIONS_PATH = "/v1/chat/completions"
_BODY_EXCERPT_CHARS = 200


@dataclass(frozen=True)
class BackendConfig:
    """Connection parameters for one backend."""

    base_url: str = "http://localhost:1234"
    model_id: str = "local-model"
    timeout_s: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")

    @property
    def endpoint(self) -> str:
        return self.base_url.rstrip("/") + CHAT_COMPLETIONS_PATH


@dataclass(frozen=True)
class BackendReply:
    raw_text: str
    latency_s: float
    model_echo: Optional[str] = None

    def __post_init__(self):
        if self.latency_s < 0:
            raise ValueError("latency_s must be non-negative")


def send_chat(
    messages: Sequence[ChatMessage], config: BackendConfig
) -> BackendReply:
    """Perform one chat-completion call, retrying transport failures only.

    Latency is wall clock around the successful attempt; failed attempts
    do not contribute. Raises Unreachable/Timeout after the retry budget
    (max_retries + 1 attempts) is exhausted, BadStatus immediately on a
    non-200 answer, MalformedReply when the body does not carry a reply.
    """
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role != "system":
        raise ValueError("first message must have role=system")

    body = {
        "model": config.model_id,
        "messages": [m.to_wire() for m in messages],
        "temperature": config.temperature,
    }
    last_error: BackendTransportError | None = None
    for _ in range(config.max_retries + 1):
        started = time.perf_counter()
        try:
            response = requests.post(
                config.endpoint, json=body, timeout=config.timeout_s
            )
        except requests.exceptions.Timeout as exc:
            last_error = Timeout(f"backend did not answer within {config.timeout_s}s")
            last_error.__cause__ = exc
            continue
        except requests.exceptions.ConnectionError as exc:
            last_error = Unreachable(f"backend unreachable at {config.endpoint}")
            last_error.__cause__ = exc
            continue
        latency = time.perf_counter() - started

        if response.status_code != 200:
            raise BadStatus(response.status_code, response.text[:_BODY_EXCERPT_CHARS])
        try:
            payload = response.json()
            raw_text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedReply(
                f"response body lacks choices[0].message.content: "
                f"{response.text[:_BODY_EXCERPT_CHARS]!r}"
            ) from exc
        if not isinstance(raw_text, str):
            raise MalformedReply("reply content is not a string")
        model_echo = payload.get("model") if isinstance(payload, dict) else None
        return BackendReply(raw_text=raw_text, latency_s=latency, model_echo=model_echo)

    assert last_error is not None
    raise last_error


def _condense(text: str) -> str:
    # Lowercase and drop everything but letters/digits, so "non-emergency",
    # "non_emergency" and "non emergency" all collapse to one token.
    return "".join(ch for ch in text.lower() if ch.isalnum())


def parse_label(raw_text: str) -> Label:
    """Extract the predicted class from a free-form model reply.

    The negative form is checked first: "non-emergency" contains
    "emergency" as a substring, so the order is load-bearing.
    """
    condensed = _condense(raw_text)
    if "nonemergency" in condensed:
        return Label.NON_EMERGENCY
    if "emergency" in condensed:
        return Label.EMERGENCY
    raise Unparseable(raw_text[:_BODY_EXCERPT_CHARS])


def classify_text(
    input_text: str,
    spec: PromptSpec,
    bank: ExampleBank,
    config: BackendConfig,
) -> tuple[Label, float]:
    """Build the prompt, query the backend, parse the reply.

    Returns the predicted label and the backend round-trip time (prompt
    construction is excluded). An unparseable reply raises Unparseable
    with that round-trip attached.
    """
    messages = build_messages(spec, bank, input_text)
    reply = send_chat(messages, config)
    try:
        label = parse_label(reply.raw_text)
    except Unparseable as exc:
        exc.latency_s = reply.latency_s
        raise
    return label, reply.latency_s
