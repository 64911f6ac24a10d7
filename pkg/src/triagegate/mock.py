"""Deterministic stand-in backend speaking the chat-completions protocol.

An ErrorProfile pins exactly which dataset phrases get a wrong or garbled
answer, so a full evaluation against this server produces a bit-exact,
reproducible confusion matrix: tp = E - |flip_emergency|, fn =
|flip_emergency|, fp = |flip_non_emergency|, tn = N - |flip_non_emergency|.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping, Sequence, Union

from .errors import PortInUse
from .model import Label, LabeledPhrase
from .prompting import ChatMessage

logger = logging.getLogger(__name__)

GIBBERISH_REPLY = "CANNOT_CLASSIFY"

# Phrase indices refer to positions in the dataset sequence the server was
# started with, so a (profile, dataset file) pair fully determines behavior.


@dataclass(frozen=True)
class ErrorProfile:
    """Which phrases to deliberately misclassify or garble, plus a delay."""

    name: str
    flip_emergency: frozenset[int] = frozenset()
    flip_non_emergency: frozenset[int] = frozenset()
    unparseable: frozenset[int] = frozenset()
    injected_delay_s: float = 0.0

    def __post_init__(self):
        if self.injected_delay_s < 0:
            raise ValueError("injected_delay_s must be non-negative")
        if self.flip_emergency & self.flip_non_emergency:
            raise ValueError("flip sets must be disjoint")
        overlap = (self.flip_emergency | self.flip_non_emergency) & self.unparseable
        if overlap:
            raise ValueError(f"indices both flipped and unparseable: {sorted(overlap)}")

    def with_delay(self, delay_s: float) -> "ErrorProfile":
        return replace(self, injected_delay_s=delay_s)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "flip_emergency": sorted(self.flip_emergency),
            "flip_non_emergency": sorted(self.flip_non_emergency),
            "unparseable": sorted(self.unparseable),
            "injected_delay_s": self.injected_delay_s,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ErrorProfile":
        return cls(
            name=payload["name"],
            flip_emergency=frozenset(payload.get("flip_emergency", [])),
            flip_non_emergency=frozenset(payload.get("flip_non_emergency", [])),
            unparseable=frozenset(payload.get("unparseable", [])),
            injected_delay_s=payload.get("injected_delay_s", 0.0),
        )


IDENTITY_PROFILE = ErrorProfile(name="identity")

# A keyed profile selects by the example count k inferred from the request's
# message count (len == 2k + 2), which lets one server replay per-k fixtures
# during a sweep.
ProfileLike = Union[ErrorProfile, Mapping[int, ErrorProfile]]


def save_profile(profile: ErrorProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(profile.to_json(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_profile_file(path: str | Path) -> ErrorProfile:
    with open(path, encoding="utf-8") as handle:
        return ErrorProfile.from_json(json.load(handle))


def ground_truth_lookup(
    dataset: Sequence[LabeledPhrase],
) -> dict[str, tuple[Label, int]]:
    """Map phrase text to (label, dataset index); texts must be unique."""
    lookup: dict[str, tuple[Label, int]] = {}
    for index, phrase in enumerate(dataset):
        if phrase.text in lookup:
            raise ValueError(f"duplicate phrase text in dataset: {phrase.text!r}")
        lookup[phrase.text] = (phrase.label, index)
    return lookup


def mock_reply(
    messages: Sequence[ChatMessage],
    profile: ErrorProfile,
    lookup: Mapping[str, tuple[Label, int]],
) -> str:
    """Answer the final user message per the profile; total, never raises.

    Unknown phrases answer "non_emergency" so a dataset/fixture mismatch
    shows up as visible false negatives instead of silently passing.
    """
    if not messages or messages[-1].role != "user":
        raise ValueError("last message must have role=user")
    if profile.injected_delay_s > 0:
        time.sleep(profile.injected_delay_s)
    entry = lookup.get(messages[-1].content)
    if entry is None:
        return Label.NON_EMERGENCY.value
    label, index = entry
    if index in profile.unparseable:
        return GIBBERISH_REPLY
    if label is Label.EMERGENCY and index in profile.flip_emergency:
        return Label.NON_EMERGENCY.value
    if label is Label.NON_EMERGENCY and index in profile.flip_non_emergency:
        return Label.EMERGENCY.value
    return label.value


def _select_profile(profile: ProfileLike, message_count: int) -> ErrorProfile:
    if isinstance(profile, ErrorProfile):
        return profile
    k = max((message_count - 2) // 2, 0)
    return profile.get(k, IDENTITY_PROFILE)


class MockBackendServer:
    """Threaded HTTP server for the chat-completions wire protocol.

    Read-only after start; safe for concurrent requests. Use as a context
    manager or call start()/shutdown() explicitly.
    """

    def __init__(
        self,
        profile: ProfileLike,
        dataset: Sequence[LabeledPhrase],
        port: int = 1234,
        host: str = "127.0.0.1",
    ):
        self._profile = profile
        self._lookup = ground_truth_lookup(dataset)
        self._host = host
        self._requested_port = port
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        if self._httpd is None:
            raise RuntimeError("server not started")
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self._host}:{self.port}"

    def start(self) -> "MockBackendServer":
        handler = _make_handler(self._profile, self._lookup)
        try:
            self._httpd = ThreadingHTTPServer((self._host, self._requested_port), handler)
        except OSError as exc:
            raise PortInUse(
                f"cannot bind mock backend to port {self._requested_port}: {exc}"
            ) from exc
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="mock-backend", daemon=True
        )
        self._thread.start()
        logger.info("mock backend listening on %s", self.base_url)
        return self

    def shutdown(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "MockBackendServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def _make_handler(profile: ProfileLike, lookup: Mapping[str, tuple[Label, int]]):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # no request bodies in logs
            logger.debug("mock: %s", fmt % args)

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path != "/v1/chat/completions":
                self._send_json(404, {"error": "not_found"})
                return
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            try:
                request = json.loads(raw)
                wire_messages = request["messages"]
                messages = [
                    ChatMessage(role=m["role"], content=m["content"])
                    for m in wire_messages
                ]
            except (ValueError, KeyError, TypeError):
                self._send_json(400, {"error": "invalid_request"})
                return
            selected = _select_profile(profile, len(messages))
            content = mock_reply(messages, selected, lookup)
            self._send_json(
                200,
                {
                    "id": "mock-chat-1",
                    "object": "chat.completion",
                    "model": request.get("model", "mock"),
                    "choices": [
                        {
                            "index": 0,
                            "message": {"role": "assistant", "content": content},
                            "finish_reason": "stop",
                        }
                    ],
                },
            )

    return Handler


def run_mock_server(
    profile: ProfileLike,
    dataset: Sequence[LabeledPhrase],
    port: int = 1234,
    host: str = "127.0.0.1",
) -> MockBackendServer:
    """Start a mock backend and return the running handle."""
    return MockBackendServer(profile, dataset, port=port, host=host).start()
