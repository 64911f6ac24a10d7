"""HTTP front door: accepts classification requests, delegates to the
backend client, and keeps only anonymized aggregate counters.

No-retention contract: the input text lives only for the duration of its
request. Nothing here logs, stores, or snapshots message content; counters
and latency samples are plain numbers.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .client import BackendConfig, classify_text
from .errors import (
    BackendTransportError,
    BadStatus,
    EmptyInput,
    MalformedReply,
    PortInUse,
    Unparseable,
)
from .model import Label, LatencyStats, latency_stats
from .prompting import ExampleBank, PromptSpec

logger = logging.getLogger(__name__)

MAX_BODY_BYTES = 64 * 1024


@dataclass(frozen=True)
class GatewayConfig:
    listen_port: int = 9111
    backend: BackendConfig = field(default_factory=BackendConfig)
    platform_label: str = "local"
    prompt: PromptSpec = field(default_factory=PromptSpec)
    bank_path: Optional[str | Path] = None
    snapshot_path: Optional[str | Path] = None

    def __post_init__(self):
        if not 1 <= self.listen_port <= 65535:
            raise ValueError(f"listen_port {self.listen_port} out of range")


@dataclass(frozen=True)
class AggregateCounters:
    """Anonymized usage totals; deliberately holds no request text."""

    total_requests: int = 0
    emergency_count: int = 0
    non_emergency_count: int = 0
    error_count: int = 0
    latency_samples: tuple[float, ...] = ()

    def __post_init__(self):
        buckets = self.emergency_count + self.non_emergency_count + self.error_count
        if self.total_requests != buckets:
            raise ValueError("total_requests must equal the bucket sum")

    def latency(self) -> Optional[LatencyStats]:
        if not self.latency_samples:
            return None
        return latency_stats(self.latency_samples)

    def to_json(self) -> dict:
        stats = self.latency()
        return {
            "total_requests": self.total_requests,
            "emergency_count": self.emergency_count,
            "non_emergency_count": self.non_emergency_count,
            "error_count": self.error_count,
            "latency": None
            if stats is None
            else {
                "count": stats.count,
                "min_s": stats.min_s,
                "max_s": stats.max_s,
                "mean_s": stats.mean_s,
                "p50_s": stats.p50_s,
                "p95_s": stats.p95_s,
            },
        }


def record_aggregate(
    counters: AggregateCounters,
    outcome: Optional[Label],
    latency_s: Optional[float] = None,
) -> AggregateCounters:
    """Return counters with exactly one bucket incremented.

    ``outcome`` None means the request errored; latency accumulates on
    successful classifications only.
    """
    if outcome is None:
        return replace(
            counters,
            total_requests=counters.total_requests + 1,
            error_count=counters.error_count + 1,
        )
    if latency_s is None or latency_s < 0:
        raise ValueError("successful classifications require latency_s >= 0")
    samples = counters.latency_samples + (latency_s,)
    if outcome is Label.EMERGENCY:
        return replace(
            counters,
            total_requests=counters.total_requests + 1,
            emergency_count=counters.emergency_count + 1,
            latency_samples=samples,
        )
    return replace(
        counters,
        total_requests=counters.total_requests + 1,
        non_emergency_count=counters.non_emergency_count + 1,
        latency_samples=samples,
    )


class Gateway:
    """Request handling core, independent of the HTTP plumbing.

    Counter updates are atomic under a lock; backend calls from concurrent
    requests proceed in parallel outside it.
    """

    def __init__(self, config: GatewayConfig, bank: Optional[ExampleBank] = None):
        if bank is None:
            if config.bank_path is None:
                raise ValueError("gateway needs an example bank or a bank_path")
            from .dataset import load_phrases

            bank = ExampleBank.from_phrases(load_phrases(config.bank_path))
        self.config = config
        self._bank = bank
        self._lock = threading.Lock()
        self._counters = AggregateCounters()

    @property
    def counters(self) -> AggregateCounters:
        with self._lock:
            return self._counters

    def _record(self, outcome: Optional[Label], latency_s: Optional[float] = None):
        with self._lock:
            self._counters = record_aggregate(self._counters, outcome, latency_s)

    def handle_classify(self, body: bytes) -> tuple[int, dict]:
        """Classify one request body; returns (status, response payload)."""
        if len(body) > MAX_BODY_BYTES:
            self._record(None)
            return 413, {"error": "payload_too_large"}
        try:
            payload = json.loads(body)
        except ValueError:
            self._record(None)
            return 400, {"error": "invalid_json"}
        message = payload.get("message") if isinstance(payload, dict) else None
        if not isinstance(message, str) or not message.strip():
            self._record(None)
            return 400, {"error": "invalid_json"}

        backend = self.config.backend
        override = payload.get("model")
        if isinstance(override, str) and override:
            backend = replace(backend, model_id=override)

        try:
            label, latency_s = classify_text(
                message, self.config.prompt, self._bank, backend
            )
        except Unparseable:
            self._record(None)
            return 422, {"error": "unparseable_model_output"}
        except (BackendTransportError, BadStatus, MalformedReply):
            self._record(None)
            return 502, {"error": "backend_unavailable"}
        except EmptyInput:
            self._record(None)
            return 400, {"error": "invalid_json"}

        self._record(label, latency_s)
        return 200, {
            "classification": label.value,
            "latency_seconds": latency_s,
            "model": backend.model_id,
            "platform": self.config.platform_label,
        }

    def handle_health(self) -> tuple[int, dict]:
        """Aggregates only; never any request content."""
        counters = self.counters
        return 200, {
            "status": "ok",
            "model": self.config.backend.model_id,
            "k_examples": self.config.prompt.k_examples,
            "requests_served": counters.total_requests,
        }

    def write_snapshot(self) -> Optional[Path]:
        """Persist the aggregate counters on clean shutdown, if configured."""
        if self.config.snapshot_path is None:
            return None
        path = Path(self.config.snapshot_path)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.counters.to_json(), handle, indent=2)
            handle.write("\n")
        return path


class GatewayServer:
    """Threaded HTTP wrapper around a Gateway."""

    def __init__(
        self,
        config: GatewayConfig,
        bank: Optional[ExampleBank] = None,
        host: str = "127.0.0.1",
        port: Optional[int] = None,
    ):
        # port=0 binds an ephemeral port (useful in tests); None uses config.
        self.gateway = Gateway(config, bank=bank)
        self._host = host
        self._port = config.listen_port if port is None else port
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

    def start(self) -> "GatewayServer":
        handler = _make_handler(self.gateway)
        try:
            self._httpd = ThreadingHTTPServer((self._host, self._port), handler)
        except OSError as exc:
            raise PortInUse(
                f"cannot bind gateway to port {self._port}: {exc}"
            ) from exc
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="gateway", daemon=True
        )
        self._thread.start()
        logger.info("gateway listening on %s", self.base_url)
        return self

    def shutdown(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        snapshot = self.gateway.write_snapshot()
        if snapshot is not None:
            logger.info("wrote counter snapshot to %s", snapshot)

    def serve_forever(self) -> None:
        """Blocking variant for the CLI; shuts down cleanly on interrupt."""
        if self._httpd is None:
            self.start()
        assert self._thread is not None
        try:
            self._thread.join()
        except KeyboardInterrupt:
            self.shutdown()

    def __enter__(self) -> "GatewayServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def _make_handler(gateway: Gateway):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            # method/path/status only; request bodies never reach a log
            logger.debug("gateway: %s", fmt % args)

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> bytes:
            # Drain the declared length but keep at most one chunk past the
            # cap, so oversized bodies are rejected with bounded memory.
            try:
                remaining = int(self.headers.get("Content-Length", 0))
            except ValueError:
                remaining = 0
            kept = b""
            while remaining > 0:
                chunk = self.rfile.read(min(remaining, 65536))
                if not chunk:
                    break
                remaining -= len(chunk)
                if len(kept) <= MAX_BODY_BYTES:
                    kept += chunk
            return kept

        def do_POST(self):
            if self.path != "/classify":
                self._send_json(404, {"error": "not_found"})
                return
            status, payload = gateway.handle_classify(self._read_body())
            self._send_json(status, payload)

        def do_GET(self):
            if self.path != "/health":
                self._send_json(404, {"error": "not_found"})
                return
            status, payload = gateway.handle_health()
            self._send_json(status, payload)

    return Handler


def run_gateway(
    config: GatewayConfig,
    bank: Optional[ExampleBank] = None,
    host: str = "127.0.0.1",
    port: Optional[int] = None,
) -> GatewayServer:
    """Start a gateway server and return the running handle."""
    return GatewayServer(config, bank=bank, host=host, port=port).start()
