"""The Managing capability: HTTP ingress, result push, and the registry.

The gateway is the only stateful spot in the mesh, and its state is
deliberately small: a synchronized map of in-flight correlation ids plus
the latest capability announcements. A solve request becomes a mesh
envelope whose slip bottoms out at the managing reply step; the reply
and error queues feed a server-push event stream (Server-Sent Events —
the event shape, not the protocol, is the contract). Every accepted
request gets exactly one terminal event: done, failed, or a gateway
timeout reported as a failure.
"""

from __future__ import annotations

import json
import mimetypes
import os
import queue
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from .broker import BrokerError
from .messaging import CorrelationId, Envelope, new_request
from .pddl import encode_text
from .runtime import (
    ANNOUNCE_KEY,
    ERROR_KEY,
    MANAGING_TOPIC,
    MONITORING_TOPIC,
    REPLY_KEY,
    make_announcement,
    register,
)
from .topology import MANAGING_DESCRIPTOR, REPLY_STEP, SOLVE_KEY, SOLVING_TOPIC

DEFAULT_HTTP_PORT = 8080
DEFAULT_REQUEST_TIMEOUT_S = 60.0
REPLY_QUEUE = "q-managing-reply"
ERROR_QUEUE = "q-managing-error"
MONITOR_QUEUE = "q-managing-monitor"

_REQUIRED_SOLVE_FIELDS = ("domain", "problem", "planner", "language")


class Gateway:
    """HTTP server plus the broker-side consumers that feed it."""

    def __init__(
        self,
        broker: Any,
        port: int = 0,
        request_timeout_s: float = DEFAULT_REQUEST_TIMEOUT_S,
        heartbeat_seconds: float = 5.0,
        static_dir: str | os.PathLike | None = None,
    ):
        self.broker = broker
        self.request_timeout_s = request_timeout_s
        self.heartbeat_seconds = heartbeat_seconds
        self.static_dir = Path(static_dir).resolve() if static_dir else None

        self._lock = threading.Lock()
        self._pending: dict[str, float] = {}
        self._records: dict[tuple[str, str], dict[str, Any]] = {}
        self._listeners: list[queue.Queue] = []
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._sessions: list[Any] = []

        handler = _make_handler(self)
        self._server = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self._server.daemon_threads = True

    # -- lifecycle ------------------------------------------------------

    def start(self) -> "Gateway":
        # Accept solves even before a solver binds: the publish then counts
        # as a drop and the sweeper reports the timeout.
        self.broker.declare_topic(SOLVING_TOPIC)
        self.broker.declare_topic(MANAGING_TOPIC)
        self.broker.declare_topic(MONITORING_TOPIC)
        self.broker.declare_queue(REPLY_QUEUE)
        self.broker.bind(REPLY_QUEUE, MANAGING_TOPIC, REPLY_KEY)
        self.broker.declare_queue(ERROR_QUEUE)
        self.broker.bind(ERROR_QUEUE, MANAGING_TOPIC, ERROR_KEY)
        self.broker.declare_queue(MONITOR_QUEUE)
        self.broker.bind(MONITOR_QUEUE, MONITORING_TOPIC, ANNOUNCE_KEY)
        # Announce only once the monitor queue can catch it, so the
        # gateway's own record is in the registry from the first moment.
        register(MANAGING_DESCRIPTOR, self.broker, self.heartbeat_seconds)

        for name, target in (
            ("reply", lambda: self._consume(REPLY_QUEUE, self._on_reply)),
            ("error", lambda: self._consume(ERROR_QUEUE, self._on_error)),
            ("monitor", lambda: self._consume(MONITOR_QUEUE, self._on_announce)),
            ("sweeper", self._sweep_timeouts),
            ("announce", self._heartbeat),
            ("http", self._server.serve_forever),
        ):
            thread = threading.Thread(target=target, name=f"gateway-{name}", daemon=True)
            thread.start()
            self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._stop.set()
        for session in self._sessions:
            try:
                session.close()
            except BrokerError:
                pass
        self._server.shutdown()
        self._server.server_close()
        with self._lock:
            listeners = list(self._listeners)
        for listener in listeners:
            listener.put(None)
        for thread in self._threads:
            if thread is not threading.current_thread():
                thread.join(timeout=3)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    # -- the pending registry and event stream ---------------------------

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    def _settle(self, correlation_id: str) -> bool:
        """Claim the single terminal transition for a correlation id."""
        with self._lock:
            return self._pending.pop(correlation_id, None) is not None

    def _broadcast(self, event: dict[str, Any]) -> None:
        with self._lock:
            listeners = list(self._listeners)
        for listener in listeners:
            listener.put(event)

    def _attach_listener(self) -> queue.Queue:
        listener: queue.Queue = queue.Queue()
        with self._lock:
            self._listeners.append(listener)
        return listener

    def _detach_listener(self, listener: queue.Queue) -> None:
        with self._lock:
            if listener in self._listeners:
                self._listeners.remove(listener)

    # -- broker consumers -------------------------------------------------

    def _consume(self, queue_name: str, on_envelope) -> None:
        try:
            session = self.broker.subscribe(queue_name)
        except BrokerError:
            return
        self._sessions.append(session)
        while not self._stop.is_set():
            try:
                delivery = session.next(timeout=0.2)
            except BrokerError:
                return
            if delivery is None:
                continue
            try:
                on_envelope(delivery.envelope)
            finally:
                try:
                    session.ack(delivery.delivery_tag)
                except BrokerError:
                    return

    def _on_reply(self, envelope: Envelope) -> None:
        correlation_id = envelope.correlation_id.value
        if not self._settle(correlation_id):
            return  # unknown or already settled: dropped
        payload = envelope.payload if isinstance(envelope.payload, dict) else {}
        event = {
            "correlationId": correlation_id,
            "status": "done",
            "outcome": payload.get("outcome"),
            "plan": payload.get("plan", []),
            "length": payload.get("length", 0),
            "stats": payload.get("stats", {}),
        }
        if "steps" in payload:
            event["steps"] = payload["steps"]
        self._broadcast(event)

    def _on_error(self, envelope: Envelope) -> None:
        info = envelope.error_info
        correlation_id = envelope.correlation_id.value
        if info is None or not self._settle(correlation_id):
            return
        self._broadcast(
            {
                "correlationId": correlation_id,
                "status": "failed",
                "error": {
                    "origin": info.origin_capability,
                    "message": info.message,
                    "context": list(info.context),
                },
            }
        )

    def _on_announce(self, envelope: Envelope) -> None:
        payload = envelope.payload
        if not isinstance(payload, dict) or "name" not in payload:
            return
        key = (str(payload.get("name")), str(payload.get("instanceGroup")))
        with self._lock:
            self._records[key] = {"descriptor": dict(payload), "lastAnnounceMs": int(time.time() * 1000)}

    def _sweep_timeouts(self) -> None:
        while not self._stop.wait(0.25):
            deadline = time.monotonic() - self.request_timeout_s
            with self._lock:
                expired = [cid for cid, submitted in self._pending.items() if submitted < deadline]
            for correlation_id in expired:
                if self._settle(correlation_id):
                    self._broadcast(
                        {
                            "correlationId": correlation_id,
                            "status": "failed",
                            "error": {
                                "origin": "gateway",
                                "message": f"no terminal reply within {self.request_timeout_s:g}s",
                                "context": ["timeout"],
                            },
                        }
                    )

    def _heartbeat(self) -> None:
        while not self._stop.wait(self.heartbeat_seconds):
            try:
                self.broker.publish(
                    MONITORING_TOPIC, ANNOUNCE_KEY, make_announcement(MANAGING_DESCRIPTOR, self.heartbeat_seconds)
                )
            except BrokerError:
                if self._stop.is_set():
                    return

    # -- HTTP operations ----------------------------------------------------

    def submit_solve(self, body: dict[str, Any]) -> str:
        payload = {
            "planner": body["planner"],
            "language": body["language"],
            "domain": encode_text(body["domain"]),
            "problem": encode_text(body["problem"]),
        }
        correlation_id = CorrelationId.fresh()
        envelope = new_request(payload, "solving-request/1", REPLY_STEP, correlation_id=correlation_id)
        with self._lock:
            self._pending[correlation_id.value] = time.monotonic()
        try:
            self.broker.publish(SOLVING_TOPIC, SOLVE_KEY, envelope)
        except BrokerError:
            with self._lock:
                self._pending.pop(correlation_id.value, None)
            raise
        return correlation_id.value

    def capabilities_view(self) -> dict[str, Any]:
        snapshot = self.broker.introspect()  # raises if the broker is gone
        now_ms = int(time.time() * 1000)
        records = []
        with self._lock:
            items = sorted(self._records.items())
        for (_name, _group), record in items:
            descriptor = record["descriptor"]
            heartbeat = float(descriptor.get("heartbeatSeconds") or 5.0)
            age_ms = now_ms - record["lastAnnounceMs"]
            records.append(
                {
                    **descriptor,
                    "lastAnnounceMs": record["lastAnnounceMs"],
                    "live": age_ms <= 3 * heartbeat * 1000,
                }
            )
        return {"capabilities": records, "broker": snapshot}

    def health_view(self) -> dict[str, Any]:
        try:
            self.broker.introspect()
            connected = True
        except BrokerError:
            connected = False
        return {
            "status": "ok" if connected else "degraded",
            "brokerConnected": connected,
            "pendingCount": self.pending_count(),
        }


def _make_handler(gateway: Gateway):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # tests stay quiet
            pass

        def _send_json(self, code: int, doc: dict[str, Any]) -> None:
            body = json.dumps(doc, sort_keys=True).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path != "/api/solve":
                self._send_json(404, {"error": "unknown path"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                self._send_json(400, {"error": "body must be a JSON object"})
                return
            if not isinstance(body, dict):
                self._send_json(400, {"error": "body must be a JSON object"})
                return
            for field in _REQUIRED_SOLVE_FIELDS:
                if field not in body or not isinstance(body[field], str):
                    self._send_json(400, {"error": f"missing field {field!r}"})
                    return
            if not body["domain"].strip() or not body["problem"].strip():
                self._send_json(400, {"error": "domain and problem must be non-empty"})
                return
            try:
                correlation_id = gateway.submit_solve(body)
            except BrokerError:
                self._send_json(503, {"error": "broker unreachable"})
                return
            self._send_json(202, {"correlationId": correlation_id})

        def do_GET(self):
            if self.path == "/api/health":
                self._send_json(200, gateway.health_view())
            elif self.path == "/api/capabilities":
                try:
                    self._send_json(200, gateway.capabilities_view())
                except BrokerError:
                    self._send_json(503, {"error": "broker unreachable"})
            elif self.path == "/api/events":
                self._stream_events()
            else:
                self._serve_static()

        def _stream_events(self):
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            listener = gateway._attach_listener()
            try:
                self.wfile.write(b": connected\n\n")
                self.wfile.flush()
                while not gateway._stop.is_set():
                    try:
                        event = listener.get(timeout=5.0)
                    except queue.Empty:
                        self.wfile.write(b": keep-alive\n\n")
                        self.wfile.flush()
                        continue
                    if event is None:
                        return
                    data = json.dumps(event, sort_keys=True)
                    self.wfile.write(f"data: {data}\n\n".encode("utf-8"))
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                gateway._detach_listener(listener)

        def _serve_static(self):
            root = gateway.static_dir
            if root is None:
                self._send_json(404, {"error": "unknown path"})
                return
            relative = self.path.split("?", 1)[0].lstrip("/") or "index.html"
            target = (root / relative).resolve()
            if not str(target).startswith(str(root)) or not target.is_file():
                self._send_json(404, {"error": "unknown path"})
                return
            content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def gateway_from_env(broker: Any, static_dir: str | None = None) -> Gateway:
    port = int(os.environ.get("PLANMESH_HTTP_PORT", DEFAULT_HTTP_PORT))
    return Gateway(broker, port=port, static_dir=static_dir)
