"""TCP transport for the broker: newline-delimited JSON frames, UTF-8.

One frame per line, field ``op`` selects the kind:

  client -> server: ``declare_topic {topic}``, ``declare_queue {queue}``,
  ``bind {queue, topic, key}``, ``publish {topic, key, envelope}``,
  ``subscribe {queue}``, ``ack {tag}``, ``nack {tag}``, ``list {}``
  server -> client: ``ok {}``, ``listing {...}``, ``error {kind, reason}``,
  ``deliver {tag, queue, key, envelope}``

Every client frame is answered by exactly one ``ok``/``listing``/``error``
frame, in order; ``deliver`` frames are pushed asynchronously once a
connection has subscribed, with a prefetch window of one (the next
message is pushed only after the previous one is acked or nacked — fair
dispatch). One connection is one consumer session: tags are
per-connection, and dropping the connection requeues its unacked
messages. The in-process and TCP clients expose the same handle surface
and are observationally equivalent.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
import time
from typing import Any

from .broker import (
    Broker,
    BrokerError,
    BrokerUnavailableError,
    ConsumerSession,
    Delivery,
    UnknownQueueError,
    UnknownTagError,
    UnknownTopicError,
)
from .messaging import (
    Envelope,
    MalformedTopicError,
    MessagingError,
    TopicAddress,
    envelope_from_dict,
    envelope_to_dict,
    parse_topic,
)

DEFAULT_PORT = 7311

_ERROR_KINDS = {
    "unknown-topic": UnknownTopicError,
    "unknown-queue": UnknownQueueError,
    "unknown-tag": UnknownTagError,
    "malformed-topic": MalformedTopicError,
}


def _error_frame(kind: str, reason: str) -> dict[str, str]:
    return {"op": "error", "kind": kind, "reason": reason}


class BrokerServer:
    """Serves a :class:`Broker` core over TCP."""

    def __init__(self, broker: Broker, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        self.broker = broker
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(64)
        self.host, self.port = self._sock.getsockname()[:2]
        self._running = False
        self._accept_thread: threading.Thread | None = None
        self._conns: set[socket.socket] = set()
        self._lock = threading.Lock()

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> None:
        self._running = True
        self._accept_thread = threading.Thread(target=self._accept_loop, name="broker-accept", daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._running = False
        try:
            self._sock.close()
        except OSError:
            pass
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2)

    def _accept_loop(self) -> None:
        while self._running:
            try:
                conn, _addr = self._sock.accept()
            except OSError:
                break
            with self._lock:
                self._conns.add(conn)
            thread = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            thread.start()

    def _serve_conn(self, conn: socket.socket) -> None:
        session: ConsumerSession | None = None
        write_lock = threading.Lock()
        pump_stop = threading.Event()
        pump_thread: threading.Thread | None = None

        def send(doc: dict[str, Any]) -> None:
            data = (json.dumps(doc, separators=(",", ":")) + "\n").encode("utf-8")
            with write_lock:
                conn.sendall(data)

        def pump(sess: ConsumerSession) -> None:
            # Fair dispatch with a prefetch window of one: pull the next
            # message only once everything pushed so far is settled, so a
            # nack requeues at the head *before* the next pull and the
            # delivery order matches the in-process transport.
            while not pump_stop.is_set():
                if sess.unacked_count() > 0:
                    time.sleep(0.002)
                    continue
                try:
                    delivery = sess.next(timeout=0.2)
                except Exception:
                    break
                if delivery is None:
                    continue
                try:
                    send(
                        {
                            "op": "deliver",
                            "tag": delivery.delivery_tag,
                            "queue": delivery.queue_name,
                            "key": delivery.routing_key,
                            "envelope": envelope_to_dict(delivery.envelope),
                        }
                    )
                except OSError:
                    break

        try:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            for line in reader:
                line = line.strip()
                if not line:
                    continue
                try:
                    frame = json.loads(line)
                    if not isinstance(frame, dict):
                        raise ValueError("frame must be an object")
                except ValueError as exc:
                    send(_error_frame("protocol", f"bad frame: {exc}"))
                    continue
                if session is None and frame.get("op") == "subscribe":
                    session = self.broker.open_session()
                    pump_thread = threading.Thread(target=pump, args=(session,), daemon=True)
                    pump_thread.start()
                try:
                    reply = self._handle(frame, session)
                except OSError:
                    raise
                except Exception as exc:  # frame-level failure, connection survives
                    reply = _error_frame("protocol", str(exc))
                send(reply)
        except (OSError, ValueError):
            pass
        finally:
            pump_stop.set()
            if session is not None:
                session.close()
            with self._lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _handle(self, frame: dict[str, Any], session: ConsumerSession | None) -> dict[str, Any]:
        op = frame.get("op")
        try:
            if op == "declare_topic":
                self.broker.declare_topic(parse_topic(frame["topic"]))
                return {"op": "ok"}
            if op == "declare_queue":
                self.broker.declare_queue(frame["queue"])
                return {"op": "ok"}
            if op == "bind":
                self.broker.bind(frame["queue"], parse_topic(frame["topic"]), frame["key"])
                return {"op": "ok"}
            if op == "publish":
                envelope = envelope_from_dict(frame["envelope"])
                self.broker.publish(parse_topic(frame["topic"]), frame["key"], envelope)
                return {"op": "ok"}
            if op == "subscribe":
                assert session is not None
                session.subscribe(frame["queue"])
                return {"op": "ok"}
            if op == "ack":
                if session is None:
                    return _error_frame("unknown-tag", "no subscription on this connection")
                session.ack(int(frame["tag"]))
                return {"op": "ok"}
            if op == "nack":
                if session is None:
                    return _error_frame("unknown-tag", "no subscription on this connection")
                session.nack(int(frame["tag"]))
                return {"op": "ok"}
            if op == "list":
                return {"op": "listing", **self.broker.introspect()}
            return _error_frame("protocol", f"unknown op {op!r}")
        except MalformedTopicError as exc:
            return _error_frame("malformed-topic", str(exc))
        except UnknownTopicError as exc:
            return _error_frame("unknown-topic", str(exc))
        except UnknownQueueError as exc:
            return _error_frame("unknown-queue", str(exc))
        except UnknownTagError as exc:
            return _error_frame("unknown-tag", str(exc))
        except (KeyError, TypeError, MessagingError) as exc:
            return _error_frame("protocol", f"bad frame: {exc}")


class _Connection:
    """One socket with FIFO request/reply matching and a delivery buffer."""

    def __init__(self, host: str, port: int, connect_timeout: float):
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise BrokerUnavailableError(f"cannot connect to broker at {host}:{port}: {exc}") from exc
        self._sock.settimeout(None)
        self._reader_file = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._replies: queue.Queue[dict[str, Any]] = queue.Queue()
        self.deliveries: queue.Queue[Delivery] = queue.Queue()
        self._request_lock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            for line in self._reader_file:
                line = line.strip()
                if not line:
                    continue
                frame = json.loads(line)
                if frame.get("op") == "deliver":
                    self.deliveries.put(
                        Delivery(
                            delivery_tag=frame["tag"],
                            envelope=envelope_from_dict(frame["envelope"]),
                            queue_name=frame["queue"],
                            routing_key=frame["key"],
                        )
                    )
                else:
                    self._replies.put(frame)
        except (OSError, ValueError):
            pass
        finally:
            self._closed = True

    def request(self, frame: dict[str, Any], timeout: float = 10.0) -> dict[str, Any]:
        with self._request_lock:
            if self._closed:
                raise BrokerUnavailableError("broker connection lost")
            try:
                data = (json.dumps(frame, separators=(",", ":")) + "\n").encode("utf-8")
                self._sock.sendall(data)
            except OSError as exc:
                raise BrokerUnavailableError(f"broker connection lost: {exc}") from exc
            try:
                reply = self._replies.get(timeout=timeout)
            except queue.Empty:
                raise BrokerUnavailableError("no reply from broker") from None
        if reply.get("op") == "error":
            exc_type = _ERROR_KINDS.get(reply.get("kind", ""), BrokerError)
            if exc_type is MalformedTopicError:
                raise MalformedTopicError(frame.get("topic", "?"), reply.get("reason", ""))
            raise exc_type(reply.get("reason", "broker error"))
        return reply

    def close(self) -> None:
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


class TcpConsumerSession:
    """Client-side consumer session; mirrors :class:`ConsumerSession`."""

    def __init__(self, host: str, port: int, connect_timeout: float):
        self._conn = _Connection(host, port, connect_timeout)
        self.closed = False

    def subscribe(self, queue_name: str) -> None:
        self._conn.request({"op": "subscribe", "queue": queue_name})

    def next(self, timeout: float | None = None) -> Delivery | None:
        # Poll in slices so a dropped connection surfaces even without a
        # caller-side timeout.
        remaining = timeout
        while True:
            slice_ = 0.5 if remaining is None else min(0.5, remaining)
            try:
                return self._conn.deliveries.get(timeout=slice_)
            except queue.Empty:
                if self._conn._closed:
                    raise BrokerUnavailableError("broker connection lost") from None
                if remaining is not None:
                    remaining -= slice_
                    if remaining <= 0:
                        return None

    def ack(self, tag: int) -> None:
        self._conn.request({"op": "ack", "tag": tag})

    def nack(self, tag: int) -> None:
        self._conn.request({"op": "nack", "tag": tag})

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._conn.close()


class TcpBrokerClient:
    """Drop-in replacement for the in-process broker handle, over TCP."""

    def __init__(self, host: str, port: int = DEFAULT_PORT, connect_timeout: float = 5.0):
        self.host = host
        self.port = port
        self._connect_timeout = connect_timeout
        self._control = _Connection(host, port, connect_timeout)
        self._sessions: list[TcpConsumerSession] = []

    @classmethod
    def from_address(cls, address: str, connect_timeout: float = 5.0) -> TcpBrokerClient:
        host, _, port = address.rpartition(":")
        return cls(host or "127.0.0.1", int(port), connect_timeout)

    def declare_topic(self, topic: TopicAddress) -> None:
        self._control.request({"op": "declare_topic", "topic": topic.format()})

    def declare_queue(self, name: str) -> None:
        self._control.request({"op": "declare_queue", "queue": name})

    def bind(self, queue_name: str, topic: TopicAddress, key_pattern: str) -> None:
        self._control.request({"op": "bind", "queue": queue_name, "topic": topic.format(), "key": key_pattern})

    def publish(self, topic: TopicAddress, routing_key: str, envelope: Envelope) -> None:
        self._control.request(
            {"op": "publish", "topic": topic.format(), "key": routing_key, "envelope": envelope_to_dict(envelope)}
        )

    def open_session(self) -> TcpConsumerSession:
        session = TcpConsumerSession(self.host, self.port, self._connect_timeout)
        self._sessions.append(session)
        return session

    def subscribe(self, queue_name: str) -> TcpConsumerSession:
        session = self.open_session()
        session.subscribe(queue_name)
        return session

    def introspect(self) -> dict[str, Any]:
        listing = self._control.request({"op": "list"})
        return {k: v for k, v in listing.items() if k != "op"}

    def close(self) -> None:
        for session in self._sessions:
            session.close()
        self._control.close()
