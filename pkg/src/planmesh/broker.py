"""In-process message broker: the hub of the planning mesh.

Topics are exchanges addressed by :class:`~planmesh.messaging.TopicAddress`.
Queues attach to topics through bindings with a routing-key filter (exact
key or ``"*"``). Publishing appends the envelope to every queue with a
matching binding; publishes matching no binding are dropped and counted.

Consumers open sessions and pull deliveries. Within one session delivery
tags increase strictly and a single consumer observes per-queue FIFO
order. Competing sessions on one queue each receive a given message
exactly once. Delivery is at-least-once: a message stays "in flight" until
acked; nack or session close requeues it at the head of its queue.

The broker core is one logical event processor guarded by a single lock;
handles may be used from any number of threads.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any

from .messaging import Envelope, TopicAddress


class BrokerError(Exception):
    pass


class UnknownTopicError(BrokerError):
    pass


class UnknownQueueError(BrokerError):
    pass


class UnknownTagError(BrokerError):
    pass


class BrokerUnavailableError(BrokerError):
    """The broker cannot be reached (or the transport connection was lost)."""


@dataclass(frozen=True)
class QueueBinding:
    queue_name: str
    topic: TopicAddress
    key_pattern: str

    def matches(self, routing_key: str) -> bool:
        return self.key_pattern == "*" or self.key_pattern == routing_key


@dataclass(frozen=True)
class Delivery:
    delivery_tag: int
    envelope: Envelope
    queue_name: str
    routing_key: str


@dataclass
class _QueuedMessage:
    routing_key: str
    envelope: Envelope


class _Queue:
    def __init__(self, name: str):
        self.name = name
        self.pending: list[_QueuedMessage] = []

    def append(self, msg: _QueuedMessage) -> None:
        self.pending.append(msg)

    def requeue_front(self, msgs: list[_QueuedMessage]) -> None:
        self.pending[:0] = msgs


class ConsumerSession:
    """One consumer's view of the broker: subscriptions, tags, unacked messages."""

    def __init__(self, broker: Broker):
        self._broker = broker
        self._queues: list[str] = []
        self._unacked: dict[int, tuple[str, _QueuedMessage]] = {}
        self._next_tag = 1
        self._rr_index = 0
        self.closed = False

    def subscribe(self, queue: str) -> None:
        with self._broker._cond:
            self._check_open()
            if queue not in self._broker._queues:
                raise UnknownQueueError(queue)
            if queue not in self._queues:
                self._queues.append(queue)

    def next(self, timeout: float | None = None) -> Delivery | None:
        """Pull the next delivery from any subscribed queue.

        Blocks up to ``timeout`` seconds (forever when None); returns None
        on timeout. Queues are scanned round-robin so one busy queue cannot
        starve the others.
        """
        end = None if timeout is None else time.monotonic() + timeout
        with self._broker._cond:
            while True:
                self._check_open()
                n = len(self._queues)
                for offset in range(n):
                    idx = (self._rr_index + offset) % n
                    q = self._broker._queues[self._queues[idx]]
                    if q.pending:
                        msg = q.pending.pop(0)
                        tag = self._next_tag
                        self._next_tag += 1
                        self._unacked[tag] = (q.name, msg)
                        self._rr_index = (idx + 1) % n
                        return Delivery(tag, msg.envelope, q.name, msg.routing_key)
                if end is None:
                    self._broker._cond.wait()
                else:
                    remaining = end - time.monotonic()
                    if remaining <= 0:
                        return None
                    self._broker._cond.wait(remaining)

    def ack(self, tag: int) -> None:
        with self._broker._cond:
            self._check_open()
            if tag not in self._unacked:
                raise UnknownTagError(str(tag))
            del self._unacked[tag]

    def nack(self, tag: int) -> None:
        """Return an unacked message to the head of its queue."""
        with self._broker._cond:
            self._check_open()
            if tag not in self._unacked:
                raise UnknownTagError(str(tag))
            queue_name, msg = self._unacked.pop(tag)
            self._broker._queues[queue_name].requeue_front([msg])
            self._broker._cond.notify_all()

    def unacked_count(self) -> int:
        with self._broker._cond:
            return len(self._unacked)

    def close(self) -> None:
        """Drop the session; every unacked message is requeued at the head."""
        with self._broker._cond:
            if self.closed:
                return
            self.closed = True
            by_queue: dict[str, list[_QueuedMessage]] = {}
            for tag in sorted(self._unacked):
                queue_name, msg = self._unacked[tag]
                by_queue.setdefault(queue_name, []).append(msg)
            self._unacked.clear()
            for queue_name, msgs in by_queue.items():
                self._broker._queues[queue_name].requeue_front(msgs)
            self._broker._sessions.discard(self)
            self._broker._cond.notify_all()

    def _check_open(self) -> None:
        if self.closed:
            raise BrokerError("session closed")


class Broker:
    """In-memory hub. Also serves as the in-process client handle."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._topics: set[str] = set()
        self._queues: dict[str, _Queue] = {}
        self._bindings: set[QueueBinding] = set()
        self._sessions: set[ConsumerSession] = set()
        self._drop_count = 0
        self._closed = False

    def _check_open(self) -> None:
        if self._closed:
            raise BrokerError("broker closed")

    # -- declaration -------------------------------------------------------

    def declare_topic(self, topic: TopicAddress) -> None:
        with self._cond:
            self._check_open()
            self._topics.add(topic.format())

    def declare_queue(self, name: str) -> None:
        with self._cond:
            self._check_open()
            if name not in self._queues:
                self._queues[name] = _Queue(name)

    def bind(self, queue: str, topic: TopicAddress, key_pattern: str) -> None:
        with self._cond:
            self._check_open()
            if topic.format() not in self._topics:
                raise UnknownTopicError(topic.format())
            if queue not in self._queues:
                raise UnknownQueueError(queue)
            self._bindings.add(QueueBinding(queue, topic, key_pattern))

    # -- publish / consume ---------------------------------------------------

    def publish(self, topic: TopicAddress, routing_key: str, envelope: Envelope) -> None:
        with self._cond:
            self._check_open()
            if topic.format() not in self._topics:
                raise UnknownTopicError(topic.format())
            matched: list[str] = []
            for binding in self._bindings:
                if binding.topic == topic and binding.matches(routing_key):
                    if binding.queue_name not in matched:
                        matched.append(binding.queue_name)
            if not matched:
                self._drop_count += 1
                return
            for queue_name in matched:
                self._queues[queue_name].append(_QueuedMessage(routing_key, envelope))
            self._cond.notify_all()

    def open_session(self) -> ConsumerSession:
        with self._cond:
            self._check_open()
            session = ConsumerSession(self)
            self._sessions.add(session)
            return session

    def subscribe(self, queue: str) -> ConsumerSession:
        session = self.open_session()
        session.subscribe(queue)
        return session

    # -- introspection -------------------------------------------------------

    def introspect(self) -> dict[str, Any]:
        with self._cond:
            self._check_open()
            consumer_counts = {name: 0 for name in self._queues}
            for session in self._sessions:
                for queue in session._queues:
                    consumer_counts[queue] += 1
            return {
                "topics": sorted(self._topics),
                "queues": sorted(self._queues),
                "bindings": [
                    {"queue": b.queue_name, "topic": b.topic.format(), "key": b.key_pattern}
                    for b in sorted(
                        self._bindings,
                        key=lambda b: (b.queue_name, b.topic.format(), b.key_pattern),
                    )
                ],
                "depths": {name: len(q.pending) for name, q in self._queues.items()},
                "consumerCounts": consumer_counts,
                "dropCount": self._drop_count,
            }

    def close(self) -> None:
        with self._cond:
            self._closed = True
            for session in list(self._sessions):
                session.closed = True
            self._sessions.clear()
            self._cond.notify_all()
