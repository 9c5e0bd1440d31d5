"""The stateless worker harness every back-end capability runs in.

A capability is described by a :class:`CapabilityDescriptor`, registered
on the broker (topic + competing-consumer queue + announcement), and then
served by a :class:`Worker` running the consume → handle → advance →
publish loop. Handlers are pure payload transformations; anything they
raise — and any malformed payload they choke on — becomes an error
envelope on the managing topic's error key, with the originating
correlation id preserved. Workers hold no state across deliveries
besides diagnostic counters, so killing one mid-task only means the
unacknowledged message is redelivered elsewhere.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Any, Callable

from .broker import BrokerError
from .messaging import (
    TOKEN_RE,
    CorrelationId,
    EmptySlipError,
    Envelope,
    RoutingSlip,
    RoutingStep,
    SchemaMismatchError,
    TopicAddress,
    advance,
    check_payload_schema,
    fail,
    make_topic,
    with_payload,
)

MANAGING_TOPIC = make_topic("v1", "routing", "managing")
MONITORING_TOPIC = make_topic("v1", "system-management", "monitoring")
REPLY_KEY = "reply"
ERROR_KEY = "error"
ANNOUNCE_KEY = "announce"

OPERATIONAL_CLASSES = ("core", "enabling", "supplemental")
DEFAULT_HEARTBEAT_SECONDS = 5.0


class DescriptorError(ValueError):
    """A capability descriptor violates its invariants."""


@dataclass(frozen=True)
class CapabilityDescriptor:
    """What a capability is and where it listens."""

    name: str
    operational_class: str
    technical_class: str
    topic: TopicAddress
    routing_key: str
    input_schema: str
    output_schema: str
    instance_group: str = ""

    def __post_init__(self):
        if not TOKEN_RE.match(self.name):
            raise DescriptorError(f"name {self.name!r} is not a token")
        if self.operational_class not in OPERATIONAL_CLASSES:
            raise DescriptorError(f"unknown operational class {self.operational_class!r}")
        if self.topic.capability_name != self.name:
            raise DescriptorError(f"topic names capability {self.topic.capability_name!r}, descriptor {self.name!r}")
        if self.topic.technical_class != self.technical_class:
            raise DescriptorError(
                f"topic class {self.topic.technical_class!r} != descriptor class {self.technical_class!r}"
            )
        if self.routing_key != "*" and not TOKEN_RE.match(self.routing_key):
            raise DescriptorError(f"routing key {self.routing_key!r} is not a token")
        if not self.instance_group:
            object.__setattr__(self, "instance_group", self.topic.instance_name or "main")
        if not TOKEN_RE.match(self.instance_group):
            raise DescriptorError(f"instance group {self.instance_group!r} is not a token")

    @property
    def queue_name(self) -> str:
        return f"q-{self.name}-{self.instance_group}"


def announce_payload(
    descriptor: CapabilityDescriptor,
    heartbeat_seconds: float,
    extras: dict[str, Any] | None = None,
) -> dict[str, Any]:
    payload = {
        "name": descriptor.name,
        "operationalClass": descriptor.operational_class,
        "technicalClass": descriptor.technical_class,
        "topic": descriptor.topic.format(),
        "routingKey": descriptor.routing_key,
        "inputSchema": descriptor.input_schema,
        "outputSchema": descriptor.output_schema,
        "instanceGroup": descriptor.instance_group,
        "heartbeatSeconds": heartbeat_seconds,
    }
    if extras:
        # Capability-specific advertisement (e.g. solving's planner
        # catalog); the fixed keys above always win a collision.
        payload = {**extras, **payload}
    return payload


def make_announcement(
    descriptor: CapabilityDescriptor,
    heartbeat_seconds: float,
    extras: dict[str, Any] | None = None,
) -> Envelope:
    return Envelope(
        envelope_id=CorrelationId.fresh(),
        correlation_id=CorrelationId.fresh(),
        slip=RoutingSlip(()),
        payload_schema="capability-announce/1",
        payload=announce_payload(descriptor, heartbeat_seconds, extras),
    )


def register(
    descriptor: CapabilityDescriptor,
    broker: Any,
    heartbeat_seconds: float = DEFAULT_HEARTBEAT_SECONDS,
    extras: dict[str, Any] | None = None,
) -> str:
    """Declare the capability's topic and queue, bind, and announce.

    Idempotent: registering the same descriptor twice reuses the queue
    and collapses to one binding. Also makes sure the shared managing
    and monitoring topics exist, so the error path never publishes into
    the void.
    """
    broker.declare_topic(descriptor.topic)
    broker.declare_topic(MANAGING_TOPIC)
    broker.declare_topic(MONITORING_TOPIC)
    broker.declare_queue(descriptor.queue_name)
    broker.bind(descriptor.queue_name, descriptor.topic, descriptor.routing_key)
    broker.publish(MONITORING_TOPIC, ANNOUNCE_KEY, make_announcement(descriptor, heartbeat_seconds, extras))
    return descriptor.queue_name


@dataclass(frozen=True)
class HandlerOutcome:
    """Exactly one of: a result (payload + schema), or a failure.

    A result may additionally extend the routing slip (the
    request-and-continue pattern); the extension is applied before the
    normal advance, so the published message targets the first sub-step.
    """

    payload: Any = None
    schema: str | None = None
    failure_message: str | None = None
    failure_context: tuple[str, ...] = ()
    extension: tuple[tuple[RoutingStep, ...], RoutingStep] | None = None

    def __post_init__(self):
        is_result = self.schema is not None
        is_failure = self.failure_message is not None
        if is_result == is_failure:
            raise ValueError("handler outcome must be exactly one of result/failure")

    @classmethod
    def result(
        cls,
        payload: Any,
        schema: str,
        sub_steps: tuple[RoutingStep, ...] | None = None,
        resume: RoutingStep | None = None,
    ) -> "HandlerOutcome":
        extension = None
        if (sub_steps is None) != (resume is None):
            raise ValueError("sub_steps and resume go together")
        if resume is not None:
            extension = (tuple(sub_steps), resume)
        return cls(payload=payload, schema=schema, extension=extension)

    @classmethod
    def failure(cls, message: str, *context: str) -> "HandlerOutcome":
        return cls(failure_message=message, failure_context=tuple(context))

    @property
    def is_failure(self) -> bool:
        return self.failure_message is not None


Handler = Callable[[Any, str], HandlerOutcome]


def request_and_continue(current: Envelope, sub_steps: tuple[RoutingStep, ...], resume: RoutingStep) -> Envelope:
    """Push ``resume``, then ``sub_steps`` reversed, so sub_steps[0] is on top.

    The requester keeps no local state: whatever it needs on resumption
    must travel inside the payload.
    """
    slip = current.slip.push(resume)
    for step in reversed(sub_steps):
        slip = slip.push(step)
    return replace(current, slip=slip)


@dataclass
class WorkerStats:
    processed: int = 0
    failed: int = 0
    by_schema: dict[str, int] = field(default_factory=dict)


class Worker:
    """One consuming instance of a capability."""

    def __init__(
        self,
        descriptor: CapabilityDescriptor,
        handler: Handler,
        broker: Any,
        heartbeat_seconds: float = DEFAULT_HEARTBEAT_SECONDS,
        announce_extras: dict[str, Any] | None = None,
    ):
        self.descriptor = descriptor
        self.handler = handler
        self.broker = broker
        self.heartbeat_seconds = heartbeat_seconds
        self.announce_extras = announce_extras
        self.stats = WorkerStats()
        self.broker_lost = False
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._session: Any = None

    def start(self) -> "Worker":
        register(self.descriptor, self.broker, self.heartbeat_seconds, self.announce_extras)
        self._session = self.broker.subscribe(self.descriptor.queue_name)
        for name, target in (("loop", self._loop), ("heartbeat", self._heartbeat)):
            thread = threading.Thread(target=target, name=f"{self.descriptor.name}-{name}", daemon=True)
            thread.start()
            self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._session is not None:
            try:
                self._session.close()
            except BrokerError:
                pass
        for thread in self._threads:
            thread.join(timeout=3)

    def join(self) -> None:
        """Block until the consume loop ends (shutdown or broker loss)."""
        self._threads[0].join()

    # -- internals ----------------------------------------------------

    def _loop(self) -> None:
        # BrokerError covers both transports: the in-process broker raises
        # it when the session is gone, the TCP client raises the
        # BrokerUnavailableError subclass when the connection drops.
        while not self._stop.is_set():
            try:
                delivery = self._session.next(timeout=0.2)
            except BrokerError:
                self.broker_lost = not self._stop.is_set()
                return
            if delivery is None:
                continue
            try:
                self._process(delivery)
            except BrokerError:
                self.broker_lost = not self._stop.is_set()
                return

    def _heartbeat(self) -> None:
        while not self._stop.wait(self.heartbeat_seconds):
            try:
                self.broker.publish(
                    MONITORING_TOPIC,
                    ANNOUNCE_KEY,
                    make_announcement(self.descriptor, self.heartbeat_seconds, self.announce_extras),
                )
            except BrokerError:
                if self._stop.is_set():
                    return

    def _process(self, delivery: Any) -> None:
        envelope: Envelope = delivery.envelope
        if envelope.status != "ok":
            # Error envelopes belong on the error queue, not here; forward.
            self._dispatch_error(envelope, "error-status envelope arrived on a work queue", ())
            self._session.ack(delivery.delivery_tag)
            return
        try:
            outcome = self.handler(envelope.payload, envelope.payload_schema)
        except Exception as exc:
            self._dispatch_error(envelope, str(exc) or type(exc).__name__, (type(exc).__name__,))
            self._session.ack(delivery.delivery_tag)
            return
        if outcome.is_failure:
            self._dispatch_error(envelope, outcome.failure_message, outcome.failure_context)
            self._session.ack(delivery.delivery_tag)
            return
        try:
            current = envelope
            if outcome.extension is not None:
                current = request_and_continue(current, *outcome.extension)
            check_payload_schema(outcome.payload, outcome.schema)
            step, advanced = advance(current)
            if step.expected_schema != outcome.schema:
                raise SchemaMismatchError(
                    f"next step expects {step.expected_schema!r}, handler produced {outcome.schema!r}"
                )
            reply = with_payload(advanced, outcome.payload, outcome.schema)
            self.broker.publish(step.target, step.routing_key, reply)
        except (EmptySlipError, SchemaMismatchError) as exc:
            self._dispatch_error(envelope, str(exc), (type(exc).__name__,))
            self._session.ack(delivery.delivery_tag)
            return
        self._session.ack(delivery.delivery_tag)
        self.stats.processed += 1
        self.stats.by_schema[envelope.payload_schema] = self.stats.by_schema.get(envelope.payload_schema, 0) + 1

    def _dispatch_error(self, envelope: Envelope, message: str, context: tuple[str, ...]) -> None:
        error_envelope = fail(envelope, origin=self.descriptor.name, message=message, context=context)
        self.broker.publish(MANAGING_TOPIC, ERROR_KEY, error_envelope)
        self.stats.failed += 1


def run_worker(
    descriptor: CapabilityDescriptor,
    handler: Handler,
    broker: Any,
    heartbeat_seconds: float = DEFAULT_HEARTBEAT_SECONDS,
    stop: threading.Event | None = None,
    announce_extras: dict[str, Any] | None = None,
) -> int:
    """Serve forever; returns 0 on requested shutdown, 2 on broker loss."""
    worker = Worker(descriptor, handler, broker, heartbeat_seconds, announce_extras=announce_extras)
    worker.start()
    try:
        if stop is None:
            worker.join()
        else:
            while not stop.is_set() and not worker.broker_lost:
                stop.wait(0.2)
    except KeyboardInterrupt:
        pass
    finally:
        worker.stop()
    return 2 if worker.broker_lost else 0
