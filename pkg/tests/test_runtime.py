"""The worker harness: descriptors, registration, the consume loop, errors."""

import threading
import time

import pytest

from planmesh.broker import Broker
from planmesh.messaging import (
    CARRY_KEY,
    CorrelationId,
    Envelope,
    RoutingSlip,
    RoutingStep,
    check_payload_schema,
    make_topic,
    new_request,
)
from planmesh.runtime import (
    ANNOUNCE_KEY,
    ERROR_KEY,
    MANAGING_TOPIC,
    MONITORING_TOPIC,
    CapabilityDescriptor,
    DescriptorError,
    HandlerOutcome,
    Worker,
    make_announcement,
    register,
    request_and_continue,
    run_worker,
)

ECHO_TOPIC = make_topic("v1", "transforming", "echoing", "unit")
FINAL_TOPIC = make_topic("v1", "endpoint", "replying", "unit")
FINAL_STEP = RoutingStep(FINAL_TOPIC, "done", "echo-reply/1")


def _echo_descriptor(**overrides):
    fields = dict(
        name="echoing",
        operational_class="enabling",
        technical_class="transforming",
        topic=ECHO_TOPIC,
        routing_key="go",
        input_schema="echo-request/1",
        output_schema="echo-reply/1",
    )
    fields.update(overrides)
    return CapabilityDescriptor(**fields)


def _mesh(broker):
    """Declare the reply endpoint and tap queues for replies and errors."""
    broker.declare_topic(FINAL_TOPIC)
    broker.declare_topic(MANAGING_TOPIC)
    broker.declare_topic(MONITORING_TOPIC)
    for queue, topic, key in (
        ("q-final", FINAL_TOPIC, "done"),
        ("q-errors", MANAGING_TOPIC, ERROR_KEY),
        ("q-monitor", MONITORING_TOPIC, ANNOUNCE_KEY),
    ):
        broker.declare_queue(queue)
        broker.bind(queue, topic, key)


def _take(broker, queue, timeout=5.0):
    session = broker.subscribe(queue)
    try:
        delivery = session.next(timeout=timeout)
        assert delivery is not None, f"nothing arrived on {queue}"
        session.ack(delivery.delivery_tag)
        return delivery.envelope
    finally:
        session.close()


def _request(payload, slip_steps=(FINAL_STEP,), schema="echo-request/1"):
    return Envelope(
        envelope_id=CorrelationId.fresh(),
        correlation_id=CorrelationId.fresh(),
        slip=RoutingSlip(tuple(slip_steps)),
        payload_schema=schema,
        payload=payload,
    )


# --- descriptors ---


def test_descriptor_queue_name_and_defaults():
    descriptor = _echo_descriptor()
    assert descriptor.instance_group == "unit"  # from the topic's instance name
    assert descriptor.queue_name == "q-echoing-unit"


def test_descriptor_instance_group_defaults_to_main():
    topic = make_topic("v1", "routing", "managing")
    descriptor = CapabilityDescriptor(
        name="managing",
        operational_class="enabling",
        technical_class="routing",
        topic=topic,
        routing_key="reply",
        input_schema="plan/1",
        output_schema="solving-request/1",
    )
    assert descriptor.instance_group == "main"
    assert descriptor.queue_name == "q-managing-main"


def test_descriptor_rejects_name_topic_mismatch():
    with pytest.raises(DescriptorError):
        _echo_descriptor(name="parsing")


def test_descriptor_rejects_class_mismatch():
    with pytest.raises(DescriptorError):
        _echo_descriptor(technical_class="routing")


def test_descriptor_rejects_bad_operational_class():
    with pytest.raises(DescriptorError):
        _echo_descriptor(operational_class="legendary")


def test_descriptor_rejects_bad_routing_key():
    with pytest.raises(DescriptorError):
        _echo_descriptor(routing_key="Bad Key")


def test_wildcard_routing_key_is_allowed():
    assert _echo_descriptor(routing_key="*").routing_key == "*"


# --- outcomes and slips ---


def test_outcome_requires_exactly_one_variant():
    with pytest.raises(ValueError):
        HandlerOutcome()
    with pytest.raises(ValueError):
        HandlerOutcome(payload={}, schema="x/1", failure_message="boom")
    with pytest.raises(ValueError):
        HandlerOutcome.result({}, "x/1", sub_steps=(FINAL_STEP,))  # resume missing


def test_request_and_continue_orders_steps():
    gateway = RoutingStep(MANAGING_TOPIC, "reply", "plan/1")
    parse = RoutingStep(ECHO_TOPIC, "parse", "parsing-request/1")
    encode = RoutingStep(ECHO_TOPIC, "encode", "parsed-model/1")
    resume = RoutingStep(ECHO_TOPIC, "resume", "ground-task/1")
    envelope = _request({}, slip_steps=(gateway,), schema="whatever/1")

    extended = request_and_continue(envelope, (parse, encode), resume)
    assert list(extended.slip.steps) == [gateway, resume, encode, parse]
    assert extended.slip.steps[-1] == parse  # first sub-step ends up on top
    assert envelope.slip.steps == (gateway,)  # the original is untouched


# --- registration and announcements ---


def test_register_declares_and_announces():
    broker = Broker()
    _mesh(broker)
    queue = register(_echo_descriptor(), broker, heartbeat_seconds=7)
    assert queue == "q-echoing-unit"

    snapshot = broker.introspect()
    assert ECHO_TOPIC.format() in snapshot["topics"]
    assert "q-echoing-unit" in snapshot["queues"]

    announcement = _take(broker, "q-monitor")
    assert announcement.payload_schema == "capability-announce/1"
    check_payload_schema(announcement.payload, "capability-announce/1")
    assert announcement.payload["name"] == "echoing"
    assert announcement.payload["topic"] == "v1.transforming.echoing#unit"
    assert announcement.payload["heartbeatSeconds"] == 7
    assert len(announcement.slip.steps) == 0


def test_announcement_envelope_shape():
    envelope = make_announcement(_echo_descriptor(), 5)
    assert envelope.status == "ok"
    assert envelope.payload["instanceGroup"] == "unit"


# --- the worker loop ---


def test_worker_processes_and_advances():
    broker = Broker()
    _mesh(broker)

    def handler(payload, schema):
        assert schema == "echo-request/1"
        return HandlerOutcome.result({"echoed": payload["text"]}, "echo-reply/1")

    worker = Worker(_echo_descriptor(), handler, broker).start()
    try:
        request = _request({"text": "hi", CARRY_KEY: {"k": 1}})
        broker.publish(ECHO_TOPIC, "go", request)
        reply = _take(broker, "q-final")
    finally:
        worker.stop()

    assert reply.payload == {"echoed": "hi", CARRY_KEY: {"k": 1}}  # carry copied forward
    assert reply.payload_schema == "echo-reply/1"
    assert reply.correlation_id == request.correlation_id
    assert len(reply.slip.steps) == 0
    assert reply.status == "ok"
    assert worker.stats.processed == 1
    assert worker.stats.by_schema == {"echo-request/1": 1}
    assert broker.introspect()["depths"]["q-echoing-unit"] == 0


def test_handler_exception_routes_to_error_queue():
    broker = Broker()
    _mesh(broker)

    def handler(payload, schema):
        raise RuntimeError("kaboom")

    worker = Worker(_echo_descriptor(), handler, broker).start()
    try:
        request = _request({"text": "hi"})
        broker.publish(ECHO_TOPIC, "go", request)
        error = _take(broker, "q-errors")
    finally:
        worker.stop()

    assert error.status == "error"
    assert error.error_info.origin_capability == "echoing"
    assert "kaboom" in error.error_info.message
    assert error.correlation_id == request.correlation_id
    assert worker.stats.failed == 1
    assert worker.stats.processed == 0
    assert broker.introspect()["depths"]["q-echoing-unit"] == 0  # acked, not requeued


def test_failure_outcome_routes_to_error_queue():
    broker = Broker()
    _mesh(broker)
    worker = Worker(
        _echo_descriptor(),
        lambda payload, schema: HandlerOutcome.failure("not today", "policy"),
        broker,
    ).start()
    try:
        broker.publish(ECHO_TOPIC, "go", _request({"text": "x"}))
        error = _take(broker, "q-errors")
    finally:
        worker.stop()
    assert error.error_info.message == "not today"
    assert "policy" in error.error_info.context


def test_schema_mismatch_routes_to_error_queue():
    broker = Broker()
    _mesh(broker)
    worker = Worker(
        _echo_descriptor(),
        lambda payload, schema: HandlerOutcome.result({}, "surprise/1"),
        broker,
    ).start()
    try:
        broker.publish(ECHO_TOPIC, "go", _request({"text": "x"}))
        error = _take(broker, "q-errors")
    finally:
        worker.stop()
    assert "surprise/1" in error.error_info.message
    assert "echo-reply/1" in error.error_info.message


def test_empty_slip_routes_to_error_queue():
    broker = Broker()
    _mesh(broker)
    worker = Worker(
        _echo_descriptor(),
        lambda payload, schema: HandlerOutcome.result({}, "echo-reply/1"),
        broker,
    ).start()
    try:
        broker.publish(ECHO_TOPIC, "go", _request({"text": "x"}, slip_steps=()))
        error = _take(broker, "q-errors")
    finally:
        worker.stop()
    assert error.status == "error"
    assert error.error_info.origin_capability == "echoing"


def test_error_status_envelope_is_forwarded_not_handled():
    broker = Broker()
    _mesh(broker)
    calls = []

    def handler(payload, schema):
        calls.append(schema)
        return HandlerOutcome.result({}, "echo-reply/1")

    worker = Worker(_echo_descriptor(), handler, broker).start()
    try:
        from planmesh.messaging import fail

        poisoned = fail(_request({"text": "x"}), origin="elsewhere", message="already failed")
        broker.publish(ECHO_TOPIC, "go", poisoned)
        error = _take(broker, "q-errors")
    finally:
        worker.stop()
    assert error.status == "error"
    assert calls == []  # the handler never saw it


def test_extension_drives_a_two_worker_pipeline():
    broker = Broker()
    _mesh(broker)

    beta_topic = make_topic("v1", "transforming", "betaing", "unit")
    beta_step = RoutingStep(beta_topic, "go", "beta-request/1")
    alpha_resume = RoutingStep(ECHO_TOPIC, "resume", "beta-reply/1")

    def alpha_handler(payload, schema):
        if schema == "echo-request/1":
            forwarded = {"text": payload["text"], CARRY_KEY: {"stage": "first"}}
            return HandlerOutcome.result(forwarded, "beta-request/1", sub_steps=(beta_step,), resume=alpha_resume)
        assert schema == "beta-reply/1"
        assert payload[CARRY_KEY] == {"stage": "first"}
        return HandlerOutcome.result({"final": payload["via"]}, "echo-reply/1")

    def beta_handler(payload, schema):
        return HandlerOutcome.result({"via": f"beta({payload['text']})"}, "beta-reply/1")

    beta_descriptor = CapabilityDescriptor(
        name="betaing",
        operational_class="enabling",
        technical_class="transforming",
        topic=beta_topic,
        routing_key="go",
        input_schema="beta-request/1",
        output_schema="beta-reply/1",
    )
    alpha = Worker(_echo_descriptor(routing_key="*"), alpha_handler, broker).start()
    beta = Worker(beta_descriptor, beta_handler, broker).start()
    try:
        broker.publish(ECHO_TOPIC, "go", _request({"text": "hi"}))
        reply = _take(broker, "q-final")
    finally:
        alpha.stop()
        beta.stop()

    assert reply.payload == {"final": "beta(hi)", CARRY_KEY: {"stage": "first"}}
    assert alpha.stats.by_schema == {"echo-request/1": 1, "beta-reply/1": 1}
    assert beta.stats.by_schema == {"beta-request/1": 1}


def test_competing_workers_split_the_queue():
    broker = Broker()
    _mesh(broker)
    handler = lambda payload, schema: HandlerOutcome.result({"echoed": payload["text"]}, "echo-reply/1")
    workers = [Worker(_echo_descriptor(), handler, broker).start() for _ in range(2)]
    try:
        for i in range(30):
            broker.publish(ECHO_TOPIC, "go", _request({"text": f"m{i}"}))
        replies = [_take(broker, "q-final") for _ in range(30)]
    finally:
        for worker in workers:
            worker.stop()
    assert len({e.envelope_id.value for e in replies}) == 30
    assert sum(w.stats.processed for w in workers) == 30


def test_unacked_delivery_is_redelivered_to_a_worker():
    broker = Broker()
    _mesh(broker)
    descriptor = _echo_descriptor()
    register(descriptor, broker)

    request = _request({"text": "only-once"})
    broker.publish(ECHO_TOPIC, "go", request)

    # A consumer takes the message and dies without acking.
    dying = broker.subscribe(descriptor.queue_name)
    taken = dying.next(timeout=1)
    assert taken is not None
    dying.close()

    worker = Worker(
        descriptor,
        lambda payload, schema: HandlerOutcome.result({"echoed": payload["text"]}, "echo-reply/1"),
        broker,
    ).start()
    try:
        reply = _take(broker, "q-final")
    finally:
        worker.stop()
    assert reply.payload["echoed"] == "only-once"


def test_heartbeat_reannounces():
    broker = Broker()
    _mesh(broker)
    worker = Worker(
        _echo_descriptor(),
        lambda payload, schema: HandlerOutcome.result({}, "echo-reply/1"),
        broker,
        heartbeat_seconds=0.05,
    ).start()
    try:
        session = broker.subscribe("q-monitor")
        seen = 0
        deadline = time.monotonic() + 3
        while seen < 3 and time.monotonic() < deadline:
            delivery = session.next(timeout=0.5)
            if delivery is None:
                continue
            session.ack(delivery.delivery_tag)
            assert delivery.envelope.payload["name"] == "echoing"
            seen += 1
        session.close()
    finally:
        worker.stop()
    assert seen >= 3  # the registration announce plus at least two beats


def test_run_worker_returns_zero_on_requested_stop():
    broker = Broker()
    _mesh(broker)
    stop = threading.Event()
    finished = {}

    def serve():
        finished["code"] = run_worker(
            _echo_descriptor(),
            lambda payload, schema: HandlerOutcome.result({}, "echo-reply/1"),
            broker,
            stop=stop,
        )

    thread = threading.Thread(target=serve)
    thread.start()
    time.sleep(0.1)
    stop.set()
    thread.join(timeout=5)
    assert not thread.is_alive()
    assert finished["code"] == 0


def test_run_worker_returns_two_on_broker_loss():
    broker = Broker()
    _mesh(broker)
    finished = {}

    def serve():
        finished["code"] = run_worker(
            _echo_descriptor(),
            lambda payload, schema: HandlerOutcome.result({}, "echo-reply/1"),
            broker,
        )

    thread = threading.Thread(target=serve)
    thread.start()
    time.sleep(0.1)
    broker.close()
    thread.join(timeout=5)
    assert not thread.is_alive()
    assert finished["code"] == 2
