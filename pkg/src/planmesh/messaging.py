"""Core message model: topic addresses, correlation ids, routing slips, envelopes.

Every service and the broker exchange exactly one unit of communication,
the :class:`Envelope`. An envelope carries an opaque JSON payload tagged
with a schema id, a correlation id that is preserved verbatim across every
hop of a pipeline, and a routing slip: a call stack of addressed steps.
Each service pops the top step and forwards its result there; the
bottom-most entry is always the final reply endpoint.

All types here are immutable values; they are safe to share between
threads without synchronization.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any

TOKEN_RE = re.compile(r"^[a-z0-9-]+$")

TECHNICAL_CLASSES = ("endpoint", "transforming", "routing", "system-management")

OK = "ok"
ERROR = "error"


class MessagingError(Exception):
    """Base class for message-model errors."""


class InvalidTokenError(MessagingError):
    """A topic/routing token violates the token rules.

    Carries the offending field name and the 0-based position of the first
    bad character (or -1 for an empty token).
    """

    def __init__(self, fieldname: str, value: str, position: int):
        self.fieldname = fieldname
        self.value = value
        self.position = position
        super().__init__(f"invalid token in {fieldname}: {value!r} (char {position})")


class MalformedTopicError(MessagingError):
    """A topic string does not match the naming template."""

    def __init__(self, text: str, reason: str):
        self.text = text
        self.reason = reason
        super().__init__(f"malformed topic {text!r}: {reason}")


class SchemaMismatchError(MessagingError):
    """A payload does not match the declared schema id."""


class EmptySlipError(MessagingError):
    """advance() was called on an envelope whose routing slip is empty.

    This is a protocol violation; the caller must route the envelope to
    the error queue.
    """


def _check_token(fieldname: str, value: str) -> str:
    if not value:
        raise InvalidTokenError(fieldname, value, -1)
    if not TOKEN_RE.match(value):
        for i, ch in enumerate(value):
            if not TOKEN_RE.match(ch):
                raise InvalidTokenError(fieldname, value, i)
        raise InvalidTokenError(fieldname, value, 0)
    return value


@dataclass(frozen=True)
class TopicAddress:
    """Broker topic name following `<ver>.<class>.<name>` plus optional `#<instance>`.

    The instance label identifies an implementation variant shared by all
    instances of the same implementation (e.g. "pddl"); it is never a
    unique per-process id, so horizontally scaled workers share one label.
    """

    version: str
    technical_class: str
    capability_name: str
    instance_name: str | None = None

    def __post_init__(self) -> None:
        _check_token("version", self.version)
        if self.technical_class not in TECHNICAL_CLASSES:
            raise InvalidTokenError("technicalClass", self.technical_class, 0)
        _check_token("capabilityName", self.capability_name)
        if self.instance_name is not None:
            _check_token("instanceName", self.instance_name)

    def format(self) -> str:
        base = f"{self.version}.{self.technical_class}.{self.capability_name}"
        if self.instance_name is not None:
            return f"{base}#{self.instance_name}"
        return base

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.format()


def make_topic(
    version: str,
    technical_class: str,
    capability_name: str,
    instance_name: str | None = None,
) -> TopicAddress:
    return TopicAddress(version, technical_class, capability_name, instance_name)


def parse_topic(text: str) -> TopicAddress:
    """Inverse of :meth:`TopicAddress.format`."""
    if not isinstance(text, str):
        raise MalformedTopicError(repr(text), "not a string")
    body, sep, instance = text.partition("#")
    segments = body.split(".")
    if len(segments) != 3:
        raise MalformedTopicError(text, f"expected 3 dot-separated segments, got {len(segments)}")
    version, tclass, name = segments
    if tclass not in TECHNICAL_CLASSES:
        raise MalformedTopicError(text, f"bad class {tclass!r}")
    try:
        return TopicAddress(version, tclass, name, instance if sep else None)
    except InvalidTokenError as exc:
        raise MalformedTopicError(text, f"bad token: {exc}") from exc


@dataclass(frozen=True)
class CorrelationId:
    """Opaque 128-bit id rendered as 32 lowercase hex characters."""

    value: str

    def __post_init__(self) -> None:
        if not re.match(r"^[0-9a-f]{32}$", self.value):
            raise MessagingError(f"correlation id must be 32 lowercase hex chars: {self.value!r}")

    @staticmethod
    def fresh() -> CorrelationId:
        return CorrelationId(uuid.uuid4().hex)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class RoutingStep:
    """One slip entry: where to send the next message and what it expects."""

    target: TopicAddress
    routing_key: str
    expected_schema: str

    def __post_init__(self) -> None:
        _check_token("routingKey", self.routing_key)


@dataclass(frozen=True)
class RoutingSlip:
    """Last-in-first-out stack of routing steps.

    ``steps`` is stored bottom first: the final reply endpoint is
    ``steps[0]`` and the next hop is ``steps[-1]``.
    """

    steps: tuple[RoutingStep, ...] = ()

    def push(self, step: RoutingStep) -> RoutingSlip:
        return RoutingSlip(self.steps + (step,))

    def pop(self) -> tuple[RoutingStep, RoutingSlip]:
        if not self.steps:
            raise EmptySlipError("cannot pop an empty routing slip")
        return self.steps[-1], RoutingSlip(self.steps[:-1])

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class ErrorInfo:
    origin_capability: str
    message: str
    context: tuple[str, ...]
    correlation_id: CorrelationId

    def __post_init__(self) -> None:
        if not self.message:
            raise MessagingError("error message must be non-empty")


def _now_ms() -> int:
    return int(datetime.now(timezone.utc).timestamp() * 1000)


@dataclass(frozen=True)
class Envelope:
    """The unit of inter-service communication.

    ``created_at_ms`` is informational only and excluded from equality.
    """

    envelope_id: CorrelationId
    correlation_id: CorrelationId
    slip: RoutingSlip
    payload_schema: str
    payload: Any
    status: str = OK
    error_info: ErrorInfo | None = None
    created_at_ms: int = field(default_factory=_now_ms, compare=False)

    def __post_init__(self) -> None:
        if self.status not in (OK, ERROR):
            raise MessagingError(f"bad envelope status {self.status!r}")
        if (self.status == ERROR) != (self.error_info is not None):
            raise MessagingError("status == error iff errorInfo present")


# ---------------------------------------------------------------------------
# Payload schema registry.
#
# Schema ids are opaque strings on the wire; there is no registry service.
# The ids produced by this artifact's own services are known here so that
# new_request() can reject obviously wrong payloads early. A payload for a
# known schema must carry exactly the required keys (plus the optional
# ones); unknown schema ids pass through unchecked.
#
# Every schema admits the reserved optional key "carry": an opaque document
# that transforming services copy verbatim from request to reply, giving
# orchestrating capabilities an isolated place to keep per-request state
# inside the message itself.
# ---------------------------------------------------------------------------

CARRY_KEY = "carry"

KNOWN_SCHEMAS: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    # schema id -> (required keys, optional keys)
    "solving-request/1": (frozenset({"planner", "language", "domain", "problem"}), frozenset()),
    "parsing-request/1": (frozenset({"domain", "problem", "language"}), frozenset()),
    "parsed-model/1": (frozenset({"domain", "problem", "counts"}), frozenset()),
    "ground-task/1": (
        frozenset({"facts", "init", "goalPos", "goalNeg", "actions", "unsolvable"}),
        frozenset(),
    ),
    "plan/1": (frozenset({"outcome", "plan", "length", "stats"}), frozenset({"steps"})),
    "validation-request/1": (frozenset({"task", "plan"}), frozenset()),
    "validation-report/1": (
        frozenset({"valid", "goalSatisfied", "finalStateSize"}),
        frozenset({"failingStep"}),
    ),
    "capability-announce/1": (
        frozenset({"name", "operationalClass", "technicalClass", "topic", "routingKey",
                   "inputSchema", "outputSchema", "instanceGroup", "heartbeatSeconds"}),
        frozenset(),
    ),
}


def check_payload_schema(payload: Any, schema: str) -> None:
    """Raise SchemaMismatchError when a known schema's key set is violated."""
    spec = KNOWN_SCHEMAS.get(schema)
    if spec is None:
        return
    if not isinstance(payload, dict):
        raise SchemaMismatchError(f"{schema}: payload must be an object")
    required, optional = spec
    keys = set(payload.keys()) - {CARRY_KEY}
    missing = required - keys
    extra = keys - required - optional
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing {sorted(missing)}")
        if extra:
            parts.append(f"unexpected {sorted(extra)}")
        raise SchemaMismatchError(f"{schema}: " + ", ".join(parts))


# ---------------------------------------------------------------------------
# Envelope operations
# ---------------------------------------------------------------------------


def new_request(
    payload: Any,
    schema: str,
    final_reply: RoutingStep,
    correlation_id: CorrelationId | None = None,
) -> Envelope:
    """Build a fresh request whose slip contains only the final reply step."""
    check_payload_schema(payload, schema)
    return Envelope(
        envelope_id=CorrelationId.fresh(),
        correlation_id=correlation_id or CorrelationId.fresh(),
        slip=RoutingSlip((final_reply,)),
        payload_schema=schema,
        payload=payload,
    )


def advance(envelope: Envelope) -> tuple[RoutingStep, Envelope]:
    """Pop the top slip entry; the returned envelope is one step shorter.

    Raises EmptySlipError on a drained slip, which callers must treat as a
    protocol violation and route to the error queue.
    """
    step, rest = envelope.slip.pop()
    return step, replace(envelope, slip=rest)


def fail(envelope: Envelope, origin: str, message: str, context: list[str] | tuple[str, ...] = ()) -> Envelope:
    """Mark an envelope as failed, preserving correlation id, slip and payload."""
    info = ErrorInfo(
        origin_capability=origin,
        message=message,
        context=tuple(context),
        correlation_id=envelope.correlation_id,
    )
    return replace(envelope, status=ERROR, error_info=info)


def with_payload(envelope: Envelope, payload: Any, schema: str) -> Envelope:
    """Swap in a new payload document, carrying the reserved pass-through key.

    If the inbound payload held a ``carry`` document and the new payload
    does not set one, it is copied over verbatim so that per-request state
    survives transforming hops without any service-local storage.
    """
    check_payload_schema(payload, schema)
    if (
        isinstance(envelope.payload, dict)
        and CARRY_KEY in envelope.payload
        and isinstance(payload, dict)
        and CARRY_KEY not in payload
    ):
        payload = {**payload, CARRY_KEY: envelope.payload[CARRY_KEY]}
    return replace(envelope, payload=payload, payload_schema=schema)


# ---------------------------------------------------------------------------
# Wire codec: one top-level JSON object, field names fixed.
# ---------------------------------------------------------------------------


def _format_created_at(ms: int) -> str:
    dt = datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms % 1000:03d}Z"


def _parse_created_at(text: str) -> int:
    dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp() * 1000))


def step_to_dict(step: RoutingStep) -> dict[str, str]:
    return {"topic": step.target.format(), "routingKey": step.routing_key, "schema": step.expected_schema}


def step_from_dict(doc: dict[str, Any]) -> RoutingStep:
    return RoutingStep(parse_topic(doc["topic"]), doc["routingKey"], doc["schema"])


def envelope_to_dict(envelope: Envelope) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "envelopeId": envelope.envelope_id.value,
        "correlationId": envelope.correlation_id.value,
        "slip": [step_to_dict(s) for s in envelope.slip.steps],
        "payloadSchema": envelope.payload_schema,
        "payload": envelope.payload,
        "status": envelope.status,
        "createdAt": _format_created_at(envelope.created_at_ms),
    }
    if envelope.error_info is not None:
        info = envelope.error_info
        doc["errorInfo"] = {
            "origin": info.origin_capability,
            "message": info.message,
            "context": list(info.context),
            "correlationId": info.correlation_id.value,
        }
    return doc


def envelope_from_dict(doc: dict[str, Any]) -> Envelope:
    error_info = None
    if "errorInfo" in doc and doc["errorInfo"] is not None:
        raw = doc["errorInfo"]
        error_info = ErrorInfo(
            origin_capability=raw["origin"],
            message=raw["message"],
            context=tuple(raw["context"]),
            correlation_id=CorrelationId(raw["correlationId"]),
        )
    return Envelope(
        envelope_id=CorrelationId(doc["envelopeId"]),
        correlation_id=CorrelationId(doc["correlationId"]),
        slip=RoutingSlip(tuple(step_from_dict(s) for s in doc["slip"])),
        payload_schema=doc["payloadSchema"],
        payload=doc["payload"],
        status=doc["status"],
        error_info=error_info,
        created_at_ms=_parse_created_at(doc["createdAt"]),
    )


def encode_envelope(envelope: Envelope) -> str:
    return json.dumps(envelope_to_dict(envelope), separators=(",", ":"), sort_keys=True)


def decode_envelope(text: str) -> Envelope:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MessagingError(f"undecodable envelope: {exc}") from exc
    if not isinstance(doc, dict):
        raise MessagingError("envelope must be a JSON object")
    try:
        return envelope_from_dict(doc)
    except (KeyError, TypeError, ValueError, MessagingError) as exc:
        raise MessagingError(f"undecodable envelope: {exc}") from exc
