"""Well-known mesh addresses and the descriptors of the stock capabilities.

Everything the mesh ships with lives at a fixed, versioned address so
that capabilities can compose each other's work without discovery.
Routing steps here are the building blocks of every slip: a step names
the topic to publish to, the routing key, and the schema the receiving
capability expects.
"""

from __future__ import annotations

from .messaging import RoutingStep, make_topic
from .runtime import (
    ANNOUNCE_KEY,
    ERROR_KEY,
    MANAGING_TOPIC,
    MONITORING_TOPIC,
    REPLY_KEY,
    CapabilityDescriptor,
)

PARSING_TOPIC = make_topic("v1", "transforming", "parsing", "pddl")
CONVERTING_TOPIC = make_topic("v1", "transforming", "converting", "pddl-ground")
SOLVING_TOPIC = make_topic("v1", "transforming", "solving", "strips")
VALIDATING_TOPIC = make_topic("v1", "transforming", "validating", "plan")

PDDL_KEY = "pddl"
SOLVE_KEY = "solve"
RESUME_KEY = "resume"
VALIDATE_KEY = "validate"

PARSE_STEP = RoutingStep(PARSING_TOPIC, PDDL_KEY, "parsing-request/1")
ENCODE_STEP = RoutingStep(CONVERTING_TOPIC, PDDL_KEY, "parsed-model/1")
SOLVE_STEP = RoutingStep(SOLVING_TOPIC, SOLVE_KEY, "solving-request/1")
RESUME_STEP = RoutingStep(SOLVING_TOPIC, RESUME_KEY, "ground-task/1")
VALIDATE_STEP = RoutingStep(VALIDATING_TOPIC, VALIDATE_KEY, "validation-request/1")
REPLY_STEP = RoutingStep(MANAGING_TOPIC, REPLY_KEY, "plan/1")

PARSING_DESCRIPTOR = CapabilityDescriptor(
    name="parsing",
    operational_class="supplemental",
    technical_class="transforming",
    topic=PARSING_TOPIC,
    routing_key=PDDL_KEY,
    input_schema="parsing-request/1",
    output_schema="parsed-model/1",
)

CONVERTING_DESCRIPTOR = CapabilityDescriptor(
    name="converting",
    operational_class="enabling",
    technical_class="transforming",
    topic=CONVERTING_TOPIC,
    routing_key=PDDL_KEY,
    input_schema="parsed-model/1",
    output_schema="ground-task/1",
)

# Solving consumes both fresh requests (key "solve") and its own resumed
# pipelines (key "resume"), so its queue binds with the wildcard.
SOLVING_DESCRIPTOR = CapabilityDescriptor(
    name="solving",
    operational_class="core",
    technical_class="transforming",
    topic=SOLVING_TOPIC,
    routing_key="*",
    input_schema="solving-request/1",
    output_schema="plan/1",
)

VALIDATING_DESCRIPTOR = CapabilityDescriptor(
    name="validating",
    operational_class="enabling",
    technical_class="transforming",
    topic=VALIDATING_TOPIC,
    routing_key=VALIDATE_KEY,
    input_schema="validation-request/1",
    output_schema="validation-report/1",
)

MANAGING_DESCRIPTOR = CapabilityDescriptor(
    name="managing",
    operational_class="enabling",
    technical_class="routing",
    topic=MANAGING_TOPIC,
    routing_key=REPLY_KEY,
    input_schema="plan/1",
    output_schema="solving-request/1",
)

DESCRIPTORS = {
    "parsing": PARSING_DESCRIPTOR,
    "converting": CONVERTING_DESCRIPTOR,
    "solving": SOLVING_DESCRIPTOR,
    "validating": VALIDATING_DESCRIPTOR,
    "managing": MANAGING_DESCRIPTOR,
}

__all__ = [
    "ANNOUNCE_KEY",
    "CONVERTING_DESCRIPTOR",
    "CONVERTING_TOPIC",
    "DESCRIPTORS",
    "ENCODE_STEP",
    "ERROR_KEY",
    "MANAGING_DESCRIPTOR",
    "MANAGING_TOPIC",
    "MONITORING_TOPIC",
    "PARSE_STEP",
    "PARSING_DESCRIPTOR",
    "PARSING_TOPIC",
    "PDDL_KEY",
    "REPLY_KEY",
    "REPLY_STEP",
    "RESUME_KEY",
    "RESUME_STEP",
    "SOLVE_KEY",
    "SOLVE_STEP",
    "SOLVING_DESCRIPTOR",
    "SOLVING_TOPIC",
    "VALIDATE_KEY",
    "VALIDATE_STEP",
    "VALIDATING_DESCRIPTOR",
    "VALIDATING_TOPIC",
]
