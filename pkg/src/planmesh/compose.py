"""Composition: profiles describing a mesh, and a System that runs one.

A profile is a small JSON document — broker address, gateway port, and
the list of capability services with replica counts. The System wires
the same pieces the CLI spawns as processes, but inside one process:
an (optionally TCP-exposed) broker, one Worker per replica, and the
gateway. Tests and `planmesh up` share this code so the composed system
is the tested system.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable

from .broker import Broker
from .broker_tcp import BrokerServer, TcpBrokerClient
from .gateway import Gateway
from .grounding import handle_encoding_request
from .pddl import handle_parsing_request
from .runtime import CapabilityDescriptor, HandlerOutcome, Worker
from .solving import PLANNERS, handle_solving
from .topology import DESCRIPTORS
from .validation import handle_validation_request


class ProfileError(ValueError):
    """A profile document is malformed."""


@dataclass(frozen=True)
class ServiceSpec:
    capability: str
    instance_name: str = ""
    replicas: int = 1


@dataclass(frozen=True)
class Profile:
    broker_address: str = "127.0.0.1:7311"
    gateway_port: int = 8080
    services: tuple[ServiceSpec, ...] = ()


WORKER_CAPABILITIES = ("parsing", "converting", "solving", "validating")
# "managing" may appear in a profile; the gateway runs regardless, so the
# entry is validated and otherwise inert.
PROFILE_CAPABILITIES = WORKER_CAPABILITIES + ("managing",)


def _wrap(handler: Callable[[dict], dict], schema: str):
    def adapted(payload, _schema):
        return HandlerOutcome.result(handler(payload), schema)

    return adapted


HANDLERS: dict[str, Callable] = {
    "parsing": _wrap(handle_parsing_request, "parsed-model/1"),
    "converting": _wrap(handle_encoding_request, "ground-task/1"),
    "solving": handle_solving,
    "validating": _wrap(handle_validation_request, "validation-report/1"),
}

# Announcement riders per capability: solving advertises its planner
# catalog, which the gateway registry then exposes to clients.
ANNOUNCE_EXTRAS: dict[str, dict] = {
    "solving": {"planners": list(PLANNERS)},
}


def default_profile() -> Profile:
    return Profile(
        services=tuple(ServiceSpec(capability=name) for name in WORKER_CAPABILITIES),
    )


def parse_profile(doc: Any) -> Profile:
    if not isinstance(doc, dict):
        raise ProfileError("profile must be a JSON object")
    unknown = set(doc) - {"brokerAddress", "gatewayPort", "services"}
    if unknown:
        raise ProfileError(f"unknown profile keys: {sorted(unknown)}")

    address = doc.get("brokerAddress", "127.0.0.1:7311")
    if not isinstance(address, str) or ":" not in address:
        raise ProfileError(f"brokerAddress must be host:port, got {address!r}")
    host, _, port_text = address.rpartition(":")
    if not host or not port_text.isdigit():
        raise ProfileError(f"brokerAddress must be host:port, got {address!r}")

    gateway_port = doc.get("gatewayPort", 8080)
    if not isinstance(gateway_port, int) or isinstance(gateway_port, bool) or not 0 <= gateway_port <= 65535:
        raise ProfileError(f"gatewayPort must be a port number, got {gateway_port!r}")

    raw_services = doc.get("services", [{"capability": name} for name in WORKER_CAPABILITIES])
    if not isinstance(raw_services, list):
        raise ProfileError("services must be a list")
    services = []
    for entry in raw_services:
        if not isinstance(entry, dict):
            raise ProfileError(f"service entry must be an object, got {entry!r}")
        capability = entry.get("capability")
        if capability not in PROFILE_CAPABILITIES:
            raise ProfileError(f"unknown capability {capability!r} (choose from {list(PROFILE_CAPABILITIES)})")
        replicas = entry.get("replicas", 1)
        if not isinstance(replicas, int) or isinstance(replicas, bool) or replicas < 1:
            raise ProfileError(f"replicas must be a positive integer, got {replicas!r}")
        instance_name = entry.get("instanceName", "")
        if instance_name and not isinstance(instance_name, str):
            raise ProfileError(f"instanceName must be a string, got {instance_name!r}")
        services.append(ServiceSpec(capability=capability, instance_name=instance_name, replicas=replicas))
    return Profile(broker_address=address, gateway_port=gateway_port, services=tuple(services))


def load_profile(path: str | Path) -> Profile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(str(exc)) from exc
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise ProfileError(f"profile is not valid JSON: {exc}") from exc
    return parse_profile(doc)


def descriptor_for(spec: ServiceSpec) -> CapabilityDescriptor:
    descriptor = DESCRIPTORS[spec.capability]
    if spec.instance_name:
        return replace(descriptor, instance_group=spec.instance_name)
    return descriptor


class System:
    """A whole mesh in one process.

    ``transport="memory"`` shares one in-process broker object;
    ``transport="tcp"`` starts a broker server and gives every worker
    and the gateway its own TCP client, exercising the wire protocol.
    """

    def __init__(
        self,
        profile: Profile | None = None,
        transport: str = "memory",
        gateway_port: int | None = None,
        static_dir: str | None = None,
        request_timeout_s: float = 60.0,
        heartbeat_seconds: float = 5.0,
    ):
        if transport not in ("memory", "tcp"):
            raise ValueError(f"unknown transport {transport!r}")
        self.profile = profile or default_profile()
        self.transport = transport
        self.gateway_port = gateway_port
        self.static_dir = static_dir
        self.request_timeout_s = request_timeout_s
        self.heartbeat_seconds = heartbeat_seconds

        self.broker = Broker()
        self.server: BrokerServer | None = None
        self.workers: list[Worker] = []
        self.gateway: Gateway | None = None
        self._clients: list[TcpBrokerClient] = []
        self._lock = threading.Lock()

    def _client(self):
        if self.transport == "memory":
            return self.broker
        client = TcpBrokerClient.from_address(self.server.address)
        self._clients.append(client)
        return client

    def start(self) -> "System":
        if self.transport == "tcp":
            host, _, port_text = self.profile.broker_address.rpartition(":")
            self.server = BrokerServer(self.broker, host=host or "127.0.0.1", port=int(port_text))
            self.server.start()

        for spec in self.profile.services:
            if spec.capability == "managing":
                continue
            descriptor = descriptor_for(spec)
            for _ in range(spec.replicas):
                worker = Worker(
                    descriptor,
                    HANDLERS[spec.capability],
                    self._client(),
                    self.heartbeat_seconds,
                    announce_extras=ANNOUNCE_EXTRAS.get(spec.capability),
                )
                self.workers.append(worker.start())

        port = self.gateway_port if self.gateway_port is not None else self.profile.gateway_port
        self.gateway = Gateway(
            self._client(),
            port=port,
            request_timeout_s=self.request_timeout_s,
            heartbeat_seconds=self.heartbeat_seconds,
            static_dir=self.static_dir,
        ).start()
        return self

    def stop(self) -> None:
        if self.gateway is not None:
            self.gateway.stop()
        for worker in self.workers:
            worker.stop()
        for client in self._clients:
            client.close()
        if self.server is not None:
            self.server.stop()
        self.broker.close()

    def __enter__(self) -> "System":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
