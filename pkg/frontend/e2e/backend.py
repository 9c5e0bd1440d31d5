"""Composed in-process backend for the console's end-to-end run.

Starts the broker, one worker per capability (fast heartbeats so badge
transitions show up quickly), and the gateway serving the built bundle.
Prints the bound port, then executes line commands from stdin:
``kill-solving`` stops the solving worker, ``exit`` tears everything
down.
"""

import sys
from pathlib import Path

from planmesh.broker import Broker
from planmesh.compose import ANNOUNCE_EXTRAS, HANDLERS, ServiceSpec, descriptor_for
from planmesh.gateway import Gateway
from planmesh.runtime import Worker


def main() -> int:
    static_dir = Path(sys.argv[1]).resolve()
    heartbeat = float(sys.argv[2]) if len(sys.argv) > 2 else 0.5

    broker = Broker()
    workers = {}
    for capability in HANDLERS:
        workers[capability] = Worker(
            descriptor_for(ServiceSpec(capability)),
            HANDLERS[capability],
            broker,
            heartbeat_seconds=heartbeat,
            announce_extras=ANNOUNCE_EXTRAS.get(capability),
        ).start()
    gateway = Gateway(
        broker,
        port=0,
        request_timeout_s=30.0,
        heartbeat_seconds=heartbeat,
        static_dir=static_dir,
    )
    gateway.start()
    print(f"PORT {gateway.port}", flush=True)

    try:
        for line in sys.stdin:
            command = line.strip()
            if command == "kill-solving" and "solving" in workers:
                workers.pop("solving").stop()
                print("OK kill-solving", flush=True)
            elif command == "exit":
                break
    finally:
        gateway.stop()
        for worker in workers.values():
            worker.stop()
        broker.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
