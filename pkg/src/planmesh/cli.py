"""The `planmesh` command: broker, workers, composition, solve, validate.

Subcommands mirror the deployment units. `broker` runs the hub, `serve`
runs one capability (including `managing`, the gateway), `up` composes a
whole system from a profile as supervised child processes, and `solve` /
`validate` are the operator's client commands. stdout carries only the
result; diagnostics go to stderr.

Exit codes: 0 success, 1 no plan / invalid plan, 2 port or broker loss,
64 unknown capability, 65 malformed profile, 66 missing input file.
"""

from __future__ import annotations

import argparse
import http.client
import json
import os
import signal
import socket
import subprocess
import sys
import threading
import time
import urllib.parse
from typing import Any, Sequence

from .broker import Broker, BrokerError
from .broker_tcp import BrokerServer, TcpBrokerClient
from .compose import ANNOUNCE_EXTRAS, HANDLERS, ServiceSpec, descriptor_for, load_profile, ProfileError
from .gateway import DEFAULT_HTTP_PORT, Gateway
from .grounding import GroundingError, ground
from .pddl import PddlError, parse_domain, parse_problem
from .runtime import run_worker
from .solving import UnknownPlannerError, solve_task
from .validation import UnknownActionError, validate

EX_OK = 0
EX_FAILURE = 1
EX_UNAVAILABLE = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66

DEFAULT_BROKER_ADDRESS = "127.0.0.1:7311"
SERVABLE = tuple(HANDLERS) + ("managing",)


def _log(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _broker_address(value: str | None) -> str:
    return value or os.environ.get("PLANMESH_BROKER") or DEFAULT_BROKER_ADDRESS


def _split_address(address: str) -> tuple[str, int]:
    host, _, port_text = address.rpartition(":")
    return host or "127.0.0.1", int(port_text)


def _wait_for_signal() -> threading.Event:
    """Install INT/TERM handlers that set (and return) a stop event."""
    stop = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, lambda *_: stop.set())
    return stop


# -- broker ----------------------------------------------------------------


def cmd_broker(args: argparse.Namespace) -> int:
    broker = Broker()
    try:
        server = BrokerServer(broker, host=args.host, port=args.port)
        server.start()
    except OSError as exc:
        _log(f"cannot bind broker port: {exc}")
        return EX_UNAVAILABLE
    print(server.address, flush=True)
    stop = _wait_for_signal()
    stop.wait()
    server.stop()
    broker.close()
    return EX_OK


# -- serve -----------------------------------------------------------------


def _serve_gateway(args: argparse.Namespace, stop: threading.Event) -> int:
    address = _broker_address(args.broker)
    try:
        client = TcpBrokerClient.from_address(address)
    except BrokerError as exc:
        _log(f"broker unreachable at {address}: {exc}")
        return EX_UNAVAILABLE
    port = args.http_port
    if port is None:
        port = int(os.environ.get("PLANMESH_HTTP_PORT", DEFAULT_HTTP_PORT))
    try:
        gateway = Gateway(client, port=port, static_dir=args.static).start()
    except OSError as exc:
        _log(f"cannot bind gateway port: {exc}")
        client.close()
        return EX_UNAVAILABLE
    print(gateway.address, flush=True)
    stop.wait()
    gateway.stop()
    client.close()
    return EX_OK


def cmd_serve(args: argparse.Namespace) -> int:
    if args.capability not in SERVABLE:
        _log(f"unknown capability {args.capability!r} (choose from {list(SERVABLE)})")
        return EX_USAGE
    stop = _wait_for_signal()
    if args.capability == "managing":
        return _serve_gateway(args, stop)

    address = _broker_address(args.broker)
    try:
        client = TcpBrokerClient.from_address(address)
    except BrokerError as exc:
        _log(f"broker unreachable at {address}: {exc}")
        return EX_UNAVAILABLE
    descriptor = descriptor_for(ServiceSpec(args.capability, args.instance or ""))
    _log(f"serving {args.capability} on queue {descriptor.queue_name} via {address}")
    code = run_worker(
        descriptor,
        HANDLERS[args.capability],
        client,
        stop=stop,
        announce_extras=ANNOUNCE_EXTRAS.get(args.capability),
    )
    client.close()
    return code


# -- up ----------------------------------------------------------------------


def _spawn(argv: list[str]) -> subprocess.Popen:
    return subprocess.Popen(
        [sys.executable, "-m", "planmesh", *argv],
        stdout=subprocess.DEVNULL,
        stderr=sys.stderr,
    )


def _wait_for_broker(address: str, timeout_s: float = 10.0) -> bool:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        try:
            client = TcpBrokerClient.from_address(address)
            client.close()
            return True
        except BrokerError:
            time.sleep(0.1)
    return False


def _wait_for_gateway(port: int, timeout_s: float = 10.0) -> bool:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        conn = http.client.HTTPConnection("127.0.0.1", port, timeout=1.0)
        try:
            conn.request("GET", "/api/health")
            conn.getresponse().read()
            return True
        except OSError:
            time.sleep(0.1)
        finally:
            conn.close()
    return False


def _wait_for_capabilities(port: int, names: set[str], timeout_s: float = 15.0) -> bool:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        conn = http.client.HTTPConnection("127.0.0.1", port, timeout=1.0)
        try:
            conn.request("GET", "/api/capabilities")
            doc = json.loads(conn.getresponse().read().decode("utf-8"))
            if names <= {c["name"] for c in doc.get("capabilities", [])}:
                return True
        except (OSError, ValueError):
            pass
        finally:
            conn.close()
        time.sleep(0.1)
    return False


def cmd_up(args: argparse.Namespace) -> int:
    try:
        profile = load_profile(args.profile) if args.profile else None
    except FileNotFoundError as exc:
        _log(f"profile not found: {exc}")
        return EX_NOINPUT
    except ProfileError as exc:
        _log(f"malformed profile: {exc}")
        return EX_DATAERR
    if profile is None:
        from .compose import default_profile

        profile = default_profile()

    host, port = _split_address(profile.broker_address)
    children: list[subprocess.Popen] = []

    def teardown() -> None:
        for child in reversed(children):
            if child.poll() is None:
                child.terminate()
        deadline = time.monotonic() + 5
        for child in reversed(children):
            remaining = max(0.1, deadline - time.monotonic())
            try:
                child.wait(timeout=remaining)
            except subprocess.TimeoutExpired:
                child.kill()
                child.wait()

    stop = _wait_for_signal()
    try:
        children.append(_spawn(["broker", "--host", host, "--port", str(port)]))
        if not _wait_for_broker(profile.broker_address):
            _log(f"broker did not come up on {profile.broker_address}")
            teardown()
            return EX_UNAVAILABLE

        # Gateway first: once its health endpoint answers, the monitor
        # queue is bound, so no worker announcement can slip past it.
        children.append(
            _spawn(
                ["serve", "managing", "--broker", profile.broker_address]
                + ["--http-port", str(profile.gateway_port)]
                + (["--static", args.static] if args.static else [])
            )
        )
        if not _wait_for_gateway(profile.gateway_port):
            _log(f"gateway did not come up on port {profile.gateway_port}")
            teardown()
            return EX_UNAVAILABLE

        for spec in profile.services:
            if spec.capability == "managing":
                continue
            argv = ["serve", spec.capability, "--broker", profile.broker_address]
            if spec.instance_name:
                argv += ["--instance", spec.instance_name]
            for _ in range(spec.replicas):
                children.append(_spawn(argv))

        # The banner is the ready signal: hold it until every service in
        # the profile has announced itself to the registry.
        wanted = {spec.capability for spec in profile.services if spec.capability != "managing"}
        if not _wait_for_capabilities(profile.gateway_port, wanted):
            _log("services did not announce in time")
            teardown()
            return EX_UNAVAILABLE
        print(f"http://127.0.0.1:{profile.gateway_port}", flush=True)

        while not stop.wait(0.2):
            dead = next((child for child in children if child.poll() is not None), None)
            if dead is not None:
                _log(f"child exited unexpectedly with code {dead.returncode}; shutting down")
                teardown()
                return EX_FAILURE
        return EX_OK
    finally:
        teardown()


# -- solve --------------------------------------------------------------------


def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        _log(f"cannot read {path}: {exc}")
        raise SystemExit(EX_NOINPUT)


def _print_outcome(payload: dict[str, Any]) -> int:
    outcome = payload.get("outcome")
    if outcome == "solved":
        for step in payload.get("plan", []):
            print(step)
        stats = payload.get("stats", {})
        _log(
            f"solved: {payload.get('length')} steps, {stats.get('expanded')} expanded, "
            f"{stats.get('elapsedMs')} ms"
        )
        return EX_OK
    print(outcome, flush=True)
    return EX_FAILURE


def _ground_inputs(args: argparse.Namespace):
    try:
        domain = parse_domain(_read_file(args.domain))
        problem = parse_problem(_read_file(args.problem), domain)
        return ground(domain, problem)
    except (PddlError, GroundingError) as exc:
        _log(f"{type(exc).__name__}: {exc}")
        raise SystemExit(EX_FAILURE)


def _solve_local(args: argparse.Namespace) -> int:
    task = _ground_inputs(args)
    try:
        payload = solve_task(task, args.planner)
    except UnknownPlannerError as exc:
        _log(str(exc))
        return EX_FAILURE
    if payload.get("outcome") == "solved":
        report = validate(task, payload["plan"])
        if not report.valid:
            _log("internal error: solver produced an invalid plan")
            return EX_FAILURE
    return _print_outcome(payload)


def _solve_gateway(args: argparse.Namespace) -> int:
    domain_text = _read_file(args.domain)
    problem_text = _read_file(args.problem)
    parsed = urllib.parse.urlparse(args.gateway)
    host, port = parsed.hostname or "127.0.0.1", parsed.port or DEFAULT_HTTP_PORT

    stream = http.client.HTTPConnection(host, port, timeout=args.timeout)
    try:
        stream.request("GET", "/api/events")
        response = stream.getresponse()
        if response.status != 200:
            _log(f"gateway refused the event stream: HTTP {response.status}")
            return EX_FAILURE

        conn = http.client.HTTPConnection(host, port, timeout=args.timeout)
        body = json.dumps(
            {
                "domain": domain_text,
                "problem": problem_text,
                "planner": args.planner,
                "language": "pddl",
            }
        )
        conn.request("POST", "/api/solve", body=body, headers={"Content-Type": "application/json"})
        post_response = conn.getresponse()
        doc = json.loads(post_response.read().decode("utf-8"))
        conn.close()
        if post_response.status != 202:
            _log(f"gateway rejected the request: HTTP {post_response.status}: {doc.get('error')}")
            return EX_FAILURE
        correlation_id = doc["correlationId"]

        deadline = time.monotonic() + args.timeout
        while time.monotonic() < deadline:
            line = response.readline()
            if not line:
                break
            text = line.decode("utf-8").strip()
            if not text.startswith("data: "):
                continue
            event = json.loads(text[len("data: ") :])
            if event.get("correlationId") != correlation_id:
                continue
            if event["status"] == "done":
                return _print_outcome(event)
            error = event.get("error", {})
            _log(f"failed in {error.get('origin')}: {error.get('message')}")
            return EX_FAILURE
        _log("timed out waiting for a terminal event")
        return EX_FAILURE
    except (OSError, http.client.HTTPException) as exc:
        _log(f"cannot reach gateway at {args.gateway}: {exc}")
        return EX_FAILURE
    finally:
        stream.close()


def cmd_solve(args: argparse.Namespace) -> int:
    if args.local:
        return _solve_local(args)
    return _solve_gateway(args)


# -- validate -----------------------------------------------------------------


def read_plan_file(text: str) -> list[str]:
    """One ground action name per line; `;` starts a comment."""
    steps = []
    for line in text.splitlines():
        step = line.split(";", 1)[0].strip()
        if step:
            steps.append(step)
    return steps


def cmd_validate(args: argparse.Namespace) -> int:
    task = _ground_inputs(args)
    steps = read_plan_file(_read_file(args.plan))
    try:
        report = validate(task, steps)
    except UnknownActionError as exc:
        _log(str(exc))
        return EX_FAILURE
    if report.valid:
        print(f"valid: goal satisfied after {len(steps)} steps")
        return EX_OK
    failing = report.failing_step
    if failing is not None:
        detail = []
        if failing.missing:
            detail.append("missing " + ", ".join(failing.missing))
        if failing.violated:
            detail.append("violated " + ", ".join(failing.violated))
        print(f"invalid: step {failing.index} {failing.action}: " + "; ".join(detail))
    else:
        print("invalid: plan executes but the goal is not satisfied")
    return EX_FAILURE


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planmesh", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    broker = commands.add_parser("broker", help="run the message broker")
    broker.add_argument("--host", default="127.0.0.1")
    broker.add_argument("--port", type=int, default=7311)
    broker.set_defaults(run=cmd_broker)

    serve = commands.add_parser("serve", help="run one capability service")
    serve.add_argument("capability", help=f"one of {', '.join(SERVABLE)}")
    serve.add_argument("--instance", default="", help="instance group (queue suffix)")
    serve.add_argument("--broker", default=None, help="broker host:port (or $PLANMESH_BROKER)")
    serve.add_argument("--http-port", type=int, default=None, help="managing only: HTTP port")
    serve.add_argument("--static", default=None, help="managing only: static files directory")
    serve.set_defaults(run=cmd_serve)

    up = commands.add_parser("up", help="run broker, services, and gateway from a profile")
    up.add_argument("--profile", default=None, help="profile JSON (defaults to one replica each)")
    up.add_argument("--static", default=None, help="static files directory for the gateway")
    up.set_defaults(run=cmd_up)

    solve = commands.add_parser("solve", help="submit a problem and print the plan")
    solve.add_argument("-d", "--domain", required=True)
    solve.add_argument("-p", "--problem", required=True)
    solve.add_argument("--planner", required=True, help='e.g. "bfs", "astar:hmax", "gbfs:hff"')
    solve.add_argument("--local", action="store_true", help="solve in-process without a broker")
    solve.add_argument("--gateway", default=f"http://127.0.0.1:{DEFAULT_HTTP_PORT}")
    solve.add_argument("--timeout", type=float, default=120.0)
    solve.set_defaults(run=cmd_solve)

    check = commands.add_parser("validate", help="check a plan file against a problem")
    check.add_argument("-d", "--domain", required=True)
    check.add_argument("-p", "--problem", required=True)
    check.add_argument("--plan", required=True, help="plan file: one action per line, ; comments")
    check.set_defaults(run=cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except KeyboardInterrupt:
        return EX_OK


if __name__ == "__main__":
    sys.exit(main())
