"""Deterministic OpenAI-compatible mock backend with an analytic energy model.

Service model: at most `capacity` requests execute at once; arrivals beyond
that wait in FIFO order; every request occupies a slot for exactly
`per_request_duration` seconds and returns `tokens_per_response` tokens of
fixed filler text. Draw is utilization-linear: idle_power + peak_power x
(inflight / capacity). Both pieces have closed forms, so a harness measuring
this backend can be checked against exact expected values — including the
decrease-then-plateau shape of energy per request as load grows.

Implemented as a raw ASGI app (uvicorn): framework routing overhead at batch
boundaries would distort the makespans the closed form predicts.

Control surface (HTTP, same port):
    GET  /health               readiness probe
    GET  /control/power        current synthetic draw, for power samplers
    GET  /control/inflight_log timestamped inflight history
    GET  /control/config       effective MockConfig echo
    POST /control/reset        clear inflight log and the arrival counter
"""

from __future__ import annotations

import asyncio
import hashlib
import itertools
import json
import math
import socket
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

import uvicorn

_FILLER = ("lorem", "ipsum", "dolor", "sit", "amet", "consectetur", "adipiscing", "elit")


@dataclass(frozen=True)
class MockConfig:
    capacity: int = 100  # max concurrent batch size
    per_request_duration: float = 2.0  # seconds a request occupies a slot
    tokens_per_response: int = 16
    idle_power: float = 100.0  # watts at zero load
    peak_power: float = 300.0  # extra watts at full batch
    fault_schedule: Callable[[int], bool] | None = None  # by arrival index
    source_id: str = "gpu-mock"

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if self.per_request_duration <= 0:
            raise ValueError(f"per_request_duration must be > 0, got {self.per_request_duration}")
        if self.tokens_per_response < 1:
            raise ValueError(f"tokens_per_response must be >= 1, got {self.tokens_per_response}")
        if self.idle_power < 0 or self.peak_power < 0:
            raise ValueError("power levels must be >= 0")


def synthetic_power(cfg: MockConfig, inflight: int) -> float:
    """Utilization-linear draw: idle at 0 inflight, idle+peak at capacity."""
    return cfg.idle_power + cfg.peak_power * inflight / cfg.capacity


def analytic_energy_per_request(n: int, cfg: MockConfig) -> float:
    """Closed-form joules per request for an n-request burst.

    The burst executes as ceil(n/C) consecutive batches of duration d; the
    idle term is paid for the whole makespan while the utilization term
    integrates to peak_power x d x n / C regardless of batch packing:

        E/n = idle_power x ceil(n/C) x d / n  +  peak_power x d / C

    Strictly decreasing in n up to C, constant whenever n is a multiple of C.
    """
    if n < 1:
        raise ValueError(f"request count must be >= 1, got {n}")
    batches = math.ceil(n / cfg.capacity)
    d = cfg.per_request_duration
    total = cfg.idle_power * batches * d + cfg.peak_power * d * n / cfg.capacity
    return total / n


class FifoSlots:
    """Capacity gate with strict FIFO handoff (no slot stealing on release)."""

    def __init__(self, capacity: int):
        self._free = capacity
        self._waiters: deque[asyncio.Future] = deque()

    @property
    def waiting(self) -> int:
        return len(self._waiters)

    async def acquire(self) -> None:
        if self._free > 0 and not self._waiters:
            self._free -= 1
            return
        fut = asyncio.get_running_loop().create_future()
        self._waiters.append(fut)
        try:
            await fut
        except asyncio.CancelledError:
            if fut.done() and not fut.cancelled():
                self.release()  # slot was handed over as we got cancelled
            else:
                self._waiters.remove(fut)
            raise

    def release(self) -> None:
        while self._waiters:
            fut = self._waiters.popleft()
            if not fut.cancelled():
                fut.set_result(None)  # hand the slot directly to the next waiter
                return
        self._free += 1


class ServerState:
    """Slot accounting plus the timestamped inflight history.

    All mutation happens on the serving event loop, so readers on that loop
    see consistent snapshots; cross-thread readers see a single int.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.slots = FifoSlots(capacity)
        self.inflight = 0
        self.arrivals = 0
        self.inflight_log: list[tuple[float, int]] = []

    def _log(self) -> None:
        self.inflight_log.append((time.monotonic(), self.inflight))

    def enter_service(self) -> None:
        self.inflight += 1
        self._log()

    def leave_service(self) -> None:
        self.inflight -= 1
        self._log()

    def reset_history(self) -> None:
        self.inflight_log.clear()
        self.arrivals = 0


class MockApp:
    """ASGI application implementing the completions API and control surface."""

    def __init__(self, cfg: MockConfig):
        self.cfg = cfg
        self.state = ServerState(cfg.capacity)

    async def __call__(self, scope, receive, send) -> None:
        if scope["type"] == "lifespan":
            await _lifespan(receive, send)
            return
        if scope["type"] != "http":
            return
        body = b""
        while True:
            message = await receive()
            body += message.get("body", b"")
            if not message.get("more_body"):
                break
        method, path = scope["method"], scope["path"]
        if method == "POST" and path == "/v1/completions":
            status, payload = await self._handle_completion(body)
        elif method == "GET" and path == "/health":
            status, payload = 200, {"status": "ok"}
        elif method == "GET" and path == "/control/power":
            status, payload = 200, {
                "source_id": self.cfg.source_id,
                "watts": synthetic_power(self.cfg, self.state.inflight),
                "inflight": self.state.inflight,
            }
        elif method == "GET" and path == "/control/inflight_log":
            status, payload = 200, {
                "capacity": self.state.capacity,
                "arrivals": self.state.arrivals,
                "log": self.state.inflight_log,
            }
        elif method == "GET" and path == "/control/config":
            status, payload = 200, {
                "capacity": self.cfg.capacity,
                "per_request_duration": self.cfg.per_request_duration,
                "tokens_per_response": self.cfg.tokens_per_response,
                "idle_power": self.cfg.idle_power,
                "peak_power": self.cfg.peak_power,
                "source_id": self.cfg.source_id,
            }
        elif method == "POST" and path == "/control/reset":
            self.state.reset_history()
            status, payload = 200, {"ok": True}
        else:
            status, payload = 404, {"error": {"message": f"no route {method} {path}", "code": 404}}
        await _respond(send, status, payload)

    async def _handle_completion(self, body: bytes) -> tuple[int, dict]:
        try:
            request = json.loads(body)
        except json.JSONDecodeError:
            return 400, {"error": {"message": "request body is not JSON", "code": 400}}
        model = request.get("model")
        prompt = request.get("prompt")
        if not isinstance(model, str) or not isinstance(prompt, str):
            return 400, {"error": {"message": "model and prompt are required", "code": 400}}

        index = self.state.arrivals
        self.state.arrivals += 1

        await self.state.slots.acquire()
        self.state.enter_service()
        try:
            await asyncio.sleep(self.cfg.per_request_duration)
        finally:
            self.state.leave_service()
            self.state.slots.release()

        if self.cfg.fault_schedule is not None and self.cfg.fault_schedule(index):
            return 500, {"error": {"message": f"injected fault at request index {index}", "code": 500}}

        g = self.cfg.tokens_per_response
        text = " " + " ".join(itertools.islice(itertools.cycle(_FILLER), g))
        digest = hashlib.sha256(f"{model}\x00{prompt}".encode()).hexdigest()[:16]
        return 200, {
            "id": f"cmpl-{digest}",
            "object": "text_completion",
            "created": 0,
            "model": model,
            "choices": [{"index": 0, "text": text, "logprobs": None, "finish_reason": "length"}],
            "usage": {
                "prompt_tokens": len(prompt.split()),
                "completion_tokens": g,
                "total_tokens": len(prompt.split()) + g,
            },
        }


async def _lifespan(receive, send) -> None:
    while True:
        message = await receive()
        if message["type"] == "lifespan.startup":
            await send({"type": "lifespan.startup.complete"})
        elif message["type"] == "lifespan.shutdown":
            await send({"type": "lifespan.shutdown.complete"})
            return


async def _respond(send, status: int, payload: dict) -> None:
    body = json.dumps(payload).encode()
    await send(
        {
            "type": "http.response.start",
            "status": status,
            "headers": [
                (b"content-type", b"application/json"),
                (b"content-length", str(len(body)).encode()),
            ],
        }
    )
    await send({"type": "http.response.body", "body": body})


def bind_socket(host: str, port: int) -> socket.socket:
    """Bind the listening socket up front so the real port is known (port 0 ok)."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    return sock


def run_mock_server(cfg: MockConfig, sock: socket.socket) -> None:
    """Serve until interrupted on an already-bound socket (blocking)."""
    server = uvicorn.Server(
        uvicorn.Config(MockApp(cfg), log_level="warning", access_log=False, http="auto")
    )
    asyncio.run(server.serve(sockets=[sock]))
