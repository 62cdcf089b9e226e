"""Completions client: warm-up plus burst and fixed-rate dispatch.

Burst dispatch initiates every request in a single unpaced submission loop;
send_time is stamped at submission, so the recorded spread reflects the loop
itself and is independent of service time. Requests run concurrently with an
unbounded in-flight pool; per-request failures are recorded, never dropped,
and a run aborts only when nothing at all succeeded.
"""

from __future__ import annotations

import asyncio
import enum
import logging
import os
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import aiohttp

from .dataset import Prompt
from .errors import DispatchAborted, EndpointUnreachable
from .planner import RunSpec

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 300.0
API_KEY_ENV = "JOULEBENCH_API_KEY"
COMPLETIONS_PATH = "/v1/completions"


class RequestStatus(enum.Enum):
    OK = "ok"
    HTTP_ERROR = "http_error"
    TIMEOUT = "timeout"
    TRANSPORT_ERROR = "transport_error"


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    prompt: str
    max_tokens: int
    temperature: float = 0.0

    def body(self) -> dict:
        return {
            "model": self.model,
            "prompt": self.prompt,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }


@dataclass(frozen=True)
class RequestRecord:
    prompt_id: int
    send_time: float  # monotonic, stamped at submission
    completion_time: float  # monotonic, stamped at terminal state
    output_token_count: int
    status: RequestStatus
    http_status: int | None = None


@dataclass(frozen=True)
class WarmupSummary:
    requested: int
    failures: int
    started_at: float
    finished_at: float


def completions_url(endpoint: str) -> str:
    base = endpoint.rstrip("/")
    return base if base.endswith("/completions") else base + COMPLETIONS_PATH


def make_session() -> aiohttp.ClientSession:
    """Session with an unbounded connection pool (burst needs true fan-out)."""
    headers = {}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    return aiohttp.ClientSession(
        connector=aiohttp.TCPConnector(limit=0),
        headers=headers,
    )


async def check_reachable(session: aiohttp.ClientSession, endpoint: str, timeout: float = 5.0) -> None:
    """Raise EndpointUnreachable unless the endpoint accepts a connection.

    Any HTTP response counts as reachable; only transport failures do not.
    """
    base = endpoint.rstrip("/").removesuffix(COMPLETIONS_PATH)
    try:
        async with session.get(base + "/health", timeout=aiohttp.ClientTimeout(total=timeout)):
            return
    except (aiohttp.ClientResponseError,):
        return
    except (aiohttp.ClientError, asyncio.TimeoutError, OSError) as exc:
        raise EndpointUnreachable(f"{endpoint}: {exc}") from exc


async def _send_one(
    session: aiohttp.ClientSession,
    url: str,
    request: CompletionRequest,
    timeout: float,
) -> tuple[RequestStatus, int | None, int]:
    """Returns (status, http_status, completion_tokens)."""
    try:
        async with session.post(
            url, json=request.body(), timeout=aiohttp.ClientTimeout(total=timeout)
        ) as resp:
            if resp.status == 200:
                payload = await resp.json()
                tokens = int(payload.get("usage", {}).get("completion_tokens", 0))
                return RequestStatus.OK, resp.status, tokens
            await resp.read()
            return RequestStatus.HTTP_ERROR, resp.status, 0
    except asyncio.TimeoutError:
        return RequestStatus.TIMEOUT, None, 0
    except (aiohttp.ClientError, OSError):
        return RequestStatus.TRANSPORT_ERROR, None, 0


async def warmup_async(
    session: aiohttp.ClientSession,
    endpoint: str,
    model: str,
    prompts: Sequence[Prompt],
    count: int,
    *,
    max_tokens: int = 16,
    temperature: float = 0.0,
    timeout: float = DEFAULT_TIMEOUT_S,
) -> WarmupSummary:
    """Send exactly `count` unmeasured requests (cycling the prompt list) and
    wait for all of them to reach a terminal state."""
    started = time.monotonic()
    if count == 0:
        return WarmupSummary(0, 0, started, started)
    if not prompts:
        raise ValueError("warm-up needs at least one prompt")
    await check_reachable(session, endpoint)
    url = completions_url(endpoint)
    requests = [
        CompletionRequest(model, prompts[i % len(prompts)].text, max_tokens, temperature)
        for i in range(count)
    ]
    outcomes = await asyncio.gather(*(_send_one(session, url, r, timeout) for r in requests))
    failures = sum(1 for status, _, _ in outcomes if status is not RequestStatus.OK)
    finished = time.monotonic()
    if failures:
        log.warning("warm-up: %d/%d requests failed", failures, count)
    return WarmupSummary(count, failures, started, finished)


async def dispatch_burst_async(
    session: aiohttp.ClientSession,
    endpoint: str,
    spec: RunSpec,
    prompts: Sequence[Prompt] | Mapping[int, str],
    *,
    max_tokens: int = 128,
    temperature: float = 0.0,
    timeout: float = DEFAULT_TIMEOUT_S,
) -> list[RequestRecord]:
    """Submit every request back-to-back (no pacing), wait for all terminals."""
    return await _dispatch(
        session, endpoint, spec, prompts,
        rate=None, max_tokens=max_tokens, temperature=temperature, timeout=timeout,
    )


async def dispatch_rate_async(
    session: aiohttp.ClientSession,
    endpoint: str,
    spec: RunSpec,
    prompts: Sequence[Prompt] | Mapping[int, str],
    rate: float,
    *,
    max_tokens: int = 128,
    temperature: float = 0.0,
    timeout: float = DEFAULT_TIMEOUT_S,
) -> list[RequestRecord]:
    """As burst, but submissions are spaced 1/rate seconds apart."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return await _dispatch(
        session, endpoint, spec, prompts,
        rate=rate, max_tokens=max_tokens, temperature=temperature, timeout=timeout,
    )


async def _dispatch(
    session: aiohttp.ClientSession,
    endpoint: str,
    spec: RunSpec,
    prompts: Sequence[Prompt] | Mapping[int, str],
    *,
    rate: float | None,
    max_tokens: int,
    temperature: float,
    timeout: float,
) -> list[RequestRecord]:
    text_by_id = _prompt_texts(prompts)
    missing = [pid for pid in spec.prompt_ids if pid not in text_by_id]
    if missing:
        raise ValueError(f"run {spec.run_id}: prompt ids missing from dataset: {missing[:5]}")
    url = completions_url(endpoint)

    async def one(prompt_id: int, send_time: float) -> RequestRecord:
        request = CompletionRequest(spec.model, text_by_id[prompt_id], max_tokens, temperature)
        status, http_status, tokens = await _send_one(session, url, request, timeout)
        return RequestRecord(
            prompt_id=prompt_id,
            send_time=send_time,
            completion_time=time.monotonic(),
            output_token_count=tokens,
            status=status,
            http_status=http_status,
        )

    tasks = []
    start = time.monotonic()
    for i, prompt_id in enumerate(spec.prompt_ids):
        if rate is not None:
            delay = (start + i / rate) - time.monotonic()
            if delay > 0:
                await asyncio.sleep(delay)
        tasks.append(asyncio.create_task(one(prompt_id, time.monotonic())))
    records = list(await asyncio.gather(*tasks))

    failures = sum(1 for r in records if r.status is not RequestStatus.OK)
    if records and failures == len(records):
        raise DispatchAborted(f"run {spec.run_id}: all {len(records)} requests failed")
    if failures:
        log.warning("run %s: %d/%d requests failed", spec.run_id, failures, len(records))
    return records


def _prompt_texts(prompts: Sequence[Prompt] | Mapping[int, str]) -> Mapping[int, str]:
    if isinstance(prompts, Mapping):
        return prompts
    return {p.id: p.text for p in prompts}


def _run_with_session(coro_factory):
    async def go():
        async with make_session() as session:
            return await coro_factory(session)

    return asyncio.run(go())


def warmup(endpoint: str, model: str, prompts: Sequence[Prompt], count: int, **kwargs) -> WarmupSummary:
    return _run_with_session(lambda s: warmup_async(s, endpoint, model, prompts, count, **kwargs))


def dispatch_burst(endpoint: str, spec: RunSpec, prompts, **kwargs) -> list[RequestRecord]:
    return _run_with_session(lambda s: dispatch_burst_async(s, endpoint, spec, prompts, **kwargs))


def dispatch_rate(endpoint: str, spec: RunSpec, prompts, rate: float, **kwargs) -> list[RequestRecord]:
    return _run_with_session(lambda s: dispatch_rate_async(s, endpoint, spec, prompts, rate, **kwargs))
