"""Power source backends.

Synthetic sources (constant, scripted trace) cover tests and smoke runs; the
control-endpoint source polls a mock backend's power over HTTP; NVML and RAPL
readers cover real hardware and degrade to "unavailable" when their interfaces
are missing.
"""

from __future__ import annotations

import glob as globlib
import http.client
import json
import logging
import time
from pathlib import Path
from urllib.parse import urlparse

from .errors import NoSources, SourceInitFailure
from .energy import PowerSource

log = logging.getLogger(__name__)


class ConstantSource:
    """Always reports the same wattage. Useful for smoke tests and oracles."""

    def __init__(self, watts: float, source_id: str = "constant"):
        self.source_id = source_id
        self._watts = watts
        self.read_count = 0

    def read(self) -> float:
        self.read_count += 1
        return self._watts


class TraceSource:
    """Replays a scripted (offset_seconds, watts) step trace from creation time."""

    def __init__(self, trace: list[tuple[float, float]], source_id: str = "trace"):
        if not trace:
            raise ValueError("trace must not be empty")
        self.source_id = source_id
        self._trace = sorted(trace)
        self._t0 = time.monotonic()

    def read(self) -> float:
        elapsed = time.monotonic() - self._t0
        watts = self._trace[0][1]
        for offset, value in self._trace:
            if offset <= elapsed:
                watts = value
            else:
                break
        return watts


class ControlEndpointSource:
    """Polls a mock backend's /control/power endpoint over a keepalive connection.

    The backend reports its own source_id, so the sample stream is labeled the
    same way an on-host sensor would be.
    """

    def __init__(self, base_url: str, timeout: float = 2.0):
        parsed = urlparse(base_url)
        if parsed.scheme != "http" or not parsed.hostname:
            raise SourceInitFailure("control-endpoint", f"unsupported url {base_url!r}")
        self._host = parsed.hostname
        self._port = parsed.port or 80
        self._timeout = timeout
        self._conn: http.client.HTTPConnection | None = None
        payload = self._get()
        self.source_id = str(payload.get("source_id", "mock"))

    def _get(self) -> dict:
        for attempt in (0, 1):
            try:
                if self._conn is None:
                    self._conn = http.client.HTTPConnection(self._host, self._port, timeout=self._timeout)
                self._conn.request("GET", "/control/power")
                resp = self._conn.getresponse()
                body = resp.read()
                if resp.status != 200:
                    raise SourceInitFailure("control-endpoint", f"HTTP {resp.status} from /control/power")
                return json.loads(body)
            except (OSError, http.client.HTTPException) as exc:
                self._conn = None
                if attempt:
                    raise SourceInitFailure("control-endpoint", str(exc)) from exc
        raise AssertionError("unreachable")

    def read(self) -> float:
        return float(self._get()["watts"])


class NvmlSource:
    """One GPU's board power via the NVIDIA management library (optional dep)."""

    def __init__(self, index: int):
        try:
            import pynvml
        except ImportError as exc:
            raise SourceInitFailure(f"gpu{index}", "pynvml not installed (pip install artifact[gpu])") from exc
        self._nvml = pynvml
        self._nvml.nvmlInit()
        try:
            self._handle = self._nvml.nvmlDeviceGetHandleByIndex(index)
        except self._nvml.NVMLError as exc:
            raise SourceInitFailure(f"gpu{index}", str(exc)) from exc
        self.source_id = f"gpu{index}"

    def read(self) -> float:
        return self._nvml.nvmlDeviceGetPowerUsage(self._handle) / 1000.0  # mW -> W

    @staticmethod
    def detect() -> list["NvmlSource"]:
        try:
            import pynvml
        except ImportError:
            return []
        try:
            pynvml.nvmlInit()
            count = pynvml.nvmlDeviceGetCount()
        except Exception:
            return []
        return [NvmlSource(i) for i in range(count)]


class RaplSource:
    """CPU package power from a Linux powercap energy counter.

    The counter is cumulative microjoules; read() reports the average watts
    since the previous read, which matches zero-order-hold integration on the
    sampling grid.
    """

    def __init__(self, counter_path: str, source_id: str):
        self.source_id = source_id
        self._path = Path(counter_path)
        base = self._path.parent
        try:
            self._max_uj = int((base / "max_energy_range_uj").read_text())
        except OSError:
            self._max_uj = None
        try:
            self._last_uj = int(self._path.read_text())
        except OSError as exc:
            raise SourceInitFailure(source_id, str(exc)) from exc
        self._last_ts = time.monotonic()

    def read(self) -> float:
        now_uj = int(self._path.read_text())
        now_ts = time.monotonic()
        delta_uj = now_uj - self._last_uj
        if delta_uj < 0 and self._max_uj:  # counter wrapped
            delta_uj += self._max_uj
        elapsed = now_ts - self._last_ts
        self._last_uj, self._last_ts = now_uj, now_ts
        if elapsed <= 0:
            return 0.0
        return max(0.0, delta_uj / 1e6 / elapsed)

    @staticmethod
    def detect() -> list["RaplSource"]:
        sources = []
        for i, path in enumerate(sorted(globlib.glob("/sys/class/powercap/intel-rapl:*/energy_uj"))):
            try:
                sources.append(RaplSource(path, f"cpu-pkg{i}"))
            except SourceInitFailure:
                continue
        return sources


def resolve_sources(specs: tuple[str, ...], endpoint_url: str) -> list[PowerSource]:
    """Build power sources from config specs.

    Specs: "auto" (mock control endpoint if the endpoint serves one, else any
    detected GPU/CPU sensors), "mock", "gpu", "cpu", "constant:<watts>[:<id>]",
    "trace:<csv-path>[:<id>]".
    """
    sources: list[PowerSource] = []
    for spec in specs:
        kind, _, arg = spec.partition(":")
        if kind == "auto":
            sources.extend(_auto_sources(endpoint_url))
        elif kind == "mock":
            sources.append(ControlEndpointSource(endpoint_url))
        elif kind == "gpu":
            found = NvmlSource.detect()
            if not found:
                raise SourceInitFailure("gpu", "no NVML devices available")
            sources.extend(found)
        elif kind == "cpu":
            found = RaplSource.detect()
            if not found:
                raise SourceInitFailure("cpu", "no readable RAPL counters")
            sources.extend(found)
        elif kind == "constant":
            watts_s, _, source_id = arg.partition(":")
            sources.append(ConstantSource(float(watts_s), source_id or "constant"))
        elif kind == "trace":
            path, _, source_id = arg.partition(":")
            sources.append(TraceSource(_load_trace(path), source_id or "trace"))
        else:
            raise SourceInitFailure(spec, "unknown source spec")
    if not sources:
        raise NoSources("no power sources resolved; configure power_sources explicitly")
    return sources


def _auto_sources(endpoint_url: str) -> list[PowerSource]:
    try:
        mock = ControlEndpointSource(endpoint_url, timeout=1.0)
        log.info("auto power source: endpoint control channel (%s)", mock.source_id)
        return [mock]
    except SourceInitFailure:
        pass
    found: list[PowerSource] = []
    found.extend(NvmlSource.detect())
    found.extend(RaplSource.detect())
    if not found:
        raise NoSources(
            "auto-detection found no sources: endpoint exposes no /control/power, "
            "NVML unavailable, RAPL counters unreadable"
        )
    log.info("auto power sources: %s", [s.source_id for s in found])
    return found


def _load_trace(path: str) -> list[tuple[float, float]]:
    points = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        offset_s, watts_s = line.split(",")[:2]
        points.append((float(offset_s), float(watts_s)))
    return points
