"""Power sampling, watts-to-joules integration, and CO2eq estimation.

A tracker polls registered power sources on a fixed interval during an
explicit measurement window. Samples are zero-order-hold integrated: each
reading is held until the next one, and the final reading extends to the
window end, so energy = sum over sub-intervals of watts x seconds.

All timestamps are ``time.monotonic()`` seconds.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .errors import (
    NoSources,
    SampleOutsideWindow,
    SourceInitFailure,
    TrackerNotRunning,
    UnsortedSamples,
)

log = logging.getLogger(__name__)

JOULES_PER_KWH = 3.6e6

# Slack for float comparison of sample timestamps against window bounds.
_TS_EPS = 1e-9


@dataclass(frozen=True)
class PowerSample:
    """One instantaneous power reading for one component."""

    source_id: str
    timestamp: float  # monotonic seconds
    power: float  # watts, >= 0

    def __post_init__(self):
        if self.power < 0:
            raise ValueError(f"power must be >= 0 W, got {self.power} from {self.source_id!r}")


@dataclass(frozen=True)
class MeasurementWindow:
    start: float
    end: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"window end {self.end} precedes start {self.start}")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class EnergyBreakdown:
    """Joules per source over one measurement window."""

    per_source: dict[str, float]

    @property
    def total(self) -> float:
        return sum(self.per_source.values())


@dataclass(frozen=True)
class GridProfile:
    """Carbon intensity of the local grid plus facility overhead multiplier."""

    carbon_intensity: float  # grams CO2eq per kWh
    pue: float = 1.0  # power usage effectiveness, >= 1


@dataclass(frozen=True)
class EmissionsEstimate:
    energy_kwh: float
    grams_co2eq: float


@runtime_checkable
class PowerSource(Protocol):
    """A pollable sensor reporting instantaneous draw in watts."""

    source_id: str

    def read(self) -> float: ...


class Tracker:
    """Samples every source on a fixed interval between start() and stop().

    start() takes a boundary sample from the calling thread before the
    polling thread begins, so the window start is always covered; stop()
    joins the thread and takes a final boundary sample, so short windows
    are never measured as zero.
    """

    def __init__(self, sources: Sequence[PowerSource], interval: float):
        if not sources:
            raise NoSources("tracker needs at least one power source")
        if interval <= 0:
            raise ValueError(f"interval must be positive, got {interval}")
        ids = [s.source_id for s in sources]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate source ids: {ids}")
        self._sources = list(sources)
        self._interval = interval
        self._samples: list[PowerSample] = []
        self._last_ts: dict[str, float] = {}
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._start_ts: float | None = None
        self._stopped = False

    def start(self) -> None:
        if self._thread is not None:
            raise RuntimeError("tracker already started")
        self._start_ts = time.monotonic()
        for source in self._sources:
            try:
                self._take_sample(source)
            except Exception as exc:
                raise SourceInitFailure(source.source_id, str(exc)) from exc
        self._thread = threading.Thread(target=self._poll_loop, name="joulebench-tracker", daemon=True)
        self._thread.start()

    def stop(self) -> tuple[MeasurementWindow, list[PowerSample]]:
        if self._thread is None or self._stopped:
            raise TrackerNotRunning("tracker is not running")
        self._stop.set()
        self._thread.join()
        self._stopped = True
        for source in self._sources:
            try:
                self._take_sample(source)
            except Exception:
                log.warning("final sample failed for source %s", source.source_id, exc_info=True)
        assert self._start_ts is not None
        end = max(self._last_ts.values())
        return MeasurementWindow(self._start_ts, end), list(self._samples)

    def _poll_loop(self) -> None:
        assert self._start_ts is not None
        tick = 1
        while True:
            next_at = self._start_ts + tick * self._interval
            if self._stop.wait(timeout=max(0.0, next_at - time.monotonic())):
                return
            for source in self._sources:
                try:
                    self._take_sample(source)
                except Exception:
                    log.warning("sample failed for source %s", source.source_id, exc_info=True)
            tick += 1

    def _take_sample(self, source: PowerSource) -> None:
        watts = source.read()
        ts = time.monotonic()
        last = self._last_ts.get(source.source_id)
        if last is not None and ts <= last:
            # Monotonic clock resolution can collapse back-to-back reads.
            ts = last + _TS_EPS
        self._last_ts[source.source_id] = ts
        self._samples.append(PowerSample(source.source_id, ts, watts))


def start_tracker(sources: Sequence[PowerSource], interval: float) -> Tracker:
    tracker = Tracker(sources, interval)
    tracker.start()
    return tracker


def stop_tracker(tracker: Tracker) -> tuple[MeasurementWindow, list[PowerSample]]:
    return tracker.stop()


def integrate_energy(samples: Iterable[PowerSample], window: MeasurementWindow) -> EnergyBreakdown:
    """Zero-order-hold integration of per-source power over the window.

    Per source: sum of power_i x (t_{i+1} - t_i), with the final sample held
    until window.end. An empty window (start == end) or an empty sample set
    yields zero energy.
    """
    by_source: dict[str, list[PowerSample]] = {}
    for sample in samples:
        by_source.setdefault(sample.source_id, []).append(sample)

    per_source: dict[str, float] = {}
    for source_id, src_samples in by_source.items():
        prev = None
        for s in src_samples:
            if prev is not None and s.timestamp <= prev:
                raise UnsortedSamples(f"source {source_id!r}: {s.timestamp} after {prev}")
            if s.timestamp < window.start - _TS_EPS or s.timestamp > window.end + _TS_EPS:
                raise SampleOutsideWindow(
                    f"source {source_id!r}: t={s.timestamp} outside [{window.start}, {window.end}]"
                )
            prev = s.timestamp
        joules = 0.0
        for cur, nxt in zip(src_samples, src_samples[1:]):
            joules += cur.power * (nxt.timestamp - cur.timestamp)
        joules += src_samples[-1].power * max(0.0, window.end - src_samples[-1].timestamp)
        per_source[source_id] = joules
    return EnergyBreakdown(per_source)


def estimate_emissions(joules: float, grid: GridProfile) -> EmissionsEstimate:
    """Convert joules to grams CO2eq: kWh x grid intensity x PUE."""
    if joules < 0:
        raise ValueError(f"energy must be non-negative, got {joules}")
    kwh = joules / JOULES_PER_KWH
    return EmissionsEstimate(energy_kwh=kwh, grams_co2eq=kwh * grid.carbon_intensity * grid.pue)


def samples_to_csv(samples: Iterable[PowerSample]) -> str:
    """Delimited export: timestamp_s, source_id, watts."""
    lines = ["timestamp_s,source_id,watts"]
    for s in samples:
        lines.append(f"{s.timestamp!r},{s.source_id},{s.power!r}")
    return "\n".join(lines) + "\n"
