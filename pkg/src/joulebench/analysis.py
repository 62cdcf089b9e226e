"""Metrics over run results: energy per request, repeat aggregation, plateau
detection, and the parameter-size linear fit."""

from __future__ import annotations

import fnmatch
import logging
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .energy import EmissionsEstimate, EnergyBreakdown, MeasurementWindow
from .errors import AnalysisError, UnknownSource
from .loadgen import RequestRecord, RequestStatus, WarmupSummary
from .planner import RunSpec

log = logging.getLogger(__name__)

_GLOB_CHARS = set("*?[")

# Sources whose ids match these patterns form the headline (accelerator-only)
# energy subset; everything else still appears in the per-source breakdown.
COMPARABLE_PATTERNS = ("gpu*",)


@dataclass(frozen=True)
class RunResult:
    spec: RunSpec
    window: MeasurementWindow
    energy: EnergyBreakdown
    records: tuple[RequestRecord, ...]
    emissions: EmissionsEstimate
    warmup: WarmupSummary

    def __post_init__(self):
        if len(self.records) != self.spec.request_count:
            raise ValueError(
                f"run {self.spec.run_id}: {len(self.records)} records for "
                f"{self.spec.request_count} requests"
            )

    @property
    def failure_count(self) -> int:
        return sum(1 for r in self.records if r.status is not RequestStatus.OK)


@dataclass(frozen=True)
class SweepPoint:
    load: int
    mean: float  # joules per request
    stddev: float
    repeats: int


@dataclass(frozen=True)
class SweepSeries:
    model: str
    points: tuple[SweepPoint, ...]  # ordered by ascending load


@dataclass(frozen=True)
class PlateauResult:
    found: bool
    load: int | None
    value: float | None


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


def select_energy(breakdown: EnergyBreakdown, source_filter: Sequence[str] | None) -> float:
    """Joules summed over the filtered sources (None selects everything).

    Filter entries may be literal source ids (unknown id is an error) or glob
    patterns; a filter that matches nothing yields 0 J with a warning.
    """
    if source_filter is None:
        return breakdown.total
    selected: set[str] = set()
    for entry in source_filter:
        if _GLOB_CHARS.intersection(entry):
            selected.update(fnmatch.filter(breakdown.per_source.keys(), entry))
        elif entry in breakdown.per_source:
            selected.add(entry)
        else:
            raise UnknownSource(entry, list(breakdown.per_source))
    if not selected:
        log.warning("source filter %s matched no sources; energy is 0 J", list(source_filter))
        return 0.0
    return sum(breakdown.per_source[sid] for sid in selected)


def comparable_sources(source_ids: Iterable[str]) -> list[str]:
    """The accelerator-comparable subset of ids, or all ids when none match."""
    ids = sorted(source_ids)
    matched = [
        sid for sid in ids if any(fnmatch.fnmatch(sid, pat) for pat in COMPARABLE_PATTERNS)
    ]
    return matched or ids


def energy_per_request(result: RunResult, source_filter: Sequence[str] | None = None) -> float:
    """Filtered energy divided by attempted request count."""
    if result.spec.request_count < 1:
        raise AnalysisError(f"run {result.spec.run_id} has zero requests")
    return select_energy(result.energy, source_filter) / result.spec.request_count


def aggregate_repeats(values: Sequence[float]) -> tuple[float, float]:
    """(arithmetic mean, sample stddev); stddev is 0 for a single value."""
    if not values:
        raise AnalysisError("aggregate_repeats needs at least one value")
    mean = statistics.fmean(values)
    stddev = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, stddev


def series_from_values(model: str, values_by_load: Mapping[int, Sequence[float]]) -> SweepSeries:
    points = []
    for load in sorted(values_by_load):
        mean, stddev = aggregate_repeats(values_by_load[load])
        points.append(SweepPoint(load, mean, stddev, len(values_by_load[load])))
    return SweepSeries(model, tuple(points))


def detect_plateau(series: SweepSeries, epsilon: float = 0.05) -> PlateauResult:
    """Earliest point from which the rest of the series stays within a
    relative epsilon band; not a plateau if only the final point qualifies."""
    points = series.points
    if len(points) < 2:
        raise AnalysisError(f"plateau detection needs >= 2 points, got {len(points)}")
    for i, anchor in enumerate(points):
        if all(abs(p.mean - anchor.mean) <= epsilon * abs(anchor.mean) for p in points[i + 1:]):
            if i == len(points) - 1:
                return PlateauResult(found=False, load=None, value=None)
            return PlateauResult(found=True, load=anchor.load, value=anchor.mean)
    raise AssertionError("unreachable: last point always qualifies")


def fit_params_vs_energy(points: Sequence[tuple[float, float]]) -> FitResult:
    """Ordinary least squares of joules-per-request against parameter count."""
    if len(points) < 2:
        raise AnalysisError(f"fit needs >= 2 points, got {len(points)}")
    xs = [float(x) for x, _ in points]
    ys = [float(y) for _, y in points]
    if len(set(xs)) < 2:
        raise AnalysisError("fit input is degenerate: all parameter counts are equal")
    reg = statistics.linear_regression(xs, ys)
    mean_y = statistics.fmean(ys)
    ss_res = sum((y - (reg.slope * x + reg.intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(reg.slope, reg.intercept, min(1.0, max(0.0, r_squared)))


def status_counts(records: Iterable[RequestRecord]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for record in records:
        counts[record.status.value] = counts.get(record.status.value, 0) + 1
    return counts
