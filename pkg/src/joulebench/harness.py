"""Pipeline orchestration: warm-up, tracker window, dispatch, metrics.

Runs execute strictly one at a time so energy attribution never crosses run
boundaries. Within a run the ordering contract is: warm-up completes, the
tracker takes its first sample, dispatch submits and drains, the tracker
takes its final sample. Every timestamp lands in the report so the ordering
is machine-checkable afterwards.
"""

from __future__ import annotations

import asyncio
import datetime
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import analysis, loadgen, report as report_mod
from .config import BenchConfig, DispatchMode
from .dataset import Prompt
from .energy import PowerSample, PowerSource, integrate_energy, estimate_emissions, samples_to_csv, start_tracker
from .planner import RunSpec
from .sources import resolve_sources

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunArtifacts:
    result: analysis.RunResult
    samples: tuple[PowerSample, ...]


def run_plan(
    config: BenchConfig,
    prompts: Sequence[Prompt],
    plan: Sequence[RunSpec],
    *,
    samples_dir: str | Path | None = None,
    request_timeout: float = loadgen.DEFAULT_TIMEOUT_S,
) -> list[RunArtifacts]:
    """Execute every run in plan order against the configured endpoint."""
    return asyncio.run(
        _run_plan_async(config, list(prompts), list(plan), samples_dir, request_timeout)
    )


async def _run_plan_async(
    config: BenchConfig,
    prompts: list[Prompt],
    plan: list[RunSpec],
    samples_dir: str | Path | None,
    request_timeout: float,
) -> list[RunArtifacts]:
    async with loadgen.make_session() as session:
        await loadgen.check_reachable(session, config.endpoint_url)
        sources = resolve_sources(config.power_sources, config.endpoint_url)
        log.info("power sources: %s", [s.source_id for s in sources])
        artifacts = []
        for i, spec in enumerate(plan):
            log.info("run %d/%d: %s", i + 1, len(plan), spec.run_id)
            artifacts.append(
                await _run_one(session, config, spec, prompts, sources, request_timeout, samples_dir)
            )
        return artifacts


async def _run_one(
    session,
    config: BenchConfig,
    spec: RunSpec,
    prompts: list[Prompt],
    sources: list[PowerSource],
    request_timeout: float,
    samples_dir: str | Path | None,
) -> RunArtifacts:
    warm = await loadgen.warmup_async(
        session,
        config.endpoint_url,
        spec.model,
        prompts,
        spec.warmup_count,
        max_tokens=config.max_output_tokens,
        timeout=request_timeout,
    )

    tracker = start_tracker(sources, config.sample_interval)
    try:
        if spec.dispatch.mode is DispatchMode.FIXED_RATE:
            assert spec.dispatch.rate is not None
            records = await loadgen.dispatch_rate_async(
                session, config.endpoint_url, spec, prompts, spec.dispatch.rate,
                max_tokens=config.max_output_tokens, timeout=request_timeout,
            )
        else:
            records = await loadgen.dispatch_burst_async(
                session, config.endpoint_url, spec, prompts,
                max_tokens=config.max_output_tokens, timeout=request_timeout,
            )
    finally:
        window, samples = tracker.stop()

    breakdown = integrate_energy(samples, window)
    emissions = estimate_emissions(breakdown.total, config.grid)
    result = analysis.RunResult(
        spec=spec,
        window=window,
        energy=breakdown,
        records=tuple(records),
        emissions=emissions,
        warmup=warm,
    )
    if samples_dir is not None:
        out = Path(samples_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"samples_{spec.run_id}.csv").write_text(samples_to_csv(samples))
    log.info(
        "run %s: %.3f J total, %.3f J/request, %d/%d ok",
        spec.run_id,
        breakdown.total,
        analysis.energy_per_request(result, analysis.comparable_sources(breakdown.per_source)),
        len(records) - result.failure_count,
        len(records),
    )
    return RunArtifacts(result, tuple(samples))


def run_benchmark(
    config: BenchConfig,
    prompts: Sequence[Prompt],
    plan: Sequence[RunSpec],
    *,
    plateau_epsilon: float = 0.05,
    samples_dir: str | Path | None = None,
    request_timeout: float = loadgen.DEFAULT_TIMEOUT_S,
) -> dict:
    """Execute the plan and assemble the full report document."""
    started_utc = datetime.datetime.now(datetime.timezone.utc)
    t0 = time.monotonic()
    artifacts = run_plan(config, prompts, plan, samples_dir=samples_dir, request_timeout=request_timeout)
    finished_utc = datetime.datetime.now(datetime.timezone.utc)
    return report_mod.build_report(
        config,
        artifacts,
        plateau_epsilon=plateau_epsilon,
        started_utc=started_utc.isoformat(),
        finished_utc=finished_utc.isoformat(),
        duration_s=time.monotonic() - t0,
    )
