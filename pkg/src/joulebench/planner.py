"""Deterministic expansion of a config into an ordered run plan.

Planning is pure: identical (config, prompts) inputs yield identical plans.
Order is model (as configured), then load ascending, then repeat index. Every
run at load L uses the first L prompts in dataset order, so runs at equal
loads are comparable across models and repeats.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .config import BenchConfig, DispatchPolicy
from .dataset import Prompt
from .errors import InsufficientPrompts


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    model: str
    request_count: int
    dispatch: DispatchPolicy
    warmup_count: int
    repeat_index: int
    prompt_ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.prompt_ids) != self.request_count:
            raise ValueError(
                f"run {self.run_id}: {len(self.prompt_ids)} prompt ids for "
                f"{self.request_count} requests"
            )


def _slug(model: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", model).strip("-") or "model"


def plan_runs(config: BenchConfig, prompts: list[Prompt]) -> list[RunSpec]:
    """models x loads x repeats RunSpecs, each using the dataset prefix."""
    largest = max(config.request_loads)
    if len(prompts) < largest:
        raise InsufficientPrompts(have=len(prompts), need=largest)
    plan = []
    for model_index, model in enumerate(config.models):
        for load in sorted(config.request_loads):
            for repeat in range(config.repeats):
                plan.append(
                    RunSpec(
                        run_id=f"m{model_index}-{_slug(model)}-n{load}-r{repeat}",
                        model=model,
                        request_count=load,
                        dispatch=config.dispatch,
                        warmup_count=config.warmup_count,
                        repeat_index=repeat,
                        prompt_ids=tuple(p.id for p in prompts[:load]),
                    )
                )
    return plan


def plan_fingerprint(plan: list[RunSpec]) -> bytes:
    """Canonical byte serialization of a plan, for determinism checks."""
    parts = []
    for spec in plan:
        parts.append(
            "|".join(
                (
                    spec.run_id,
                    spec.model,
                    str(spec.request_count),
                    spec.dispatch.mode.value,
                    str(spec.dispatch.rate),
                    str(spec.warmup_count),
                    str(spec.repeat_index),
                    ",".join(map(str, spec.prompt_ids)),
                )
            )
        )
    return "\n".join(parts).encode()
