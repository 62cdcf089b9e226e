from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from joulebench.config import BenchConfig
from joulebench.dataset import Prompt
from joulebench.errors import InsufficientPrompts
from joulebench.planner import plan_fingerprint, plan_runs


def make_prompts(count: int) -> list[Prompt]:
    return [Prompt(i, f"prompt {i}") for i in range(count)]


def make_config(models=("m0",), loads=(5,), repeats=1) -> BenchConfig:
    return BenchConfig(
        endpoint_url="http://x",
        models=tuple(models),
        request_loads=tuple(loads),
        dataset_path="d.jsonl",
        repeats=repeats,
    )


def test_plan_size_two_models_three_loads_ten_repeats():
    config = make_config(models=("a", "b"), loads=(5, 10, 20), repeats=10)
    plan = plan_runs(config, make_prompts(20))
    assert len(plan) == 60


def test_prompt_prefix_rule():
    plan = plan_runs(make_config(loads=(5,)), make_prompts(10))
    assert len(plan) == 1
    assert plan[0].prompt_ids == (0, 1, 2, 3, 4)


def test_plan_is_deterministic():
    config = make_config(models=("a", "b"), loads=(3, 7), repeats=2)
    prompts = make_prompts(10)
    first = plan_runs(config, prompts)
    second = plan_runs(config, prompts)
    assert first == second
    assert plan_fingerprint(first) == plan_fingerprint(second)


def test_loads_ordered_ascending_regardless_of_config_order():
    config = make_config(loads=(20, 5, 10))
    plan = plan_runs(config, make_prompts(20))
    assert [spec.request_count for spec in plan] == [5, 10, 20]


def test_model_order_preserved_then_load_then_repeat():
    config = make_config(models=("z-model", "a-model"), loads=(2, 1), repeats=2)
    plan = plan_runs(config, make_prompts(5))
    observed = [(s.model, s.request_count, s.repeat_index) for s in plan]
    assert observed == [
        ("z-model", 1, 0), ("z-model", 1, 1), ("z-model", 2, 0), ("z-model", 2, 1),
        ("a-model", 1, 0), ("a-model", 1, 1), ("a-model", 2, 0), ("a-model", 2, 1),
    ]


def test_insufficient_prompts():
    with pytest.raises(InsufficientPrompts):
        plan_runs(make_config(loads=(5, 50)), make_prompts(10))


def test_run_ids_unique():
    config = make_config(models=("org/model", "org model"), loads=(1, 2), repeats=3)
    plan = plan_runs(config, make_prompts(2))
    ids = [spec.run_id for spec in plan]
    assert len(set(ids)) == len(ids)


def test_equal_loads_share_prompt_sets():
    config = make_config(models=("a", "b"), loads=(4,), repeats=2)
    plan = plan_runs(config, make_prompts(6))
    prompt_sets = {spec.prompt_ids for spec in plan}
    assert prompt_sets == {(0, 1, 2, 3)}


@given(
    models=st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=4, unique=True),
    loads=st.lists(st.integers(min_value=1, max_value=30), min_size=1, max_size=4, unique=True),
    repeats=st.integers(min_value=1, max_value=4),
)
def test_plan_cardinality_property(models, loads, repeats):
    config = make_config(models=models, loads=loads, repeats=repeats)
    plan = plan_runs(config, make_prompts(30))
    assert len(plan) == len(models) * len(loads) * repeats
    assert len({spec.run_id for spec in plan}) == len(plan)
