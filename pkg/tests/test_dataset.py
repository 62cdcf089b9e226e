from __future__ import annotations

import json

import pytest

from joulebench.dataset import load_prompts
from joulebench.errors import DatasetError, MalformedRecord


def test_hellaswag_file_order(hellaswag_file):
    path = hellaswag_file(3)
    prompts = load_prompts(path, "hellaswag")
    assert [p.id for p in prompts] == [0, 1, 2]
    assert all(f"number {p.id}" in p.text for p in prompts)


def test_limit_takes_prefix(hellaswag_file):
    path = hellaswag_file(3)
    prompts = load_prompts(path, "hellaswag", limit=2)
    assert [p.id for p in prompts] == [0, 1]


def test_loading_twice_is_identical(hellaswag_file):
    path = hellaswag_file(10)
    assert load_prompts(path, "hellaswag") == load_prompts(path, "hellaswag")


def test_malformed_json_aborts_with_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"ctx": "fine"}\nnot json\n')
    with pytest.raises(MalformedRecord) as excinfo:
        load_prompts(path, "hellaswag")
    assert excinfo.value.line_number == 1


def test_missing_ctx_field(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"ind": 0, "endings": []}) + "\n")
    with pytest.raises(MalformedRecord):
        load_prompts(path, "hellaswag")


def test_empty_ctx_field(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"ctx": "   "}) + "\n")
    with pytest.raises(MalformedRecord):
        load_prompts(path, "hellaswag")


def test_plain_lines(tmp_path):
    path = tmp_path / "plain.txt"
    path.write_text("first prompt\nsecond prompt\n")
    prompts = load_prompts(path, "lines")
    assert [(p.id, p.text) for p in prompts] == [(0, "first prompt"), (1, "second prompt")]


def test_plain_lines_empty_line_is_error(tmp_path):
    path = tmp_path / "plain.txt"
    path.write_text("first\n\nthird\n")
    with pytest.raises(MalformedRecord) as excinfo:
        load_prompts(path, "lines")
    assert excinfo.value.line_number == 1


def test_missing_file():
    with pytest.raises(DatasetError, match="not found"):
        load_prompts("/nonexistent/prompts.jsonl", "hellaswag")


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(DatasetError, match="empty"):
        load_prompts(path, "hellaswag")


def test_bad_limit(hellaswag_file):
    with pytest.raises(ValueError):
        load_prompts(hellaswag_file(2), "hellaswag", limit=0)


def test_unknown_format(hellaswag_file):
    with pytest.raises(ValueError, match="unknown dataset format"):
        load_prompts(hellaswag_file(2), "parquet")


def test_malformed_line_beyond_limit_is_not_read(tmp_path):
    path = tmp_path / "mixed.jsonl"
    path.write_text('{"ctx": "ok one"}\n{"ctx": "ok two"}\nbroken\n')
    prompts = load_prompts(path, "hellaswag", limit=2)
    assert len(prompts) == 2
