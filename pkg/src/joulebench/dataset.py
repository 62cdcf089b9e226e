"""Prompt ingestion: JSONL context-completion records or plain text lines.

Loading is deterministic and order-preserving; a malformed line aborts the
load instead of being skipped, because silent skips would shift prompt ids
between otherwise-identical runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DatasetError, MalformedRecord

HELLASWAG = "hellaswag"
PLAIN_LINES = "lines"


@dataclass(frozen=True)
class Prompt:
    id: int  # 0-based index in file order
    text: str


def load_prompts(path: str | Path, format: str = HELLASWAG, limit: int | None = None) -> list[Prompt]:
    """Read prompts in file order; id equals the source line index.

    hellaswag format: one JSON record per line, prompt text taken from the
    record's "ctx" field (the uncompleted phrase). lines format: one prompt
    per non-empty line.
    """
    if limit is not None and limit <= 0:
        raise ValueError(f"limit must be positive, got {limit}")
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    prompts: list[Prompt] = []
    with open(path, encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh):
            if limit is not None and len(prompts) >= limit:
                break
            line = raw.rstrip("\n")
            if format == HELLASWAG:
                text = _hellaswag_context(line, line_number)
            elif format == PLAIN_LINES:
                if not line.strip():
                    raise MalformedRecord(line_number, "empty line")
                text = line
            else:
                raise ValueError(f"unknown dataset format {format!r}")
            prompts.append(Prompt(id=line_number, text=text))
    if not prompts:
        raise DatasetError(f"dataset is empty: {path}")
    return prompts


def _hellaswag_context(line: str, line_number: int) -> str:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_number, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict) or "ctx" not in record:
        raise MalformedRecord(line_number, 'missing "ctx" field')
    text = record["ctx"]
    if not isinstance(text, str) or not text.strip():
        raise MalformedRecord(line_number, 'empty "ctx" field')
    return text
