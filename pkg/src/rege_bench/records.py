"""Line-delimited benchmark records, instruction templates and annotation filtering."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .text import tokenize

TASKS = ("emotion", "au")
FIELD_ORDER = ("id", "task", "instruction", "reference", "hypothesis")
MIN_REFERENCE_TOKENS = 3


class RecordError(ValueError):
    """Malformed, duplicated or mismatched record."""


@dataclass(frozen=True)
class SampleRecord:
    id: str
    task: str
    instruction: str
    reference: str
    hypothesis: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise RecordError(f"record {self.id!r}: unknown task {self.task!r}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in FIELD_ORDER}
        if d["hypothesis"] is None:
            del d["hypothesis"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def parse_record(line: str, lineno: int = 0) -> SampleRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise RecordError(f"line {lineno}: expected an object")
    unknown = set(obj) - set(FIELD_ORDER)
    if unknown:
        raise RecordError(f"line {lineno}: unknown fields {sorted(unknown)}")
    for key in ("id", "task", "instruction", "reference"):
        if not isinstance(obj.get(key), str):
            raise RecordError(f"line {lineno}: field {key!r} missing or not a string")
    hyp = obj.get("hypothesis")
    if hyp is not None and not isinstance(hyp, str):
        raise RecordError(f"line {lineno}: field 'hypothesis' must be a string")
    try:
        return SampleRecord(obj["id"], obj["task"], obj["instruction"], obj["reference"], hyp)
    except RecordError as exc:
        raise RecordError(f"line {lineno}: {exc}") from exc


def load_records(path: str | Path, task: str | None = None) -> list[SampleRecord]:
    """Read a JSONL record file.

    Blank lines are skipped. Any malformed line, duplicate id, or (when
    ``task`` is given) record of another task raises :class:`RecordError`
    naming the line.
    """
    if task is not None and task not in TASKS:
        raise RecordError(f"unknown task {task!r}")
    records: list[SampleRecord] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = parse_record(line, lineno)
            if rec.id in seen:
                raise RecordError(f"line {lineno}: duplicate id {rec.id!r} (first seen on line {seen[rec.id]})")
            if task is not None and rec.task != task:
                raise RecordError(f"line {lineno}: record {rec.id!r} has task {rec.task!r}, expected {task!r}")
            seen[rec.id] = lineno
            records.append(rec)
    return records


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_records(records) -> str:
    return "".join(r.to_json() + "\n" for r in records)


def write_records(records, path: str | Path) -> None:
    atomic_write_text(path, dump_records(records))


def filter_annotations(records, min_tokens: int = MIN_REFERENCE_TOKENS):
    """Split records into (kept, dropped); dropped references are blank or too short."""
    kept, dropped = [], []
    for r in records:
        (kept if len(tokenize(r.reference)) >= min_tokens else dropped).append(r)
    return kept, dropped


@dataclass(frozen=True)
class TemplateBank:
    task: str
    templates: tuple[str, ...]

    def __post_init__(self):
        if self.task not in TASKS:
            raise RecordError(f"unknown task {self.task!r}")
        object.__setattr__(self, "templates", tuple(self.templates))
        for t in self.templates:
            if not isinstance(t, str) or not t.strip():
                raise RecordError("templates must be non-empty strings")

    def __len__(self):
        return len(self.templates)


def load_template_banks(path: str | Path | None = None) -> dict[str, TemplateBank]:
    if path is None:
        path = resources.files("rege_bench") / "data" / "templates.json"
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {task: TemplateBank(task, data[task]) for task in TASKS if task in data}


def sample_instruction(bank: TemplateBank, seed: int) -> str:
    if len(bank) == 0:
        raise RecordError(f"template bank for {bank.task!r} is empty")
    idx = int(np.random.default_rng(seed).integers(len(bank)))
    return bank.templates[idx]
