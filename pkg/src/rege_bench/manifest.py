"""Run manifests embedded in every CLI output file."""
from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the clock for reproducible output files
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return now.replace(microsecond=0).isoformat()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def build_manifest(subcommand: str, config: dict, inputs, version: str, payload=None) -> dict:
    """Manifest with a content digest that covers everything except the timestamp.

    ``inputs`` is a sequence of ``(label, path)`` pairs; each file is hashed.
    """
    body = {
        "subcommand": subcommand,
        "config": config,
        "inputs": {str(label): file_digest(path) for label, path in inputs},
        "tool_version": version,
    }
    body["digest"] = hashlib.sha256(canonical_json({"manifest": body, "payload": payload}).encode()).hexdigest()
    body["timestamp"] = timestamp()
    return body


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
