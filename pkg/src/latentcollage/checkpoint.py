"""Checkpoint container: a directory holding ``meta.json`` plus one raw
little-endian float32 blob per named array. Round trips are bit-exact.
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError

FORMAT_VERSION = 1


def _blob_name(name: str) -> str:
    return name.replace(os.sep, "_").replace("/", "_") + ".bin"


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write atomically: build a temp sibling directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=path.name + ".tmp-", dir=path.parent))
    try:
        entries = {}
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f4")
            blob = _blob_name(name)
            with open(tmp / blob, "wb") as f:
                f.write(arr.tobytes())
            entries[name] = {"file": blob, "shape": list(arr.shape)}
        doc = {"format_version": FORMAT_VERSION, "arrays": entries, "meta": meta}
        with open(tmp / "meta.json", "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise CheckpointError(f"no meta.json in checkpoint directory {path}")
    try:
        with open(meta_path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint meta at {meta_path}: {e}") from e
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format: {doc.get('format_version')}")
    arrays = {}
    for name, entry in doc["arrays"].items():
        blob = path / entry["file"]
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape)) * 4 if shape else 4
        try:
            raw = blob.read_bytes()
        except OSError as e:
            raise CheckpointError(f"missing blob {blob}: {e}") from e
        if len(raw) != expected:
            raise CheckpointError(
                f"blob {blob} has {len(raw)} bytes, expected {expected} for shape {shape}"
            )
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return doc["meta"], arrays
