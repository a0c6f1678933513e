"""Checkpoint archive: a JSON manifest plus one little-endian float32 blob.

Layout of a checkpoint directory::

    manifest.json   {"params": {name: {"shape": [...], "offset": bytes}}, "meta": {...}}
    params.bin      concatenated '<f4' buffers in manifest order
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

MANIFEST = "manifest.json"
BLOB = "params.bin"


def save_checkpoint(path, params, meta=None):
    """Write ``params`` (name -> array) and JSON-serialisable ``meta``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = {}
    offset = 0
    with open(path / BLOB, "wb") as fh:
        for name, arr in params.items():
            buf = np.asarray(arr, dtype="<f4")
            entries[name] = {"shape": list(buf.shape), "offset": offset}
            fh.write(buf.tobytes())
            offset += buf.nbytes
    tmp = path / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps({"params": entries, "meta": meta or {}}, indent=1))
    os.replace(tmp, path / MANIFEST)


def load_checkpoint(path):
    """Return ``(params, meta)`` with params as float32 arrays."""
    path = Path(path)
    manifest = json.loads((path / MANIFEST).read_text())
    blob = (path / BLOB).read_bytes()
    params = {}
    for name, entry in manifest["params"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=entry["offset"])
        params[name] = arr.reshape(shape).astype(np.float32)
    return params, manifest.get("meta", {})
