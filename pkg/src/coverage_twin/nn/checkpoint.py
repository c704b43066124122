"""Model checkpoints: JSON manifest + raw little-endian float64 blob.

A checkpoint `foo` is the pair foo.json / foo.bin. The manifest records
tensor names, shapes and byte offsets plus an arbitrary metadata dict;
the blob concatenates the tensors in manifest order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autodiff import Tensor


def save_params(params: dict[str, Tensor], path, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    blob = bytearray()
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name].data, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blob += arr.tobytes()
        offset += arr.nbytes
    manifest = {"dtype": "<f8", "tensors": entries, "meta": meta or {}}
    path.with_suffix(".json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    path.with_suffix(".bin").write_bytes(bytes(blob))


def load_params(path) -> tuple[dict[str, Tensor], dict]:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    raw = path.with_suffix(".bin").read_bytes()
    params = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=n,
                            offset=entry["offset"]).reshape(shape)
        params[entry["name"]] = Tensor(arr.copy(), requires_grad=True)
    return params, manifest.get("meta", {})
