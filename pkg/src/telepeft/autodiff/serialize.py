"""On-disk tensor format and model directories.

Each tensor lives in its own file: a single JSON header line
{"shape": [...], "dtype": "float64", "name": "..."} followed by the raw
row-major little-endian values. A model directory groups many tensors under
params/ with a manifest.json naming every entry, its checksum, and a
format_version, plus whatever extra metadata the caller supplies.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from ..errors import CorruptionError

FORMAT_VERSION = 1

_DTYPE_CODES = {"float64": "<f8", "float32": "<f4"}


def save_tensor(path: str, array: np.ndarray, name: str) -> None:
    dtype = str(array.dtype)
    if dtype not in _DTYPE_CODES:
        raise CorruptionError(f"refusing to serialize dtype {dtype}")
    header = json.dumps({"shape": list(array.shape), "dtype": dtype, "name": name})
    body = np.ascontiguousarray(array, dtype=_DTYPE_CODES[dtype]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(body)


def load_tensor(path: str) -> tuple[str, np.ndarray]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        body = fh.read()
    shape = tuple(header["shape"])
    dtype = header["dtype"]
    if dtype not in _DTYPE_CODES:
        raise CorruptionError(f"{path}: unknown dtype {dtype!r}")
    expected = int(np.prod(shape)) * int(dtype[-2:]) // 8
    if len(body) != expected:
        raise CorruptionError(
            f"{path}: payload is {len(body)} bytes, header implies {expected}"
        )
    array = np.frombuffer(body, dtype=_DTYPE_CODES[dtype]).reshape(shape)
    return header["name"], array.astype(dtype, copy=True)


def _file_for(name: str) -> str:
    return name.replace("/", "_").replace(".", "_") + ".bin"


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_model_dir(directory: str, tensors: dict, meta: dict | None = None) -> None:
    """Write named arrays plus a manifest; `meta` merges into the manifest."""
    params_dir = os.path.join(directory, "params")
    os.makedirs(params_dir, exist_ok=True)
    entries = []
    for name in sorted(tensors):
        array = np.asarray(tensors[name])
        fname = _file_for(name)
        path = os.path.join(params_dir, fname)
        save_tensor(path, array, name)
        entries.append(
            {
                "name": name,
                "file": f"params/{fname}",
                "shape": list(array.shape),
                "dtype": str(array.dtype),
                "sha256": _sha256(path),
            }
        )
    manifest = {"format_version": FORMAT_VERSION, "entries": entries}
    manifest.update(meta or {})
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model_dir(directory: str, verify: bool = True) -> tuple[dict, dict]:
    """Read back (tensors, manifest); checksums verified unless disabled."""
    manifest_path = os.path.join(directory, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CorruptionError(
            f"{manifest_path}: format_version {version} not supported "
            f"(expected {FORMAT_VERSION})"
        )
    tensors = {}
    for entry in manifest["entries"]:
        path = os.path.join(directory, entry["file"])
        if verify and _sha256(path) != entry["sha256"]:
            raise CorruptionError(f"{path}: checksum mismatch")
        name, array = load_tensor(path)
        if name != entry["name"] or list(array.shape) != entry["shape"]:
            raise CorruptionError(f"{path}: header disagrees with manifest")
        tensors[name] = array
    return tensors, manifest
