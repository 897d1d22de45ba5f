"""Checkpoint format: a JSON manifest next to one little-endian binary blob.

Manifest schema:

    {"version": 1,
     "params": [{"name": str, "shape": [int, ...], "offset": int, "dtype": "f64"|"f32"}],
     "hyperparams": {...},
     "rng_seed": int}

The blob holds each tensor's values row-major, little-endian, at the
byte offset named in the manifest. Parameters are written sorted by
name so identical states serialize to identical bytes.
"""

import json
from pathlib import Path

import numpy as np

_DTYPES = {"f64": "<f8", "f32": "<f4"}


def save_checkpoint(path, tensors, hyperparams, rng_seed, dtype="f64"):
    """Write ``path``.json and ``path``.bin for a name -> ndarray map."""
    if dtype not in _DTYPES:
        raise ValueError(f"unsupported checkpoint dtype {dtype!r}")
    path = Path(path)
    np_dtype = np.dtype(_DTYPES[dtype])
    entries = []
    blob = bytearray()
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np_dtype)
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "offset": len(blob),
            "dtype": dtype,
        })
        blob += arr.tobytes()
    manifest = {
        "version": 1,
        "params": entries,
        "hyperparams": hyperparams,
        "rng_seed": int(rng_seed),
    }
    path.with_suffix(".json").write_text(json.dumps(manifest, sort_keys=True) + "\n")
    path.with_suffix(".bin").write_bytes(bytes(blob))


def load_checkpoint(path):
    """Read a checkpoint; returns (tensors, hyperparams, rng_seed).

    Tensors come back as float64 regardless of stored precision.
    """
    path = Path(path)
    manifest_path = path.with_suffix(".json")
    blob_path = path.with_suffix(".bin")
    if not manifest_path.exists() or not blob_path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {manifest.get('version')!r}")
    blob = blob_path.read_bytes()
    tensors = {}
    for entry in manifest["params"]:
        np_dtype = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * np_dtype.itemsize
        if end > len(blob):
            raise ValueError(f"checkpoint blob truncated at parameter {entry['name']!r}")
        arr = np.frombuffer(blob[start:end], dtype=np_dtype).reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float64)
    return tensors, manifest.get("hyperparams", {}), manifest.get("rng_seed", 0)
