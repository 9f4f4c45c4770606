"""Checkpoints: a JSON manifest plus raw little-endian float64 buffers.

The manifest records each parameter's name, shape, and byte offset into
params.bin, alongside step count and arbitrary hyperparameter metadata.
Round-trips are byte exact.
"""

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(directory, named_arrays, step: int, hyperparams: dict):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    offset = 0
    for name, array in named_arrays:
        raw = np.ascontiguousarray(array, dtype="<f8").tobytes()
        entries.append(
            {"name": name, "shape": list(np.shape(array)), "offset": offset, "nbytes": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "step": step,
        "hyperparams": hyperparams,
        "params": entries,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    (directory / "params.bin").write_bytes(b"".join(blobs))


def load_checkpoint(directory):
    """Returns (manifest, dict name -> float64 array)."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format_version')}")
    raw = (directory / "params.bin").read_bytes()
    arrays = {}
    for entry in manifest["params"]:
        start = entry["offset"]
        blob = raw[start : start + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(blob, dtype="<f8").reshape(entry["shape"]).copy()
    return manifest, arrays
