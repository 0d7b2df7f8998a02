"""Persistence layer: raw little-endian float64 arrays with JSON sidecars.

Every array artifact is a pair of files, ``<stem>.f64`` holding the flat
row-major samples and ``<stem>.json`` holding metadata (shape, axes, the
producing config hash).  Writes are atomic (temp file + rename) and JSON is
serialized canonically so identical runs produce identical bytes.
"""

import hashlib
import json
import os
import tempfile

import numpy as np


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, no float repr ambiguity."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj):
    """sha256 hex digest of the canonical JSON form of a config mapping."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _atomic_write_bytes(path, payload):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_array(stem, values, meta):
    """Write values (any shape, float64) to stem.f64 + stem.json."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    meta = dict(meta)
    meta["shape"] = list(arr.shape)
    meta["dtype"] = "float64-le"
    _atomic_write_bytes(str(stem) + ".f64", arr.astype("<f8").tobytes())
    _atomic_write_bytes(str(stem) + ".json", (canonical_json(meta) + "\n").encode("utf-8"))


def read_array(stem):
    """Read (values, meta) written by write_array."""
    with open(str(stem) + ".json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    raw = np.fromfile(str(stem) + ".f64", dtype="<f8")
    shape = tuple(meta["shape"])
    if raw.size != int(np.prod(shape)):
        raise ValueError("array payload size does not match sidecar shape")
    return raw.reshape(shape), meta


def write_json(path, obj):
    _atomic_write_bytes(path, (canonical_json(obj) + "\n").encode("utf-8"))


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_text(path, text):
    _atomic_write_bytes(path, text.encode("utf-8"))


def write_bytes(path, payload):
    _atomic_write_bytes(path, payload)
