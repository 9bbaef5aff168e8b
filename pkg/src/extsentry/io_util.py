"""File plumbing: atomic writes, JSON helpers and a deterministic binary container.

The container format holds a JSON header plus a single little-endian float64
blob with a declared layout; it backs both model files and feature column
stores.  Layout::

    8 bytes  magic  b"EXTSBIN1"
    4 bytes  header length (uint32 LE)
    N bytes  UTF-8 JSON header
    M bytes  float64 little-endian payload

The header carries {"meta": ..., "arrays": [{"name","shape","offset"}...]}
with offsets in elements.  Writing is canonical (sorted keys) so identical
inputs produce identical bytes.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"EXTSBIN1"


def canon_json(obj) -> str:
    """Canonical JSON text: sorted keys, compact separators."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def pack_arrays(meta: Mapping, arrays: Mapping[str, np.ndarray]) -> bytes:
    """Serialize named float64 arrays plus metadata into the container format."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        blobs.append(arr.tobytes())
    header = canon_json({"meta": dict(meta), "arrays": entries}).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header)) + header + b"".join(blobs)


def unpack_arrays(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if data[:8] != MAGIC:
        raise ValueError("not an extsentry binary container")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    payload = data[12 + hlen:]
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = entry["offset"] * 8
        arr = np.frombuffer(payload[start:start + size * 8], dtype="<f8").reshape(shape)
        arrays[entry["name"]] = arr.copy()
    return header["meta"], arrays


def write_jsonl(path: str | Path, objs) -> None:
    atomic_write_text(path, "".join(canon_json(o) + "\n" for o in objs))


def read_jsonl(path: str | Path) -> list:
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out
