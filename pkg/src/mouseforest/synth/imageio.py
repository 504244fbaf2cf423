"""Binary depth/label image files and JSON ground-truth sidecars.

Both image kinds share a little-endian header: 4-byte magic, uint16 width,
uint16 height, float64 scale (mm per stored unit), followed by the pixels in
row-major order (uint16 depth units or uint8 class ids).
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

DEPTH_MAGIC = b"MFDI"
LABEL_MAGIC = b"MFLI"
_HEADER = struct.Struct("<4sHHd")


class ImageFormatError(ValueError):
    pass


def _write(path, magic, width, height, scale, payload: bytes) -> None:
    Path(path).write_bytes(_HEADER.pack(magic, width, height, scale) + payload)


def _read(path, magic):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ImageFormatError(f"{path}: truncated header")
    got, w, h, scale = _HEADER.unpack_from(raw)
    if got != magic:
        raise ImageFormatError(f"{path}: bad magic {got!r}")
    return w, h, scale, raw[_HEADER.size:]


def save_depth(path, depth: np.ndarray, scale: float = 0.1) -> None:
    units = np.rint(np.asarray(depth) / scale)
    if units.min() < 0 or units.max() > np.iinfo(np.uint16).max:
        raise ImageFormatError("depth does not fit in 16 bits at this scale")
    h, w = depth.shape
    _write(path, DEPTH_MAGIC, w, h, scale, units.astype("<u2").tobytes())


def load_depth(path) -> np.ndarray:
    """Depth in mm (float64)."""
    w, h, scale, body = _read(path, DEPTH_MAGIC)
    if len(body) != 2 * w * h:
        raise ImageFormatError(f"{path}: expected {w * h} depth values")
    return np.frombuffer(body, dtype="<u2").reshape(h, w).astype(np.float64) * scale


def save_labels(path, labels: np.ndarray) -> None:
    h, w = labels.shape
    _write(path, LABEL_MAGIC, w, h, 1.0, np.asarray(labels, dtype=np.uint8).tobytes())


def load_labels(path) -> np.ndarray:
    w, h, _, body = _read(path, LABEL_MAGIC)
    if len(body) != w * h:
        raise ImageFormatError(f"{path}: expected {w * h} labels")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def save_sidecar(path, joints: np.ndarray, camera: dict, pose: dict | None = None) -> None:
    doc = {"joints": np.asarray(joints).tolist(), "camera": camera}
    if pose is not None:
        doc["pose"] = pose
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_sidecar(path) -> dict:
    doc = json.loads(Path(path).read_text())
    doc["joints"] = np.array(doc["joints"], dtype=np.float64)
    return doc
