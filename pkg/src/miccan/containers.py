"""Versioned binary containers used for all on-disk artifacts.

Three formats, all little-endian and bit-exact:

* array container (magic ``MICV``): 2-D float64 or complex128 arrays
  (images, k-space). Layout: magic, version u8, dtype tag u8
  (0 = f64, 1 = c128 as interleaved f64 pairs), u32 H, u32 W, row-major
  payload.
* mask file (magic ``MICM``): magic, version u8, u32 H, u32 W, then
  H*W bytes of 0/1 row-major.
* checkpoint container (magic ``MICC``): magic, version u8, a length-prefixed
  canonical-JSON config blob, then named float64 parameter arrays
  (name length u16, UTF-8 name, dtype tag u8, rank u32, per-dim u32 sizes,
  payload). Parameters are written in sorted name order so identical states
  serialize byte-identically.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import IngestionError, InvalidInputError
from .sampling import SamplingMask

__all__ = [
    "write_array",
    "read_array",
    "write_mask",
    "read_mask",
    "write_checkpoint",
    "read_checkpoint",
]

_ARRAY_MAGIC = b"MICV"
_MASK_MAGIC = b"MICM"
_CHECKPOINT_MAGIC = b"MICC"
_VERSION = 1

_DTYPE_F64 = 0
_DTYPE_C128 = 1


def _read_exact(fh, n: int, path, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise IngestionError(f"{path}: truncated file while reading {what}")
    return buf


def _check_header(fh, magic: bytes, path) -> None:
    got = _read_exact(fh, 4, path, "magic")
    if got != magic:
        raise IngestionError(f"{path}: bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<B", _read_exact(fh, 1, path, "version"))
    if version != _VERSION:
        raise IngestionError(f"{path}: unsupported version {version}")


def write_array(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise InvalidInputError(f"array container stores 2-D arrays, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        tag, payload = _DTYPE_C128, np.ascontiguousarray(arr, dtype="<c16").tobytes()
    else:
        tag, payload = _DTYPE_F64, np.ascontiguousarray(arr, dtype="<f8").tobytes()
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_ARRAY_MAGIC)
        fh.write(struct.pack("<BBII", _VERSION, tag, h, w))
        fh.write(payload)


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        _check_header(fh, _ARRAY_MAGIC, path)
        tag, h, w = struct.unpack("<BII", _read_exact(fh, 9, path, "array header"))
        if tag == _DTYPE_F64:
            dtype, itemsize = "<f8", 8
        elif tag == _DTYPE_C128:
            dtype, itemsize = "<c16", 16
        else:
            raise IngestionError(f"{path}: unknown dtype tag {tag}")
        payload = _read_exact(fh, h * w * itemsize, path, "array payload")
        if fh.read(1):
            raise IngestionError(f"{path}: trailing bytes after array payload")
    return np.frombuffer(payload, dtype=dtype).reshape(h, w).copy()


def write_mask(path, mask: SamplingMask) -> None:
    with open(path, "wb") as fh:
        fh.write(_MASK_MAGIC)
        fh.write(struct.pack("<BII", _VERSION, mask.height, mask.width))
        fh.write(np.ascontiguousarray(mask.grid, dtype=np.uint8).tobytes())


def read_mask(path) -> SamplingMask:
    with open(path, "rb") as fh:
        _check_header(fh, _MASK_MAGIC, path)
        h, w = struct.unpack("<II", _read_exact(fh, 8, path, "mask header"))
        payload = _read_exact(fh, h * w, path, "mask payload")
        if fh.read(1):
            raise IngestionError(f"{path}: trailing bytes after mask payload")
    grid = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    if not np.isin(grid, (0, 1)).all():
        raise IngestionError(f"{path}: mask payload contains values other than 0/1")
    return SamplingMask(grid.copy())


def _canonical_json(config: dict) -> bytes:
    return json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_checkpoint(path, config: dict, arrays: dict[str, np.ndarray]) -> None:
    blob = _canonical_json(config)
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", _VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BI", _DTYPE_F64, arr.ndim))
            fh.write(struct.pack("<" + "I" * arr.ndim, *arr.shape))
            fh.write(arr.tobytes())


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    arrays: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        _check_header(fh, _CHECKPOINT_MAGIC, path)
        (blob_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "config length"))
        try:
            config = json.loads(_read_exact(fh, blob_len, path, "config blob"))
        except json.JSONDecodeError as exc:
            raise IngestionError(f"{path}: malformed config blob: {exc}") from exc
        while True:
            head = fh.read(2)
            if not head:
                break
            if len(head) != 2:
                raise IngestionError(f"{path}: truncated parameter record")
            (name_len,) = struct.unpack("<H", head)
            name = _read_exact(fh, name_len, path, "parameter name").decode("utf-8")
            tag, rank = struct.unpack("<BI", _read_exact(fh, 5, path, "parameter header"))
            if tag != _DTYPE_F64:
                raise IngestionError(f"{path}: unknown parameter dtype tag {tag}")
            dims = struct.unpack(
                "<" + "I" * rank, _read_exact(fh, 4 * rank, path, "parameter dims")
            )
            count = int(np.prod(dims, dtype=np.int64)) if rank > 0 else 1
            payload = _read_exact(fh, count * 8, path, f"payload of {name}")
            arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    return config, arrays


def sha256_of_config(config: dict) -> str:
    import hashlib

    return hashlib.sha256(_canonical_json(config)).hexdigest()


def require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise IngestionError(f"{what} not found: {p}")
    return p
