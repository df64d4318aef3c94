"""Named-weight checkpoint files.

Layout: magic 'EMOW', u32 version, u32 tensor count, then per tensor a u16
name length, UTF-8 name, dtype byte (0=f32, 1=f64), u32 rank, u64 dims, and
the little-endian row-major payload. Names are hierarchical dotted paths;
loading keys on names, so on-disk order never matters.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import FormatError, _CODE_DTYPES, _DTYPE_CODES, _read_exact

_MAGIC_WEIGHTS = b"EMOW"
_WEIGHTS_VERSION = 1


def save_weights(path, tensors: dict[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", _MAGIC_WEIGHTS, _WEIGHTS_VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            if arr.dtype not in _DTYPE_CODES:
                raise FormatError(f"{name}: unsupported dtype {arr.dtype}")
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise FormatError(f"tensor name too long ({len(encoded)} bytes)")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BI", _DTYPE_CODES[arr.dtype], arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def load_weights(path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic, version, count = struct.unpack("<4sII", _read_exact(fh, 12, "header"))
        if magic != _MAGIC_WEIGHTS:
            raise FormatError(f"bad magic {magic!r}; not a weights file")
        if version != _WEIGHTS_VERSION:
            raise FormatError(f"unsupported weights format version {version}")
        for i in range(count):
            (nlen,) = struct.unpack("<H", _read_exact(fh, 2, f"name length of tensor {i}"))
            name = _read_exact(fh, nlen, f"name of tensor {i}").decode("utf-8")
            code, rank = struct.unpack("<BI", _read_exact(fh, 5, f"{name}: dtype/rank"))
            if code not in _CODE_DTYPES:
                raise FormatError(f"{name}: unknown dtype code {code}")
            if rank > 8:
                raise FormatError(f"{name}: implausible rank {rank}")
            dims = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, f"{name}: dims"))
            n = 1
            for d in dims:
                n *= d
            if n > 1 << 33:
                raise FormatError(f"{name}: dims {dims} exceed the supported element count")
            dt = _CODE_DTYPES[code]
            payload = _read_exact(fh, n * dt.itemsize, f"{name}: payload")
            if name in out:
                raise FormatError(f"duplicate tensor name {name!r}")
            out[name] = np.frombuffer(payload, dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
        if fh.read(1):
            raise FormatError("trailing bytes after last tensor")
    return out
