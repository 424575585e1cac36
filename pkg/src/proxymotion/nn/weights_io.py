"""Binary weight container.

Layout (all integers little-endian)::

    magic      8 bytes   b"PXMWGT\\x00\\x01"
    count      u32       number of arrays
    table      count entries of
                 name_len u16, name utf-8, dtype u8 (0 = f8, 1 = f4),
                 ndim u8, dims u64 * ndim, offset u64, nbytes u64
    payload    concatenated little-endian array bytes, offsets relative to
               the start of the payload
    digest     32 bytes  sha256 of everything above

Reading verifies the digest before touching the table. Arrays round-trip
bit for bit.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from collections import OrderedDict
from typing import Dict

import numpy as np

MAGIC = b"PXMWGT\x00\x01"
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}


class WeightFileError(ValueError):
    pass


def encode_weights(arrays: Dict[str, np.ndarray]) -> bytes:
    table = bytearray()
    payload = bytearray()
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.dtype not in _CODES:
            raise WeightFileError(f"{name}: unsupported dtype {arr.dtype}")
        code = _CODES[arr.dtype]
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        key = name.encode("utf-8")
        table += struct.pack("<H", len(key)) + key
        table += struct.pack("<BB", code, arr.ndim)
        table += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        table += struct.pack("<QQ", len(payload), len(raw))
        payload += raw
    body = MAGIC + struct.pack("<I", len(arrays)) + bytes(table) + bytes(payload)
    return body + hashlib.sha256(body).digest()


def decode_weights(blob: bytes) -> "OrderedDict[str, np.ndarray]":
    if len(blob) < len(MAGIC) + 4 + 32 or blob[:len(MAGIC)] != MAGIC:
        raise WeightFileError("not a weight container (bad magic)")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise WeightFileError("checksum mismatch; file is corrupt")
    pos = len(MAGIC)
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    entries = []
    for _ in range(count):
        (n,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + n].decode("utf-8")
        pos += n
        code, ndim = struct.unpack_from("<BB", body, pos)
        pos += 2
        dims = struct.unpack_from(f"<{ndim}Q", body, pos)
        pos += 8 * ndim
        offset, nbytes = struct.unpack_from("<QQ", body, pos)
        pos += 16
        if code not in _DTYPES:
            raise WeightFileError(f"{name}: unknown dtype code {code}")
        entries.append((name, _DTYPES[code], dims, offset, nbytes))
    out = OrderedDict()
    for name, dtype, dims, offset, nbytes in entries:
        start = pos + offset
        if start + nbytes > len(body) or nbytes != dtype.itemsize * int(np.prod(dims, dtype=np.int64)):
            raise WeightFileError(f"{name}: section out of bounds or wrong size")
        out[name] = np.frombuffer(body, dtype=dtype, count=nbytes // dtype.itemsize,
                                  offset=start).reshape(dims).astype(dtype.newbyteorder("="))
    return out


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_weights(path, arrays: Dict[str, np.ndarray]) -> None:
    atomic_write_bytes(path, encode_weights(arrays))


def load_weights(path) -> "OrderedDict[str, np.ndarray]":
    with open(path, "rb") as fh:
        return decode_weights(fh.read())
