"""Flat binary archive of named parameter arrays.

Layout (all integers little-endian)::

    b"MSNT1\\n"
    repeated until EOF:
        u32 name_length, name (UTF-8)
        u32 ndim, ndim x u32 extents
        prod(extents) x f32 values (row-major)
"""

import struct

import numpy as np

from ..errors import ParseError

MAGIC = b"MSNT1\n"


def dumps(params):
    """Serialize an ordered mapping ``name -> array-like`` to bytes."""
    chunks = [MAGIC]
    for name, value in params.items():
        arr = np.asarray(getattr(value, "data", value), dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(chunks)


def loads(blob, path=None):
    """Inverse of :func:`dumps`; returns a dict of float32 arrays in file order."""
    if not blob.startswith(MAGIC):
        raise ParseError("missing MSNT1 magic header", 0, path)
    pos = len(MAGIC)
    out = {}

    def take(n, what):
        nonlocal pos
        if pos + n > len(blob):
            raise ParseError(f"truncated {what}", pos, path)
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    while pos < len(blob):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        start = pos
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("name is not valid UTF-8", start, path) from exc
        (ndim,) = struct.unpack("<I", take(4, "rank"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, "shape"))
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(take(4 * count, "values"), dtype="<f4")
        out[name] = values.reshape(shape).astype(np.float32)
    return out


def save_checkpoint(path, params):
    with open(path, "wb") as fh:
        fh.write(dumps(params))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads(fh.read(), path=str(path))
