"""Binary PGM (P5) and PPM (P6) reading and writing.

Samples are 8-bit when ``maxval < 256`` and 16-bit big-endian otherwise.
Rasters are float arrays in [0, 1]: ``H x W`` for P5, ``H x W x 3`` for P6.
"""

from pathlib import Path

import numpy as np

from ..errors import InputError, ParseError

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _header_tokens(blob, path):
    """Return (magic, width, height, maxval, payload_offset)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos] in _WHITESPACE:
            pos += 1
        if pos >= len(blob):
            raise ParseError("truncated header", pos, path)
        if blob[pos:pos + 1] == b"#":
            end = blob.find(b"\n", pos)
            if end < 0:
                raise ParseError("unterminated comment in header", pos, path)
            pos = end + 1
            continue
        start = pos
        while pos < len(blob) and blob[pos] not in _WHITESPACE and blob[pos:pos + 1] != b"#":
            pos += 1
        tokens.append((blob[start:pos], start))
    if pos >= len(blob) or blob[pos] not in _WHITESPACE:
        raise ParseError("missing whitespace after maxval", pos, path)
    magic, mstart = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}; expected P5 or P6", mstart, path)
    values = []
    for (tok, start), what in zip(tokens[1:], ("width", "height", "maxval")):
        if not tok.isdigit():
            raise ParseError(f"{what} is not a positive integer: {tok!r}", start, path)
        values.append(int(tok))
    width, height, maxval = values
    if width < 1 or height < 1:
        raise ParseError("zero image extent", tokens[1][1] if width < 1 else tokens[2][1], path)
    if not 1 <= maxval <= 65535:
        raise ParseError(f"maxval {maxval} outside 1..65535", tokens[3][1], path)
    return magic.decode(), width, height, maxval, pos + 1


def decode(blob, path=None):
    magic, width, height, maxval, offset = _header_tokens(blob, path)
    channels = 3 if magic == "P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * channels * dtype.itemsize
    if len(blob) - offset < need:
        raise ParseError(f"truncated payload: need {need} bytes, have {len(blob) - offset}", len(blob), path)
    raw = np.frombuffer(blob, dtype=dtype, count=width * height * channels, offset=offset)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return raw.reshape(shape).astype(np.float64) / maxval


def read_raster(path):
    path = Path(path)
    return decode(path.read_bytes(), path=str(path))


def encode(raster, bits=8):
    """Quantize a [0, 1] raster to P5/P6 bytes with maxval 255 or 65535."""
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim == 2:
        magic = b"P5"
    elif raster.ndim == 3 and raster.shape[2] == 3:
        magic = b"P6"
    else:
        raise InputError(f"cannot encode raster of shape {raster.shape} as PGM/PPM")
    if bits not in (8, 16):
        raise InputError(f"bits must be 8 or 16, got {bits}")
    maxval = 255 if bits == 8 else 65535
    q = np.rint(np.clip(raster, 0.0, 1.0) * maxval)
    payload = q.astype(">u2" if bits == 16 else "u1").tobytes()
    h, w = raster.shape[:2]
    return magic + f"\n{w} {h}\n{maxval}\n".encode() + payload


def encode_levels(levels, maxval):
    """Encode integer sample levels directly (no [0, 1] mapping)."""
    levels = np.asarray(levels)
    magic = b"P5" if levels.ndim == 2 else b"P6"
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = levels.shape[:2]
    return magic + f"\n{w} {h}\n{maxval}\n".encode() + levels.astype(dtype).tobytes()


def write_raster(raster, path, bits=8):
    Path(path).write_bytes(encode(raster, bits))
