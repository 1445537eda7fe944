"""Feature-map file formats.

Binary layout (all little-endian)::

    offset 0   b"CGNL"        magic
    offset 4   u32 version    currently 1
    offset 8   u32 N
    offset 12  u32 C
    offset 16  N*C f64        row-major (position-major)

The CSV alternative starts with two header lines ``N=<n>`` and ``C=<c>``
followed by ``N`` comma-separated rows of ``C`` values.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import as_feature_map
from .errors import FormatError

MAGIC = b"CGNL"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_feature_map(path, x) -> None:
    x = as_feature_map(x)
    path = Path(path)
    if path.suffix.lower() == ".csv":
        n, c = x.shape
        lines = [f"N={n}", f"C={c}"]
        lines += [",".join(repr(float(v)) for v in row) for row in x]
        path.write_text("\n".join(lines) + "\n")
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, *x.shape))
        fh.write(x.astype("<f8").tobytes())


def read_feature_map(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv(path.read_text())
    return parse_binary(path.read_bytes())


def parse_binary(buf: bytes) -> np.ndarray:
    for i, expected in enumerate(MAGIC):
        if i >= len(buf):
            raise FormatError("truncated magic", offset=i)
        if buf[i] != expected:
            raise FormatError(f"bad magic byte {buf[i]:#04x}, expected {expected:#04x}", offset=i)
    if len(buf) < _HEADER.size:
        raise FormatError("truncated header", offset=len(buf))
    _, version, n, c = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if n < 1 or c < 1:
        raise FormatError(f"invalid dimensions N={n}, C={c}", offset=8)
    need = _HEADER.size + 8 * n * c
    if len(buf) != need:
        raise FormatError(f"payload size mismatch: expected {need} bytes, got {len(buf)}",
                          offset=min(len(buf), need))
    data = np.frombuffer(buf, dtype="<f8", count=n * c, offset=_HEADER.size)
    return as_feature_map(data.reshape(n, c).astype(np.float64))


def _read_csv(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("N=") or not lines[1].startswith("C="):
        raise FormatError("CSV feature map must start with 'N=<n>' and 'C=<c>' header lines")
    try:
        n = int(lines[0][2:])
        c = int(lines[1][2:])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[2:]]
    except ValueError as exc:
        raise FormatError(f"malformed CSV feature map: {exc}") from None
    if len(rows) != n or any(len(r) != c for r in rows):
        raise FormatError(f"CSV body does not match header N={n}, C={c}")
    return as_feature_map(rows)
