"""Binary PGM (P5, 8-bit) reading and writing."""

from __future__ import annotations

import os
import sys
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["PGMError", "read_pgm", "write_pgm", "load_plane", "crop_to_blocks"]


class PGMError(ValueError):
    pass


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    pos = 0
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _tokens(data, 4)
    if magic != b"P5":
        raise PGMError(f"{path}: not a binary PGM (P5) file")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise PGMError(f"{path}: malformed header") from None
    if maxval != 255:
        raise PGMError(f"{path}: only 8-bit PGM (maxval 255) is supported")
    if w <= 0 or h <= 0:
        raise PGMError(f"{path}: empty image")
    pos += 1    # single whitespace byte after maxval
    body = data[pos:pos + w * h]
    if len(body) != w * h:
        raise PGMError(f"{path}: truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path, plane) -> None:
    """Write atomically (temp file + rename)."""
    p = np.asarray(plane)
    if p.ndim != 2:
        raise PGMError("PGM plane must be 2-D")
    if p.dtype != np.uint8:
        if p.min() < 0 or p.max() > 255:
            raise PGMError("pixel values outside [0, 255]")
        p = p.astype(np.uint8)
    h, w = p.shape
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (w, h))
            fh.write(np.ascontiguousarray(p).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def crop_to_blocks(plane: np.ndarray, block: int = 8) -> np.ndarray:
    """Center-crop to the largest block-aligned size."""
    h, w = plane.shape
    nh, nw = h - h % block, w - w % block
    if nh == 0 or nw == 0:
        raise PGMError(f"image {w}x{h} smaller than one {block}x{block} block")
    top, left = (h - nh) // 2, (w - nw) // 2
    return plane[top:top + nh, left:left + nw]


def load_plane(path) -> np.ndarray:
    plane = read_pgm(path)
    cropped = crop_to_blocks(plane)
    if cropped.shape != plane.shape:
        print(f"{path}: cropped {plane.shape[1]}x{plane.shape[0]} to "
              f"{cropped.shape[1]}x{cropped.shape[0]}", file=sys.stderr)
    return np.ascontiguousarray(cropped)
