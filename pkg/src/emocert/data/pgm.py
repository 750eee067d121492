"""Binary PGM (P5) image files, fixed at 48x48 / maxval 255."""

from __future__ import annotations

from pathlib import Path

import numpy as np

IMAGE_SIZE = 48


class PgmError(ValueError):
    pass


def write_pgm(img: np.ndarray, path: str | Path) -> None:
    img = np.asarray(img)
    if img.shape != (IMAGE_SIZE, IMAGE_SIZE) or img.dtype != np.uint8:
        raise PgmError(f"image must be uint8 {IMAGE_SIZE}x{IMAGE_SIZE}, got {img.dtype} {img.shape}")
    header = f"P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def _tokens(data: bytes):
    """Header tokens: whitespace-separated, # comments run to end of line.

    Yields (token, position-after-token)."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
        else:
            start = i
            while i < n and data[i : i + 1] not in b" \t\r\n":
                i += 1
            yield data[start:i], i


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    end = 0
    for token, pos in _tokens(data):
        fields.append(token)
        end = pos
        if len(fields) == 4:
            break
    if len(fields) < 4:
        raise PgmError(f"{path}: truncated PGM header")
    magic, width_b, height_b, maxval_b = fields
    if magic != b"P5":
        raise PgmError(f"{path}: unsupported format {magic!r}, only binary P5 is supported")
    try:
        width, height, maxval = int(width_b), int(height_b), int(maxval_b)
    except ValueError as exc:
        raise PgmError(f"{path}: malformed header") from exc
    if (width, height) != (IMAGE_SIZE, IMAGE_SIZE):
        raise PgmError(f"{path}: dimensions {width}x{height}, expected {IMAGE_SIZE}x{IMAGE_SIZE}")
    if maxval != 255:
        raise PgmError(f"{path}: maxval {maxval}, expected 255")
    # exactly one whitespace byte separates maxval from pixel data
    body = data[end + 1 :]
    expected = IMAGE_SIZE * IMAGE_SIZE
    if len(body) < expected:
        raise PgmError(f"{path}: truncated pixel data ({len(body)} of {expected} bytes)")
    if len(body) > expected:
        raise PgmError(f"{path}: {len(body) - expected} trailing bytes after pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(IMAGE_SIZE, IMAGE_SIZE).copy()
