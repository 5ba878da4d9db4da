"""Binary PGM (P5) reading and writing.

Files are written with maxval 65535 and big-endian 16-bit samples. Reading
accepts any maxval in [1, 65535] (8-bit samples when maxval < 256) and
``#`` comments in the header.
"""

from __future__ import annotations

import os

import numpy as np

from .env import DENSE_MAX_SIDE, DenseEnvironment, Environment, is_power_of_two, to_fixed
from .errors import FormatError, InvalidParameter

MAXVAL = 65535
_WHITESPACE = b" \t\n\r\v\f"


def quantize(values, maxval: int = MAXVAL) -> np.ndarray:
    """Integer samples for intensities in [0, 1]."""
    return np.rint(np.asarray(values, dtype=np.float64) * maxval).astype(np.int64)


def _header_tokens(data: bytes, count: int) -> tuple[list[tuple[bytes, int]], int]:
    tokens: list[tuple[bytes, int]] = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise FormatError("truncated header", pos)
        ch = data[pos : pos + 1]
        if ch in (b"#",):
            end = data.find(b"\n", pos)
            if end < 0:
                raise FormatError("unterminated header comment", pos)
            pos = end + 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            start = pos
            while pos < len(data) and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
                pos += 1
            tokens.append((data[start:pos], start))
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval", pos)
    return tokens, pos + 1


def _int_token(token: bytes, offset: int, what: str) -> int:
    if not token.isdigit():
        raise FormatError(f"invalid {what} {token!r}", offset)
    return int(token)


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Return (samples as int64 array of shape (rows, cols), maxval)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise FormatError("not a binary PGM (expected magic 'P5')", 0)
    tokens, raster_at = _header_tokens(data, 4)
    (magic, _), (w_tok, w_off), (h_tok, h_off), (m_tok, m_off) = tokens
    if magic != b"P5":
        raise FormatError(f"bad magic {magic!r}", 0)
    width = _int_token(w_tok, w_off, "width")
    height = _int_token(h_tok, h_off, "height")
    maxval = _int_token(m_tok, m_off, "maxval")
    if not 1 <= maxval <= MAXVAL:
        raise FormatError(f"maxval {maxval} outside [1, 65535]", m_off)
    if width < 1 or height < 1:
        raise FormatError("empty raster", w_off)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    raster = data[raster_at : raster_at + expected]
    if len(raster) < expected:
        raise FormatError(f"raster truncated: expected {expected} bytes, found {len(raster)}", raster_at + len(raster))
    samples = np.frombuffer(raster, dtype=dtype).astype(np.int64).reshape(height, width)
    if samples.max(initial=0) > maxval:
        bad = int(np.argmax(samples.ravel() > maxval))
        raise FormatError(f"sample exceeds maxval {maxval}", raster_at + bad * dtype.itemsize)
    return samples, maxval


def write_pgm(path, values) -> None:
    """Write intensities in [0, 1] (any 2-D array) as a 16-bit P5 file."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise InvalidParameter("PGM raster must be two-dimensional")
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise InvalidParameter("intensities must lie in [0, 1]")
    rows, cols = values.shape
    header = f"P5\n{cols} {rows}\n{MAXVAL}\n".encode("ascii")
    body = quantize(values).astype(">u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_pgm(path) -> DenseEnvironment:
    samples, maxval = read_pgm(path)
    rows, cols = samples.shape
    if rows != cols:
        raise FormatError(f"environment raster must be square, got {cols}x{rows}", 3)
    if not is_power_of_two(rows):
        raise FormatError(f"environment side {rows} is not a power of two", 3)
    if rows > DENSE_MAX_SIDE:
        raise FormatError(f"environment side {rows} exceeds dense cap {DENSE_MAX_SIDE}", 3)
    return DenseEnvironment(to_fixed(samples / maxval), label="pgm", path=os.fspath(path))


def save_pgm(env: Environment, path, render_cap: int = DENSE_MAX_SIDE) -> None:
    if env.N > render_cap:
        raise InvalidParameter(f"N={env.N} exceeds the render cap {render_cap}")
    write_pgm(path, env.render())
