"""Domino partial basis on 2^(k-1) x 2^k windows.

A window splits recursively into horizontal dominoes: the whole window is
one domino of scale k-1, and every 2^l x 2^l pixel splits into a top and a
bottom half, each of which is a domino of scale l-1. At scale l the
dominoes are therefore the aligned pixel pairs (row r, columns 2c and
2c+1) of the scale-l pixel grid, 4^(k-1-l) of them.

Basis vectors: the constant vector sqrt(2)/2^k (unit norm) and one vector
per domino with +-1/(2^l sqrt 2) on its left/right pixel.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, InvariantViolation, ResourceLimit

MAX_EXPLICIT_K = 6
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Window:
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        rows, cols = cells.shape
        if cols < 2 or cols & (cols - 1) or rows * 2 != cols:
            raise InvalidParameter(f"window must be 2^(k-1) x 2^k, got {rows}x{cols}")
        if cells.min() < 0.0 or cells.max() > 1.0:
            raise InvalidParameter("window cells must lie in [0, 1]")
        object.__setattr__(self, "cells", cells)

    @property
    def k(self) -> int:
        return self.cells.shape[1].bit_length() - 1

    @property
    def mu(self) -> float:
        return float(self.cells.mean())

    @property
    def w2(self) -> float:
        return float((self.cells * self.cells).mean())


@dataclass(frozen=True)
class DominoPiece:
    scale: int
    row: int  # cell coordinates of the left pixel's top-left corner
    col: int


@dataclass
class DominoCoefficients:
    k: int
    c0: float
    by_scale: list  # by_scale[l] has shape (2^(k-1-l), 2^(k-1-l)); [r, c] is piece (r, 2c)

    def squared_sum(self) -> float:
        return self.c0 ** 2 + sum(float((c * c).sum()) for c in self.by_scale)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "piece_row", "piece_col", "coefficient"])
        w.writerow([-1, 0, 0, f"{self.c0:.17g}"])
        for ell, coeffs in enumerate(self.by_scale):
            side = 1 << ell
            for r in range(coeffs.shape[0]):
                for c in range(coeffs.shape[1]):
                    w.writerow([ell, r * side, 2 * c * side, f"{coeffs[r, c]:.17g}"])
        return buf.getvalue()


def pieces(k: int, ell: int) -> list[DominoPiece]:
    side = 1 << ell
    count = 1 << (k - 1 - ell)
    return [DominoPiece(ell, r * side, 2 * c * side) for r in range(count) for c in range(count)]


def constant_value(k: int, half_norm: bool = False) -> float:
    """Cell value of the constant basis vector.

    The unit-norm value is sqrt(2)/2^k. ``half_norm`` returns
    1/(2^k sqrt 2), whose vector has norm 1/2 on the 2^(2k-1) cells.
    """
    return 1.0 / ((1 << k) * SQRT2) if half_norm else SQRT2 / (1 << k)


def build_basis(k: int, half_norm: bool = False) -> np.ndarray:
    """Explicit basis vectors as rows, flattened row-major over the window."""
    if k < 1:
        raise InvalidParameter("k must be at least 1")
    if k > MAX_EXPLICIT_K:
        raise ResourceLimit(f"explicit basis only for k <= {MAX_EXPLICIT_K}")
    rows, cols = 1 << (k - 1), 1 << k
    vectors = [np.full(rows * cols, constant_value(k, half_norm))]
    for ell in range(k):
        side = 1 << ell
        amp = 1.0 / (side * SQRT2)
        for piece in pieces(k, ell):
            v = np.zeros((rows, cols))
            v[piece.row : piece.row + side, piece.col : piece.col + side] = amp
            v[piece.row : piece.row + side, piece.col + side : piece.col + 2 * side] = -amp
            vectors.append(v.ravel())
    return np.array(vectors)


def pixel_pyramid(cells: np.ndarray, k: int) -> list[np.ndarray]:
    """Block averages at scales 0..k-1; level l has shape (2^(k-1-l), 2^(k-l))."""
    levels = [cells]
    for _ in range(1, k):
        prev = levels[-1]
        r, c = prev.shape
        levels.append(prev.reshape(r // 2, 2, c // 2, 2).mean(axis=(1, 3)))
    return levels


def _piece_differences(window: Window) -> list[np.ndarray]:
    """x_left - x_right for every domino, per scale."""
    return [level[:, 0::2] - level[:, 1::2] for level in pixel_pyramid(window.cells, window.k)]


def transform(window: Window) -> DominoCoefficients:
    k = window.k
    c0 = float(window.cells.sum()) * constant_value(k)
    coeffs = [(1 << ell) * d / SQRT2 for ell, d in enumerate(_piece_differences(window))]
    return DominoCoefficients(k=k, c0=c0, by_scale=coeffs)


def parseval_slack(window: Window) -> float:
    """2^(2k-1) w^2 minus the squared mass captured by the partial basis."""
    k = window.k
    cells = 1 << (2 * k - 1)
    captured = cells * window.mu ** 2
    for ell, d in enumerate(_piece_differences(window)):
        captured += 2.0 ** (2 * ell - 1) * float((d * d).sum())
    return cells * window.w2 - captured


def parseval_slack_normalized(window: Window) -> float:
    """The same inequality divided through by the cell count."""
    k = window.k
    captured = window.mu ** 2
    for ell, d in enumerate(_piece_differences(window)):
        captured += 4.0 ** (ell - k) * float((d * d).sum())
    return window.w2 - captured


def window_ld(window: Window) -> float:
    """Scale-weighted mean squared discrepancy of the domino tiling."""
    k = window.k
    total = 0.0
    for ell, d in enumerate(_piece_differences(window)):
        total += 4.0 ** (ell + 1 - k) * float((d * d).sum())
    return total / k


def bound_chain(window: Window, tol: float = 1e-9) -> tuple[float, float, float]:
    """(LD(W), (4/k)(w^2 - mu^2), 1/k), checking each is at most the next."""
    k = window.k
    ld = window_ld(window)
    mid = 4.0 / k * (window.w2 - window.mu ** 2)
    final = 1.0 / k
    if not (ld <= mid + tol and mid <= final + tol):
        raise InvariantViolation(f"bound chain broken: {ld!r} <= {mid!r} <= {final!r}")
    return ld, mid, final
