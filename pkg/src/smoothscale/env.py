"""Environments: N x N tori of cell intensities with exact block averages.

Every backend reduces to one primitive, an integer prefix sum over the
periodic extension of the torus::

    prefix(r, c) = sum of units(i mod N, j mod N) for 0 <= i < r, 0 <= j < c

where ``intensity = units / denominator``. A block of any size at any
anchor is then four prefix lookups, wraparound included, and the sum is an
exact integer. Dense grids keep a summed-area table of 30-bit fixed-point
values; procedural backends evaluate ``prefix`` in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, ResourceLimit
from .rng import substream

FIXED_POINT_BITS = 30
FIXED_ONE = 1 << FIXED_POINT_BITS
DENSE_MAX_SIDE = 1 << 13
MAX_PATTERN_BITS = 26


def is_power_of_two(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


def _check_side(N: int, minimum: int = 1) -> int:
    N = int(N)
    if not is_power_of_two(N) or N < minimum:
        raise InvalidParameter(f"N must be a power of two >= {minimum}, got {N}")
    return N


def to_fixed(values) -> np.ndarray:
    """Quantize intensities in [0, 1] to 30-bit fixed point."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and (np.nanmin(values) < 0.0 or np.nanmax(values) > 1.0 or np.isnan(values).any()):
        raise InvalidParameter("intensities must lie in [0, 1]")
    return np.rint(values * FIXED_ONE).astype(np.int64)


@dataclass(frozen=True)
class BlockQuery:
    anchor_i: int
    anchor_j: int
    scale_ell: int


class Environment:
    """Base class. Subclasses implement ``_base_prefix`` for 0 <= r, c <= N."""

    kind = "abstract"
    denominator: int = 1

    def __init__(self, N: int):
        self.N = _check_side(N)
        self._total = None

    # -- primitive -------------------------------------------------------
    def _base_prefix(self, r: np.ndarray, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def total(self) -> int:
        if self._total is None:
            self._total = int(self._base_prefix(np.int64(self.N), np.int64(self.N)))
        return self._total

    def prefix(self, r, c) -> np.ndarray:
        """Integer prefix sum over the periodic extension, for any r, c >= 0."""
        r = np.asarray(r, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        N = self.N
        a, rr = np.divmod(r, N)
        b, cc = np.divmod(c, N)
        full_n = np.int64(N)
        return (
            a * b * self.total
            + a * self._base_prefix(full_n, cc)
            + b * self._base_prefix(rr, full_n)
            + self._base_prefix(rr, cc)
        )

    # -- queries ---------------------------------------------------------
    def check_scale(self, ell: int) -> int:
        ell = int(ell)
        if ell < 0 or (1 << ell) > self.N:
            raise InvalidParameter(f"block side 2^{ell} exceeds N={self.N}")
        return ell

    def block_sums(self, i, j, height: int, width: int) -> np.ndarray:
        """Exact integer sums of height x width blocks anchored at (i, j)."""
        i = np.mod(np.asarray(i, dtype=np.int64), self.N)
        j = np.mod(np.asarray(j, dtype=np.int64), self.N)
        return (
            self.prefix(i + height, j + width)
            - self.prefix(i, j + width)
            - self.prefix(i + height, j)
            + self.prefix(i, j)
        )

    def block_averages(self, i, j, ell: int) -> np.ndarray:
        ell = self.check_scale(ell)
        side = 1 << ell
        return self.block_sums(i, j, side, side) / float(self.denominator * side * side)

    def block_average(self, i: int, j: int, ell: int) -> float:
        return float(self.block_averages(i, j, ell))

    def query(self, q: BlockQuery) -> float:
        return self.block_average(q.anchor_i, q.anchor_j, q.scale_ell)

    def intensity(self, i: int, j: int) -> float:
        return self.block_average(i, j, 0)

    def render(self) -> np.ndarray:
        """Full N x N float intensity grid (only sensible for small N)."""
        if self.N > DENSE_MAX_SIDE:
            raise InvalidParameter(f"refusing to render N={self.N} > {DENSE_MAX_SIDE}")
        idx = np.arange(self.N + 1, dtype=np.int64)
        P = self.prefix(idx[:, None], idx[None, :])
        units = P[1:, 1:] - P[:-1, 1:] - P[1:, :-1] + P[:-1, :-1]
        return units / float(self.denominator)

    def params(self) -> dict:
        return {"kind": self.kind, "N": self.N}

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params().items() if k != "kind")
        return f"{type(self).__name__}({inner})"


class DenseEnvironment(Environment):
    """Explicit grid stored as a summed-area table of fixed-point values."""

    kind = "dense"
    denominator = FIXED_ONE

    def __init__(self, fixed: np.ndarray, label: str = "dense", **meta):
        fixed = np.asarray(fixed, dtype=np.int64)
        if fixed.ndim != 2 or fixed.shape[0] != fixed.shape[1]:
            raise InvalidParameter(f"dense grid must be square, got shape {fixed.shape}")
        super().__init__(fixed.shape[0])
        if self.N > DENSE_MAX_SIDE:
            raise InvalidParameter(f"dense environments are capped at N={DENSE_MAX_SIDE}")
        if fixed.min() < 0 or fixed.max() > FIXED_ONE:
            raise InvalidParameter("fixed-point intensities out of range")
        sat = np.zeros((self.N + 1, self.N + 1), dtype=np.int64)
        sat[1:, 1:] = fixed.cumsum(axis=0).cumsum(axis=1)
        self.sat = sat
        self.label = label
        self.meta = meta

    @classmethod
    def from_array(cls, values, label: str = "dense", **meta) -> "DenseEnvironment":
        return cls(to_fixed(values), label=label, **meta)

    def _base_prefix(self, r, c):
        return self.sat[r, c]

    def fixed_values(self) -> np.ndarray:
        s = self.sat
        return s[1:, 1:] - s[:-1, 1:] - s[1:, :-1] + s[:-1, :-1]

    def params(self) -> dict:
        return {"kind": self.label, "N": self.N, **self.meta}


class CheckerboardEnvironment(Environment):
    """Cell (i, j) has intensity (i + j) mod 2."""

    kind = "checkerboard"

    def __init__(self, N: int):
        super().__init__(_check_side(N, 2))

    def _base_prefix(self, r, c):
        # odd-parity cells in [0,r) x [0,c)
        return (r * c - (r & 1) * (c & 1)) // 2


class MegacellEnvironment(Environment):
    """Checkerboard of 2^k x 2^k blocks of constant intensity."""

    kind = "megacell"

    def __init__(self, N: int, k: int):
        N = _check_side(N)
        k = int(k)
        if k < 0 or N % (1 << k):
            raise InvalidParameter(f"mega-cell side 2^{k} must divide N={N}")
        super().__init__(N)
        self.k = k
        self.side = 1 << k

    def _odd_count(self, r):
        s = self.side
        return (r // (2 * s)) * s + np.maximum(0, r % (2 * s) - s)

    def _base_prefix(self, r, c):
        r1 = self._odd_count(r)
        c1 = self._odd_count(c)
        return (r - r1) * c1 + r1 * (c - c1)

    def params(self) -> dict:
        return {"kind": self.kind, "N": self.N, "k": self.k}


class ColumnFunctionEnvironment(Environment):
    """Intensity depends on the column only: units[j] / denominator."""

    kind = "column_function"

    def __init__(self, column_units: np.ndarray, denominator: int):
        column_units = np.asarray(column_units, dtype=np.int64)
        super().__init__(column_units.shape[0])
        if column_units.min() < 0 or column_units.max() > denominator:
            raise InvalidParameter("column intensities out of range")
        self.denominator = int(denominator)
        self.column_units = column_units
        self.column_prefix = np.concatenate([[0], np.cumsum(column_units)]).astype(np.int64)

    def _base_prefix(self, r, c):
        return r * self.column_prefix[c]

    def column_values(self) -> np.ndarray:
        return self.column_units / float(self.denominator)


class RowFunctionEnvironment(Environment):
    """Intensity depends on the row only: units[i] / denominator."""

    kind = "row_function"

    def __init__(self, row_units: np.ndarray, denominator: int):
        row_units = np.asarray(row_units, dtype=np.int64)
        super().__init__(row_units.shape[0])
        if row_units.min() < 0 or row_units.max() > denominator:
            raise InvalidParameter("row intensities out of range")
        self.denominator = int(denominator)
        self.row_units = row_units
        self.row_prefix = np.concatenate([[0], np.cumsum(row_units)]).astype(np.int64)

    def _base_prefix(self, r, c):
        return self.row_prefix[r] * c


class ConstantEnvironment(Environment):
    kind = "constant"
    denominator = FIXED_ONE

    def __init__(self, N: int, value: float):
        super().__init__(N)
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise InvalidParameter(f"constant intensity must lie in [0, 1], got {value}")
        self.value = value
        self.units = int(round(value * FIXED_ONE))

    def _base_prefix(self, r, c):
        return self.units * r * c

    def params(self) -> dict:
        return {"kind": self.kind, "N": self.N, "v": self.value}


class PrefixWalkEnvironment(ColumnFunctionEnvironment):
    """Column intensities from +-1 walks over the k low bits of the column index.

    Raw values live in [-a, a] with ``a = 2 * sqrt(log2 k)``; a column is
    *extreme* when some prefix of its walk reaches +-a first, in which case
    the raw value is that hitting value, otherwise it is the full walk sum.
    Stored intensity is ``(raw + a) / (2a)``.
    """

    kind = "prefix_walk"

    def __init__(self, N: int, k: int):
        N = _check_side(N)
        k = int(k)
        a = prefix_walk_threshold(k)
        if N <= (1 << k):
            raise InvalidParameter(f"prefix walk needs N > 2^k, got N={N}, k={k}")
        raw, extreme = prefix_walk_pattern(k)
        reps = N >> k
        self.k = k
        self.threshold = a
        self.raw = np.tile(raw, reps)
        self.extreme = np.tile(extreme, reps)
        super().__init__(self.raw + a, 2 * a)

    def extreme_fraction(self) -> float:
        return float(self.extreme.mean())

    def params(self) -> dict:
        return {"kind": self.kind, "N": self.N, "k": self.k}


def valid_prefix_walk_ks(limit: int = 4) -> list[int]:
    """Smallest values of k for which 2*sqrt(log2 k) is an integer."""
    return [1 << (m * m) for m in range(1, limit + 1)]


def prefix_walk_threshold(k: int) -> int:
    """Return 2*sqrt(log2 k) or raise if it is not an integer."""
    if k >= 2 and is_power_of_two(k):
        four_log = 4 * (k.bit_length() - 1)
        root = math.isqrt(four_log)
        if root * root == four_log:
            return root
    valid = valid_prefix_walk_ks()
    nearest = sorted(valid, key=lambda v: abs(v - k))[:2]
    raise InvalidParameter(
        f"prefix walk needs 2*sqrt(log2 k) to be an integer; k={k} is invalid "
        f"(valid k: {', '.join(map(str, valid))}, ...; nearest: {sorted(nearest)})"
    )


def prefix_walk_pattern(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Raw value and extreme flag for every column index j in [0, 2^k)."""
    a = prefix_walk_threshold(k)
    if k > MAX_PATTERN_BITS:
        raise ResourceLimit(f"a prefix walk with k={k} needs 2^{k} columns; at most k={MAX_PATTERN_BITS} is supported")
    j = np.arange(1 << k, dtype=np.int64)
    running = np.zeros_like(j)
    value = np.zeros_like(j)
    hit = np.zeros(j.shape, dtype=bool)
    for bit in range(k - 1, -1, -1):
        running += 2 * ((j >> bit) & 1) - 1
        newly = ~hit & (np.abs(running) == a)
        value[newly] = running[newly]
        hit |= newly
    value[~hit] = running[~hit]
    return value, hit


def make_checkerboard(N: int) -> CheckerboardEnvironment:
    return CheckerboardEnvironment(N)


def make_megacell(N: int, k: int) -> MegacellEnvironment:
    return MegacellEnvironment(N, k)


def make_prefix_walk(N: int, k: int) -> PrefixWalkEnvironment:
    return PrefixWalkEnvironment(N, k)


def make_constant(N: int, v: float) -> ConstantEnvironment:
    return ConstantEnvironment(N, v)


def make_row_gradient(N: int) -> RowFunctionEnvironment:
    N = _check_side(N)
    env = RowFunctionEnvironment(np.arange(N, dtype=np.int64), N)
    env.kind = "gradient"
    return env


def make_iid_uniform(N: int, seed: int) -> DenseEnvironment:
    N = _check_side(N)
    if N > DENSE_MAX_SIDE:
        raise InvalidParameter(f"dense environments are capped at N={DENSE_MAX_SIDE}")
    fixed = substream(seed, 0).integers(0, FIXED_ONE, size=(N, N), endpoint=True, dtype=np.int64)
    return DenseEnvironment(fixed, label="iid", seed=int(seed))


class InstrumentedEnvironment(Environment):
    """Delegating wrapper that records the range of prefix coordinates read."""

    def __init__(self, inner: Environment):
        super().__init__(inner.N)
        self.inner = inner
        self.kind = inner.kind
        self.denominator = inner.denominator
        self.reads: list[tuple[int, int, int, int]] = []

    def prefix(self, r, c):
        r = np.asarray(r, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        rb, cb = np.broadcast_arrays(r, c)
        self.reads.append((int(rb.min()), int(rb.max()), int(cb.min()), int(cb.max())))
        return self.inner.prefix(r, c)

    def _base_prefix(self, r, c):
        return self.inner._base_prefix(r, c)

    def params(self) -> dict:
        return self.inner.params()
