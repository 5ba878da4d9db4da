"""The image distribution: uniform scale, uniform torus anchor, exact pixels."""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .env import Environment, is_power_of_two
from .errors import InvalidParameter
from .pgm import write_pgm
from .rng import normalize_seed, substream


@dataclass(frozen=True)
class ImageSample:
    scale: int
    anchor: tuple[int, int]
    pixels: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.pixels.shape[0]

    def metadata(self) -> dict:
        return {
            "scale": self.scale,
            "anchor_i": self.anchor[0],
            "anchor_j": self.anchor[1],
            "n": self.n,
            "seed": self.seed,
        }

    def save(self, pgm_path) -> str:
        """Write the pixels as PGM plus a JSON sidecar; returns the sidecar path."""
        write_pgm(pgm_path, self.pixels)
        sidecar = os.fspath(pgm_path) + ".json"
        with open(sidecar, "w") as fh:
            json.dump(self.metadata(), fh, sort_keys=True)
        return sidecar


@dataclass(frozen=True)
class SamplerConfig:
    side_n: int
    num_scales_k: int
    seed: int = 0

    def validate(self, env: Environment | int) -> None:
        """Check the size conditions against an environment or a bare side N."""
        N = env if isinstance(env, int) else env.N
        n, k = self.side_n, self.num_scales_k
        if not is_power_of_two(n) or n < 2:
            raise InvalidParameter(f"n must be a power of two >= 2, got {n}")
        if k < 2:
            raise InvalidParameter(f"k must be at least 2, got {k}")
        if n << (k - 1) > N:
            raise InvalidParameter(f"n*2^(k-1) = {n << (k - 1)} exceeds N = {N}")
        if n << k > N:
            warnings.warn(
                f"n*2^k = {n << k} exceeds N = {N}; images at the largest scale "
                "still fit, but the stricter size condition n*2^k <= N does not hold",
                stacklevel=3,
            )


def _check_footprint(env: Environment, ell: int, rows: int, cols: int) -> int:
    ell = env.check_scale(ell)
    if rows < 1 or cols < 1:
        raise InvalidParameter("image must have at least one pixel")
    if max(rows, cols) << ell > env.N:
        raise InvalidParameter(f"image footprint {max(rows, cols)}*2^{ell} exceeds N={env.N}")
    return ell


def extract_batch(env: Environment, ell: int, anchors_i, anchors_j, rows: int, cols: int | None = None) -> np.ndarray:
    """Pixel arrays of shape (T, rows, cols) for T anchors at one scale.

    Pixel (a, b) of image t averages the 2^ell x 2^ell block at
    (anchors_i[t] + a*2^ell, anchors_j[t] + b*2^ell). The corner prefix sums
    are shared between neighbouring pixels, so each image costs
    (rows+1)*(cols+1) prefix lookups.
    """
    cols = rows if cols is None else cols
    ell = _check_footprint(env, ell, rows, cols)
    side = 1 << ell
    ai = np.mod(np.atleast_1d(np.asarray(anchors_i, dtype=np.int64)), env.N)
    aj = np.mod(np.atleast_1d(np.asarray(anchors_j, dtype=np.int64)), env.N)
    r = ai[:, None] + side * np.arange(rows + 1, dtype=np.int64)[None, :]
    c = aj[:, None] + side * np.arange(cols + 1, dtype=np.int64)[None, :]
    P = env.prefix(r[:, :, None], c[:, None, :])
    sums = P[:, 1:, 1:] - P[:, :-1, 1:] - P[:, 1:, :-1] + P[:, :-1, :-1]
    return sums / float(env.denominator * side * side)


def extract_image(env: Environment, scale_ell: int, anchor: tuple[int, int], n: int, m: int | None = None,
                  seed: int | None = None) -> ImageSample:
    i, j = (int(anchor[0]) % env.N, int(anchor[1]) % env.N)
    pixels = extract_batch(env, scale_ell, [i], [j], n, m)[0]
    return ImageSample(scale=int(scale_ell), anchor=(i, j), pixels=pixels, seed=seed)


def draw_anchor(rng: np.random.Generator, N: int) -> tuple[int, int]:
    i, j = rng.integers(0, N, size=2)
    return int(i), int(j)


def sample_image(env: Environment, config: SamplerConfig, trial: int = 0) -> ImageSample:
    """Draw one image from the distribution; trial selects the substream."""
    config.validate(env)
    seed = normalize_seed(config.seed)
    rng = substream(seed, trial)
    ell = int(rng.integers(0, config.num_scales_k))
    anchor = draw_anchor(rng, env.N)
    return extract_image(env, ell, anchor, config.side_n, seed=seed)


def sample_window(env: Environment, scale_ell: int, n: int, seed: int = 0, trial: int = 0) -> ImageSample:
    """Half an image: (n/2) x n pixels at a uniform random anchor."""
    if n < 2 or n % 2:
        raise InvalidParameter(f"window needs an even n >= 2, got {n}")
    rng = substream(normalize_seed(seed), trial)
    anchor = draw_anchor(rng, env.N)
    return extract_image(env, scale_ell, anchor, n // 2, n, seed=seed)
