"""Local and global discrepancy statistics and their Monte-Carlo estimators.

All per-image functions accept a single image of shape (n, m) or a batch
of shape (..., n, m) and reduce over the last two axes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .env import Environment
from .errors import InvalidParameter, InvariantViolation, UndefinedStatistic
from .rng import normalize_seed, substream
from .sampling import SamplerConfig, draw_anchor, extract_batch

CHUNK_TRIALS = 2048


def _pixels(image) -> np.ndarray:
    pixels = getattr(image, "pixels", image)
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim < 2:
        raise InvalidParameter("image must be at least two-dimensional")
    return pixels


def edge_count(n: int, m: int) -> int:
    return 2 * n * m - n - m


def _check_order(order: int) -> None:
    if order not in (1, 2):
        raise InvalidParameter(f"discrepancy order must be 1 or 2, got {order}")


def local_discrepancy(image, order: int = 2):
    """Mean |x_p - x_q|^order over horizontally and vertically adjacent pairs."""
    _check_order(order)
    x = _pixels(image)
    n, m = x.shape[-2:]
    edges = edge_count(n, m)
    if edges == 0:
        raise UndefinedStatistic("a 1x1 image has no edges")
    dv = np.diff(x, axis=-2)
    dh = np.diff(x, axis=-1)
    if order == 1:
        total = np.abs(dv).sum(axis=(-2, -1)) + np.abs(dh).sum(axis=(-2, -1))
    else:
        total = (dv * dv).sum(axis=(-2, -1)) + (dh * dh).sum(axis=(-2, -1))
    return total / edges


def global_discrepancy(image, order: int = 2):
    """Mean |x_p - x_q|^order over all ordered pixel pairs, p = q included.

    Order 2 is twice the population variance. Order 1 uses the sorted-value
    identity sum_{p,q} |x_p - x_q| = 2 * sum_i (2i - M - 1) y_(i).
    """
    _check_order(order)
    x = _pixels(image)
    flat = x.reshape(x.shape[:-2] + (-1,))
    M = flat.shape[-1]
    if order == 2:
        # shifting by one pixel first keeps constant images exactly at zero
        shifted = flat - flat[..., :1]
        centred = shifted - shifted.mean(axis=-1, keepdims=True)
        return 2.0 * (centred * centred).mean(axis=-1)
    y = np.sort(flat, axis=-1)
    weights = 2.0 * np.arange(1, M + 1) - M - 1
    return 2.0 * (y @ weights) / (M * M)


def local_discrepancy_bruteforce(pixels, order: int = 2) -> float:
    """Explicit loop over the edge set."""
    x = np.asarray(pixels, dtype=np.float64)
    n, m = x.shape
    total, count = 0.0, 0
    for a in range(n):
        for b in range(m):
            for da, db in ((0, 1), (1, 0)):
                if a + da < n and b + db < m:
                    total += abs(x[a, b] - x[a + da, b + db]) ** order
                    count += 1
    if count == 0:
        raise UndefinedStatistic("a 1x1 image has no edges")
    return total / count


def global_discrepancy_bruteforce(pixels, order: int = 2) -> float:
    """All-pairs O(M^2) evaluation."""
    flat = np.asarray(pixels, dtype=np.float64).ravel()
    diff = np.abs(flat[:, None] - flat[None, :]) ** order
    return float(diff.sum() / (flat.size * flat.size))


def local_correlation(image):
    """GD_2 / LD_2 with 0/0 read as 1."""
    ld2 = np.asarray(local_discrepancy(image, 2))
    gd2 = np.asarray(global_discrepancy(image, 2))
    zero = ld2 == 0.0
    if np.any(zero & (gd2 != 0.0)):
        raise InvariantViolation("LD2 = 0 but GD2 != 0")
    out = np.where(zero, 1.0, gd2 / np.where(zero, 1.0, ld2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DiscrepancyReport:
    ld1: float
    ld2: float
    gd1: float
    gd2: float
    lc: float
    edge_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def report(image) -> DiscrepancyReport:
    x = _pixels(image)
    if x.ndim != 2:
        raise InvalidParameter("report() takes a single image")
    return DiscrepancyReport(
        ld1=float(local_discrepancy(x, 1)),
        ld2=float(local_discrepancy(x, 2)),
        gd1=float(global_discrepancy(x, 1)),
        gd2=float(global_discrepancy(x, 2)),
        lc=float(local_correlation(x)),
        edge_count=edge_count(*x.shape),
    )


# -- equipartitions ----------------------------------------------------------

@dataclass(frozen=True)
class Equipartition:
    """Pixel (flat index) -> part id; every part has the same size."""

    labels: np.ndarray
    part_size: int = field(init=False)
    part_count: int = field(init=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        _, counts = np.unique(labels, return_counts=True)
        if counts.size == 0 or np.any(counts != counts[0]):
            raise InvalidParameter("equipartition parts must all have the same size")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "part_size", int(counts[0]))
        object.__setattr__(self, "part_count", int(counts.size))

    @classmethod
    def random(cls, size: int, part_size: int, rng: np.random.Generator) -> "Equipartition":
        if part_size < 1 or size % part_size:
            raise InvalidParameter(f"{part_size} does not divide {size}")
        return cls(rng.permutation(np.arange(size) // part_size))


def equipartition_discrepancy(image, partition: Equipartition) -> float:
    """Mean GD_2 over the parts, each part treated as a bag of values."""
    flat = _pixels(image).ravel()
    if flat.size != partition.labels.size:
        raise InvalidParameter("partition does not cover the image")
    order = np.argsort(partition.labels, kind="stable")
    groups = flat[order].reshape(partition.part_count, partition.part_size)
    centred = groups - groups.mean(axis=1, keepdims=True)
    return float((2.0 * (centred * centred).mean(axis=1)).mean())


def domino_partitions(n: int) -> list[Equipartition]:
    """The four pairings of an n x n torus image into adjacent dominoes.

    Even row pairs, odd row pairs (wrapping), even column pairs, odd column
    pairs. Requires n even.
    """
    if n < 2 or n % 2:
        raise InvalidParameter("domino partitions need an even side")
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    parts = []
    # horizontal pairs: columns (2t, 2t+1) or (2t+1, 2t+2 mod n)
    parts.append(a * (n // 2) + b // 2)
    parts.append(a * (n // 2) + ((b - 1) % n) // 2)
    parts.append(b * (n // 2) + a // 2)
    parts.append(b * (n // 2) + ((a - 1) % n) // 2)
    return [Equipartition(p.ravel()) for p in parts]


# -- Monte-Carlo profile -----------------------------------------------------

STAT_NAMES = ("ld1", "ld2", "gd1", "gd2")


def image_stats(batch: np.ndarray) -> np.ndarray:
    """(T, 4) array of ld1, ld2, gd1, gd2 for a batch of images."""
    return np.stack(
        [
            local_discrepancy(batch, 1),
            local_discrepancy(batch, 2),
            global_discrepancy(batch, 1),
            global_discrepancy(batch, 2),
        ],
        axis=-1,
    )


@dataclass
class ScaleProfile:
    n: int
    k: int
    seed: int
    trials_per_scale: int
    env: dict
    mean: dict  # stat name -> list over scales
    se: dict

    def scale_values(self, stat: str) -> np.ndarray:
        return np.asarray(self.mean[stat], dtype=np.float64)

    def scale_se(self, stat: str) -> np.ndarray:
        return np.asarray(self.se[stat], dtype=np.float64)

    def aggregate(self, stat: str) -> float:
        """Unweighted mean over scales (scales are equiprobable)."""
        return float(np.mean(self.scale_values(stat)))

    def aggregate_se(self, stat: str) -> float:
        se = self.scale_se(stat)
        return float(math.sqrt(float(np.sum(se * se))) / self.k)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            "trials_per_scale": self.trials_per_scale,
            "env": self.env,
            "per_scale": {s: list(self.mean[s]) for s in STAT_NAMES},
            "per_scale_se": {s: list(self.se[s]) for s in STAT_NAMES},
            "aggregate": {s: self.aggregate(s) for s in STAT_NAMES},
            "aggregate_se": {s: self.aggregate_se(s) for s in STAT_NAMES},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleProfile":
        return cls(
            n=d["n"], k=d["k"], seed=d["seed"], trials_per_scale=d["trials_per_scale"], env=d["env"],
            mean={s: list(d["per_scale"][s]) for s in STAT_NAMES},
            se={s: list(d["per_scale_se"][s]) for s in STAT_NAMES},
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "ld1", "ld2", "gd2", "se_ld1", "se_ld2", "se_gd2", "trials"])
        for ell in range(self.k):
            row = [self.mean["ld1"][ell], self.mean["ld2"][ell], self.mean["gd2"][ell],
                   self.se["ld1"][ell], self.se["ld2"][ell], self.se["gd2"][ell]]
            w.writerow([ell, *(f"{v:.17g}" for v in row), self.trials_per_scale])
        return buf.getvalue()


def _chunk_stats(env: Environment, n: int, ell: int, seed: int, first: int, count: int) -> np.ndarray:
    ai = np.empty(count, dtype=np.int64)
    aj = np.empty(count, dtype=np.int64)
    for t in range(count):
        ai[t], aj[t] = draw_anchor(substream(seed, first + t), env.N)
    return image_stats(extract_batch(env, ell, ai, aj, n))


def sample_scale_stats(env: Environment, config: SamplerConfig, trials_per_scale: int,
                       workers: int = 1) -> np.ndarray:
    """Per-trial statistics, shape (k, trials_per_scale, 4).

    Trial t of scale ell uses substream (seed, ell * trials_per_scale + t),
    so the array is identical for any worker count.
    """
    config.validate(env)
    seed = normalize_seed(config.seed)
    k, n = config.num_scales_k, config.side_n
    jobs = []
    for ell in range(k):
        for start in range(0, trials_per_scale, CHUNK_TRIALS):
            count = min(CHUNK_TRIALS, trials_per_scale - start)
            jobs.append((ell, start, count))
    out = np.empty((k, trials_per_scale, len(STAT_NAMES)), dtype=np.float64)

    def run(job):
        ell, start, count = job
        return _chunk_stats(env, n, ell, seed, ell * trials_per_scale + start, count)

    if workers <= 1:
        results = map(run, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(run, jobs)
    for (ell, start, count), stats in zip(jobs, results):
        out[ell, start : start + count] = stats
    if workers > 1:
        pool.shutdown()
    return out


def estimate_profile(env: Environment, config: SamplerConfig, trials: int, workers: int = 1,
                     per_scale: bool = False) -> ScaleProfile:
    """Stratified Monte-Carlo estimate of the per-scale discrepancy profile.

    ``trials`` is the total budget split evenly over the k scales (rounded
    up), unless ``per_scale`` is set, in which case it is the count per scale.
    """
    if trials < 1:
        raise InvalidParameter("trials must be positive")
    k = config.num_scales_k
    tps = trials if per_scale else -(-trials // k)
    stats = sample_scale_stats(env, config, tps, workers)
    means = stats.mean(axis=1)
    if tps > 1:
        ses = stats.std(axis=1, ddof=1) / math.sqrt(tps)
    else:
        ses = np.zeros_like(means)
    return ScaleProfile(
        n=config.side_n, k=k, seed=normalize_seed(config.seed), trials_per_scale=tps, env=env.params(),
        mean={s: means[:, i].tolist() for i, s in enumerate(STAT_NAMES)},
        se={s: ses[:, i].tolist() for i, s in enumerate(STAT_NAMES)},
    )
