"""Decay-rate bound on linear local discrepancy.

The program: maximize sum_i sqrt(x_i) subject to
  (1) x_i >= 0
  (2) sum_i x_i <= 1
  (3) 2*alpha*x_i >= x_i + x_{i+1} + ... + x_{i+L-1}   (L = log2 n)
The geometric point x_i = (1-p) p^i, with p solving
(1 - p^L) / (1 - p) = 2*alpha, attains (1 + sqrt p) / sqrt(1 - p).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidParameter, NumericError
from .rng import substream

MC_SIGMAS = 3.0

MAX_BISECTION_STEPS = 200


def window_sum_ratio(p: float, log_n: int) -> float:
    """(1 - p^L) / (1 - p), evaluated as the finite geometric sum."""
    return math.fsum(p ** j for j in range(log_n))


def bound_value(p: float) -> float:
    return (1.0 + math.sqrt(p)) / math.sqrt(1.0 - p)


def asymptotic_bound(alpha: float) -> float:
    return math.sqrt(2 * alpha) + math.sqrt(2 * alpha - 1)


@dataclass(frozen=True)
class DecaySolution:
    alpha: float
    log_n: int
    p: float
    bound: float
    asymptotic_bound: float
    residual: float
    iterations: int

    def to_dict(self) -> dict:
        return asdict(self)


def solve_decay(alpha: float, log_n: int, tol: float = 1e-12) -> DecaySolution:
    alpha = float(alpha)
    if int(log_n) != log_n:
        raise InvalidParameter(f"log n must be an integer, got {log_n}")
    log_n = int(log_n)
    if not alpha > 1.0:
        raise InvalidParameter(f"requires alpha > 1, got alpha={alpha}")
    if not log_n > 2 * alpha:
        raise InvalidParameter(
            f"requires log n > 2*alpha (alpha < log n / 2) for p to exist; got log n={log_n}, alpha={alpha}"
        )
    target = 2.0 * alpha
    lo, hi = 0.0, 1.0
    steps = 0
    # bisect to full double precision; the map is increasing on (0, 1)
    while steps < MAX_BISECTION_STEPS:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if window_sum_ratio(mid, log_n) < target:
            lo = mid
        else:
            hi = mid
        steps += 1
    if hi - lo > tol:
        raise NumericError(f"bisection did not converge: width {hi - lo}")
    p = lo if abs(window_sum_ratio(lo, log_n) - target) <= abs(window_sum_ratio(hi, log_n) - target) else hi
    return DecaySolution(
        alpha=alpha,
        log_n=log_n,
        p=p,
        bound=bound_value(p),
        asymptotic_bound=asymptotic_bound(alpha),
        residual=window_sum_ratio(p, log_n) - target,
        iterations=steps,
    )


def geometric_point(p: float, length: int) -> np.ndarray:
    """x_i = (1-p) p^i for i < length. The untruncated tail mass is p^length."""
    if not 0.0 < p < 1.0:
        raise InvalidParameter(f"p must lie in (0, 1), got {p}")
    return (1.0 - p) * p ** np.arange(length, dtype=np.float64)


def geometric_seed(p: float, tail: float = 1e-13) -> np.ndarray:
    """Geometric point long enough that the dropped tail is negligible, scaled to mass 1.

    Truncation only shrinks window sums, so constraint 3 keeps holding.
    """
    length = max(1, math.ceil(2.0 * math.log(tail) / math.log(p)))
    x = geometric_point(p, length)
    return x / math.fsum(x)


def geometric_objective(p: float) -> float:
    """Objective of the untruncated geometric point."""
    return math.sqrt(1.0 - p) / (1.0 - math.sqrt(p))


def objective(point) -> float:
    x = np.asarray(point, dtype=np.float64)
    if np.any(x < 0):
        raise InvalidParameter("program points must be nonnegative")
    return float(np.sqrt(x).sum())


def window_margins(x: np.ndarray, alpha: float, log_n: int) -> np.ndarray:
    """2*alpha*x_i - sum_{j=i}^{i+L-1} x_j along the last axis (zeros past the end)."""
    x = np.asarray(x, dtype=np.float64)
    M = x.shape[-1]
    cs = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    upper = np.minimum(np.arange(M) + log_n, M)
    return 2.0 * alpha * x - (cs[..., upper] - cs[..., :M])


@dataclass
class FeasibilityReport:
    nonnegative_margin: float
    sum_margin: float
    window_margin: float
    worst_window_index: int
    window_margins: list = field(repr=False)

    def feasible(self, tol: float = 1e-10) -> bool:
        return min(self.nonnegative_margin, self.sum_margin, self.window_margin) >= -tol

    def to_dict(self) -> dict:
        return {
            "nonnegative_margin": self.nonnegative_margin,
            "sum_margin": self.sum_margin,
            "window_margin": self.window_margin,
            "worst_window_index": self.worst_window_index,
            "feasible": self.feasible(),
        }


def check_feasible(point, alpha: float, log_n: int) -> FeasibilityReport:
    x = np.asarray(point, dtype=np.float64)
    if x.size == 0:
        return FeasibilityReport(0.0, 1.0, 0.0, -1, [])
    margins = window_margins(x, alpha, log_n)
    worst = int(np.argmin(margins))
    return FeasibilityReport(
        nonnegative_margin=float(x.min()),
        sum_margin=1.0 - math.fsum(x),
        window_margin=float(margins[worst]),
        worst_window_index=worst,
        window_margins=margins.tolist(),
    )


# -- randomized optimality evidence ---------------------------------------

def repair(x: np.ndarray, alpha: float, log_n: int, total: float = 1.0) -> np.ndarray:
    """Smallest upward repair making constraint 3 hold, then rescale to ``total``.

    Constraint 3 is scale invariant, so scaling alone cannot fix it. Walking
    backwards, x_i is raised to tail_i / (2*alpha - 1) where tail_i sums the
    next L-1 entries; raising x_i only touches constraints of smaller index,
    which are handled afterwards. Works on a batch along the last axis.
    """
    x = np.array(x, dtype=np.float64)
    M = x.shape[-1]
    tail = np.zeros(x.shape[:-1])
    slack = 2.0 * alpha - 1.0
    for i in range(M - 1, -1, -1):
        x[..., i] = np.maximum(x[..., i], tail / slack)
        tail = tail + x[..., i]
        if i + log_n - 1 < M:
            tail = tail - x[..., i + log_n - 1]
    s = x.sum(axis=-1, keepdims=True)
    return np.where(s > 0, x * (total / np.where(s > 0, s, 1.0)), x)


def random_feasible_points(count: int, alpha: float, log_n: int, rng: np.random.Generator) -> np.ndarray:
    """Random exponential sequences of length 4L, repaired and rescaled.

    Half are rescaled to total mass 1 (constraint 2 tight), the rest to a
    uniform random mass in (0, 1].
    """
    M = 4 * log_n
    raw = rng.exponential(size=(count, M))
    # vary how quickly mass decays so some points sit near the boundary
    raw *= np.exp(-rng.uniform(0.0, 1.0, size=(count, 1)) * np.arange(M))
    totals = np.where(np.arange(count) % 2 == 0, 1.0, rng.uniform(0.0, 1.0, size=count))
    return repair(raw, alpha, log_n, 1.0) * totals[:, None]


def hill_climb(x: np.ndarray, alpha: float, log_n: int, rng: np.random.Generator, steps: int = 1500) -> np.ndarray:
    """Local search by mass shifts between indices at most L apart.

    A move takes a random fraction of x_j and adds it to x_{j+d}; the result
    is pulled back onto the feasible set with ``repair`` at total mass 1 and
    kept only if the objective improves.
    """
    x = repair(np.asarray(x, dtype=np.float64), alpha, log_n, 1.0)
    M = x.size
    best = np.sqrt(x).sum()
    for _ in range(steps):
        j = int(rng.integers(0, M))
        t = j + int(rng.integers(1, log_n + 1)) * (1 if rng.random() < 0.5 else -1)
        if not 0 <= t < M or x[j] <= 0.0:
            continue
        delta = 0.5 * x[j] * rng.random()
        trial = x.copy()
        trial[j] -= delta
        trial[t] += delta
        trial = repair(trial, alpha, log_n, 1.0)
        value = np.sqrt(trial).sum()
        if value > best:
            x, best = trial, value
    return x


@dataclass
class ProbeResult:
    alpha: float
    log_n: int
    bound: float
    samples: int
    max_objective: float
    geometric_objective: float
    climb_objectives: list

    @property
    def exceeded(self) -> bool:
        return self.max_objective > self.bound + 1e-9

    def to_dict(self) -> dict:
        d = asdict(self)
        d["exceeded"] = self.exceeded
        return d


def optimality_probe(alpha: float, log_n: int, samples: int, seed: int = 0, climbs: int = 8,
                     climb_steps: int = 1500) -> ProbeResult:
    """Largest objective found over random feasible points and hill climbs."""
    if samples < 1:
        raise InvalidParameter("samples must be positive")
    sol = solve_decay(alpha, log_n)
    rng = substream(seed, 0)
    points = random_feasible_points(samples, alpha, log_n, rng)
    geo = geometric_seed(sol.p)
    values = np.sqrt(points).sum(axis=1)
    best = max(float(values.max()), objective(geo))
    climbed = []
    for c in range(climbs):
        crng = substream(seed, c + 1)
        start = points[int(crng.integers(0, samples))]
        end = hill_climb(start, alpha, log_n, crng, climb_steps)
        climbed.append(objective(end))
    if climbed:
        best = max(best, max(climbed))
    return ProbeResult(
        alpha=float(alpha), log_n=int(log_n), bound=sol.bound, samples=samples, max_objective=best,
        geometric_objective=objective(geo), climb_objectives=climbed,
    )


# -- checks against Monte-Carlo profiles ------------------------------------

@dataclass
class ScaleMarginReport:
    log_n: int
    margins: list
    sigmas: list

    @property
    def passed(self) -> bool:
        return all(m >= -MC_SIGMAS * s for m, s in zip(self.margins, self.sigmas))

    @property
    def worst_normalized(self) -> float:
        """Smallest margin in units of its standard error (inf when exact)."""
        worst = math.inf
        for m, s in zip(self.margins, self.sigmas):
            if s > 0:
                worst = min(worst, m / s)
            elif m < 0:
                return -math.inf
        return worst

    def to_dict(self) -> dict:
        return {"log_n": self.log_n, "margins": self.margins, "sigmas": self.sigmas, "passed": self.passed}


def scale_margin_check(profile, log_n: int) -> ScaleMarginReport:
    """margin(l) = 2 GD_2(l) - sum_{l'=l}^{l+L-1} LD_2(l'), with LD_2 = 0 past k-1."""
    gd2, gd2_se = profile.scale_values("gd2"), profile.scale_se("gd2")
    ld2, ld2_se = profile.scale_values("ld2"), profile.scale_se("ld2")
    k = len(gd2)
    margins, sigmas = [], []
    for ell in range(k):
        hi = min(k, ell + log_n)
        margins.append(float(2.0 * gd2[ell] - ld2[ell:hi].sum()))
        sigmas.append(float(math.sqrt(4.0 * gd2_se[ell] ** 2 + float((ld2_se[ell:hi] ** 2).sum()))))
    return ScaleMarginReport(log_n=log_n, margins=margins, sigmas=sigmas)


@dataclass
class DecayBoundReport:
    alpha: float
    log_n: int
    empirical_alpha: float
    premise_holds: bool
    premise_margins: list
    ld1_sum: float
    ld1_sum_se: float
    ld1_aggregate: float
    bound: float | None
    asymptotic_bound: float | None
    conclusion_holds: bool | None

    def to_dict(self) -> dict:
        return asdict(self)


def decay_bound_check(profile, alpha: float, log_n: int) -> DecayBoundReport:
    """Premise GD_2(l) <= alpha LD_2(l) per scale, then sum_l LD_1(l) <= bound.

    The premise is judged within MC_SIGMAS standard errors. Scales with
    LD_2(l) = 0 are skipped when computing the empirical alpha.
    """
    gd2, gd2_se = profile.scale_values("gd2"), profile.scale_se("gd2")
    ld2, ld2_se = profile.scale_values("ld2"), profile.scale_se("ld2")
    ld1, ld1_se = profile.scale_values("ld1"), profile.scale_se("ld1")
    ratios = [g / l for g, l in zip(gd2, ld2) if l > 0]
    empirical = max(ratios) if ratios else 1.0
    margins = (alpha * ld2 - gd2).tolist()
    sig = np.sqrt(gd2_se ** 2 + (alpha * ld2_se) ** 2)
    premise = bool(np.all(alpha * ld2 - gd2 >= -MC_SIGMAS * sig))
    total = float(ld1.sum())
    total_se = float(math.sqrt(float((ld1_se ** 2).sum())))
    bound = asym = None
    holds = None
    if 1.0 < alpha < log_n / 2.0:
        sol = solve_decay(alpha, log_n)
        bound, asym = sol.bound, sol.asymptotic_bound
        if premise:
            holds = total <= bound + MC_SIGMAS * total_se
    return DecayBoundReport(
        alpha=float(alpha), log_n=int(log_n), empirical_alpha=float(empirical), premise_holds=premise,
        premise_margins=margins, ld1_sum=total, ld1_sum_se=total_se, ld1_aggregate=total / len(ld1),
        bound=bound, asymptotic_bound=asym, conclusion_holds=holds,
    )


def prefix_walk_ld1_lower_bound(k: int) -> float:
    """3 / (32 sqrt(log2 k)), the explicit constant for the prefix-walk construction."""
    return 3.0 / (32.0 * math.sqrt(math.log2(k)))
