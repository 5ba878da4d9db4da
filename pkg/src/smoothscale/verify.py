"""Empirical checks of every claim, at desk scale.

Each ``claim_*`` function returns a :class:`ClaimResult` whose ``margin``
is nonnegative exactly when the claim passes. Reports contain no timing
information so that reruns with different worker counts can be compared
byte for byte.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds, domino
from .discrepancy import (
    Equipartition,
    domino_partitions,
    equipartition_discrepancy,
    estimate_profile,
    global_discrepancy,
    global_discrepancy_bruteforce,
    local_correlation,
    local_discrepancy,
)
from .env import (
    Environment,
    make_checkerboard,
    make_constant,
    make_iid_uniform,
    make_megacell,
    make_prefix_walk,
    make_row_gradient,
)
from .pgm import load_pgm, save_pgm
from .rng import substream
from .sampling import SamplerConfig, extract_batch, sample_image

SIGMAS = 3.0
EXACT_TOL = 1e-12
FLOAT_TOL = 1e-9

DEFAULT_N = 1 << 12


@dataclass
class ClaimResult:
    claim: str
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"claim": self.claim, "passed": self.passed, "margin": self.margin, "detail": self.detail}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.claim:<12} margin={self.margin:+.6g}"


def builtin_environments(seed: int = 2024, N: int = DEFAULT_N, with_pgm: bool = True) -> dict[str, Environment]:
    """The named environments the suite sweeps over (n=32, k=6 compatible)."""
    envs = {
        "iid": make_iid_uniform(N, seed),
        "checkerboard": make_checkerboard(N),
        "megacell": make_megacell(N, 6),
        "prefix": make_prefix_walk(1 << 17, 16),
        "gradient": make_row_gradient(N),
        "constant": make_constant(N, 0.5),
    }
    if with_pgm:
        envs["pgm-noise"] = pgm_noise_environment(seed + 1, N)
    return envs


def pgm_noise_environment(seed: int, N: int = DEFAULT_N) -> Environment:
    """iid noise written to a PGM file and read back."""
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "noise.pgm")
        save_pgm(make_iid_uniform(N, seed), path)
        env = load_pgm(path)
    env.meta = {"source": "iid-noise-pgm", "seed": seed}
    return env


# -- mean squared local discrepancy ---------------------------------------

def claim_ld2_bound(envs: dict[str, Environment], n: int = 32, k: int = 6, trials: int = 100_000,
               seed: int = 1, workers: int = 1) -> ClaimResult:
    detail = {}
    margins = []
    for name, env in envs.items():
        prof = estimate_profile(env, SamplerConfig(n, k, seed), trials, workers)
        ld2, se = prof.aggregate("ld2"), prof.aggregate_se("ld2")
        margin = 1.0 / k + SIGMAS * se - ld2
        margins.append(margin)
        detail[name] = {"ld2": ld2, "se": se, "bound": 1.0 / k, "margin": margin}
    margin = min(margins)
    return ClaimResult("ld2-bound", margin >= 0, margin, detail)


# -- checkerboard tightness -----------------------------------------------

def claim_checkerboard(n: int = 32, k: int = 6, trials: int = 100_000, seed: int = 1, workers: int = 1,
                N: int = DEFAULT_N) -> ClaimResult:
    prof = estimate_profile(make_checkerboard(N), SamplerConfig(n, k, seed), trials, workers)
    ld2 = prof.scale_values("ld2")
    expected = np.zeros(k)
    expected[0] = 1.0
    scale_err = float(np.max(np.abs(ld2 - expected)))
    se_max = float(np.max(prof.scale_se("ld2")))
    agg_err = abs(prof.aggregate("ld2") - 1.0 / k)
    margin = min(EXACT_TOL - scale_err, EXACT_TOL - agg_err, 0.0 - se_max)
    detail = {"per_scale_ld2": ld2.tolist(), "aggregate": prof.aggregate("ld2"), "target": 1.0 / k,
              "max_scale_se": se_max}
    return ClaimResult("checkerboard-tight", margin >= 0, margin, detail)


# -- mega-cell global discrepancy -----------------------------------------

def claim_megacell(n: int = 64, k: int = 8, trials: int = 10_000, seed: int = 1, workers: int = 1,
                N: int = 1 << 20) -> ClaimResult:
    env = make_megacell(N, k)
    prof = estimate_profile(env, SamplerConfig(n, k, seed), trials, workers)
    log_n = n.bit_length() - 1
    target = log_n / (2 * k) - 0.03
    gd2 = prof.aggregate("gd2")
    margin = gd2 - target
    detail = {"gd2": gd2, "se": prof.aggregate_se("gd2"), "threshold": target,
              "per_scale_gd2": prof.scale_values("gd2").tolist(), "N": N}
    return ClaimResult("megacell-gd2", margin >= 0, margin, detail)


# -- prefix-walk linear discrepancy ---------------------------------------

def claim_prefix_walk(n: int = 32, k: int = 16, trials: int = 10_000, seed: int = 1, workers: int = 1,
                N: int = 1 << 22) -> ClaimResult:
    env = make_prefix_walk(N, k)
    prof = estimate_profile(env, SamplerConfig(n, k, seed), trials, workers)
    ld1, se = prof.aggregate("ld1"), prof.aggregate_se("ld1")
    lower = bounds.prefix_walk_ld1_lower_bound(k)
    margin = ld1 - (lower - SIGMAS * se)
    detail = {"ld1": ld1, "se": se, "lower_bound": lower, "c_over_sqrt_k_with_c_1": 1.0 / math.sqrt(k),
              "extreme_fraction": env.extreme_fraction(), "N": N}
    return ClaimResult("prefix-ld1", margin >= 0, margin, detail)


# -- per-image inequalities -----------------------------------------------

def _random_images(count: int, seed: int) -> list[np.ndarray]:
    """Half iid-uniform images, half images sampled from environments."""
    rng = substream(seed, 0)
    envs = [make_iid_uniform(256, seed), make_checkerboard(256), make_megacell(256, 3),
            make_prefix_walk(512, 2), make_row_gradient(256)]
    images = []
    for t in range(count):
        n = int(2 ** rng.integers(1, 6))
        if t % 2 == 0:
            images.append(rng.random((n, n)))
        else:
            env = envs[int(rng.integers(0, len(envs)))]
            k = max(2, min(4, int(math.log2(env.N // n))))
            images.append(sample_image(env, SamplerConfig(n, k, seed), trial=t).pixels)
    return images


def claim_image_bounds(images: int = 1000, seed: int = 5) -> ClaimResult:
    rng = substream(seed, 1)
    worst = {"range": math.inf, "gd_vs_ld_linear": math.inf, "gd_vs_ld_quadratic": math.inf,
             "two-pixel": math.inf, "equipartition_random": math.inf, "equipartition_domino": math.inf}
    for x in _random_images(images, seed):
        n = x.shape[0]
        ld1, ld2 = float(local_discrepancy(x, 1)), float(local_discrepancy(x, 2))
        gd1, gd2 = float(global_discrepancy(x, 1)), float(global_discrepancy(x, 2))
        worst["range"] = min(worst["range"], ld1, ld2, gd1, gd2, 1 - ld1, 1 - ld2, 0.5 - gd1, 0.5 - gd2)
        worst["gd_vs_ld_linear"] = min(worst["gd_vs_ld_linear"], gd1 - (ld1 / 2 - 2.0 / n))
        worst["gd_vs_ld_quadratic"] = min(worst["gd_vs_ld_quadratic"], gd2 - (ld2 / 2 - 2.0 / n))
        for part in domino_partitions(n):
            worst["equipartition_domino"] = min(worst["equipartition_domino"], gd2 - equipartition_discrepancy(x, part) + EXACT_TOL)
        sizes = [d for d in range(1, n * n + 1) if (n * n) % d == 0]
        part = Equipartition.random(n * n, sizes[int(rng.integers(0, len(sizes)))], rng)
        worst["equipartition_random"] = min(worst["equipartition_random"], gd2 - equipartition_discrepancy(x, part) + EXACT_TOL)
        pair = rng.random((2, 1))
        for order in (1, 2):
            err = abs(float(local_discrepancy(pair, order)) - 2 * float(global_discrepancy(pair, order)))
            worst["two-pixel"] = min(worst["two-pixel"], EXACT_TOL - err)
    margin = min(worst.values())
    return ClaimResult("image-bounds", margin >= 0, margin, {"images": images, "worst_margins": worst})


def claim_two_pixel(samples: int = 1000, seed: int = 6) -> ClaimResult:
    rng = substream(seed, 0)
    worst = math.inf
    for _ in range(samples):
        pair = rng.random((2, 1)) if rng.random() < 0.5 else rng.random((1, 2))
        for order in (1, 2):
            err = abs(float(local_discrepancy(pair, order)) - 2 * float(global_discrepancy(pair, order)))
            worst = min(worst, EXACT_TOL - err)
    return ClaimResult("two-pixel", worst >= 0, worst, {"samples": samples})


# -- fast formulas against brute force ------------------------------------

def claim_oracle(images: int = 200, seed: int = 7) -> ClaimResult:
    rng = substream(seed, 0)
    worst_err = 0.0
    for _ in range(images):
        n, m = (int(v) for v in rng.integers(1, 33, size=2))
        x = rng.random((n, m))
        if rng.random() < 0.25:
            x = np.round(x * 4) / 4  # ties exercise the sorted identity
        for order in (1, 2):
            err = abs(float(global_discrepancy(x, order)) - global_discrepancy_bruteforce(x, order))
            worst_err = max(worst_err, err)
    margin = EXACT_TOL - worst_err
    return ClaimResult("oracle", margin >= 0, margin, {"images": images, "max_abs_error": worst_err})


# -- domino basis ---------------------------------------------------------

def random_window(k: int, rng: np.random.Generator) -> domino.Window:
    kind = rng.integers(0, 3)
    shape = (1 << (k - 1), 1 << k)
    if kind == 0:
        cells = rng.random(shape)
    elif kind == 1:
        cells = rng.integers(0, 2, size=shape).astype(float)
    else:
        cells = rng.beta(0.3, 0.3, size=shape)
    return domino.Window(cells)


def checkerboard_window(k: int) -> domino.Window:
    a, b = np.indices((1 << (k - 1), 1 << k))
    return domino.Window(((a + b) % 2).astype(float))


def claim_domino(k: int = 4, windows: int = 1000, seed: int = 8) -> ClaimResult:
    gram_err = 0.0
    for kk in range(1, min(k, 4) + 1):
        B = domino.build_basis(kk)
        gram_err = max(gram_err, float(np.max(np.abs(B @ B.T - np.eye(B.shape[0])))))
    rng = substream(seed, 0)
    min_slack = math.inf
    chain_margin = math.inf
    for _ in range(windows):
        w = random_window(k, rng)
        min_slack = min(min_slack, domino.parseval_slack(w))
        ld, mid, final = domino.bound_chain(w)
        chain_margin = min(chain_margin, mid - ld, final - mid)
    tight = domino.bound_chain(checkerboard_window(k))
    tight_err = max(abs(v - 1.0 / k) for v in tight)
    margin = min(EXACT_TOL - gram_err, min_slack + FLOAT_TOL, chain_margin + FLOAT_TOL, EXACT_TOL - tight_err)
    detail = {"gram_max_error": gram_err, "min_parseval_slack": min_slack, "min_chain_gap": chain_margin,
              "checkerboard_chain": list(tight), "windows": windows, "k": k,
              "constant_vector_norm_unit": float(np.linalg.norm(domino.build_basis(k)[0])) if k <= 6 else None,
              "constant_vector_norm_half": float(np.linalg.norm(domino.build_basis(k, True)[0])) if k <= 6 else None}
    return ClaimResult("domino", margin >= 0, margin, detail)


def claim_bessel(k: int = 4, windows: int = 1000, seed: int = 9) -> ClaimResult:
    rng = substream(seed, 0)
    min_slack = min(domino.parseval_slack(random_window(k, rng)) for _ in range(windows))
    margin = min_slack + FLOAT_TOL
    return ClaimResult("bessel", margin >= 0, margin, {"k": k, "windows": windows, "min_slack": min_slack})


# -- decay bound ----------------------------------------------------------

ALPHA_GRID = (1.1, 1.5, 2.0, 3.0)
LOG_N_GRID = (8, 10, 16, 20)


def claim_decay(samples: int = 10_000, seed: int = 10, climbs: int = 8) -> ClaimResult:
    max_residual = 0.0
    min_geo_margin = math.inf
    for a in ALPHA_GRID:
        for L in LOG_N_GRID:
            sol = bounds.solve_decay(a, L)
            max_residual = max(max_residual, abs(sol.residual))
            rep = bounds.check_feasible(bounds.geometric_seed(sol.p), a, L)
            min_geo_margin = min(min_geo_margin, rep.window_margin, rep.sum_margin + EXACT_TOL,
                                 rep.nonnegative_margin)
    asym_err = abs(bounds.asymptotic_bound(1.0) - (1.0 + math.sqrt(2.0)))
    probes = [bounds.optimality_probe(a, L, samples, seed=seed, climbs=climbs) for a, L in ((1.5, 10), (1.1, 8), (2.0, 16))]
    probe_margin = min(p.bound + FLOAT_TOL - p.max_objective for p in probes)
    margin = min(1e-10 - max_residual, FLOAT_TOL - asym_err, min_geo_margin + 1e-10, probe_margin)
    detail = {"max_residual": max_residual, "asymptotic_error_alpha1": asym_err,
              "min_geometric_constraint3_margin": min_geo_margin,
              "probes": [{"alpha": p.alpha, "log_n": p.log_n, "bound": p.bound, "max_objective": p.max_objective,
                          "best_climb": max(p.climb_objectives) if p.climb_objectives else None} for p in probes]}
    return ClaimResult("decay", margin >= 0, margin, detail)


# -- per-scale margins ----------------------------------------------------

def claim_scale_margins(envs: dict[str, Environment], n: int = 32, k: int = 6, trials_per_scale: int = 10_000,
                 seed: int = 3, workers: int = 1) -> ClaimResult:
    log_n = n.bit_length() - 1
    detail = {}
    worst = math.inf
    for name, env in envs.items():
        prof = estimate_profile(env, SamplerConfig(n, k, seed), trials_per_scale, workers, per_scale=True)
        rep = bounds.scale_margin_check(prof, log_n)
        # margin in the criterion's units: m + 3*sigma >= 0
        env_margin = min(m + SIGMAS * s for m, s in zip(rep.margins, rep.sigmas))
        worst = min(worst, env_margin)
        detail[name] = {"margins": rep.margins, "sigmas": rep.sigmas, "passed": rep.passed}
    return ClaimResult("scale-margins", worst >= 0, worst, detail)


# -- iid baseline ---------------------------------------------------------

def claim_iid(n: int = 64, images: int = 100, seed: int = 11, N: int = DEFAULT_N) -> ClaimResult:
    env = make_iid_uniform(N, seed)
    rng = substream(seed, 1)
    anchors = rng.integers(0, N, size=(images, 2))
    batch = extract_batch(env, 0, anchors[:, 0], anchors[:, 1], n)
    ld1 = float(np.mean(local_discrepancy(batch, 1)))
    lcs = np.asarray(local_correlation(batch))
    lc = float(lcs.mean())
    margin = min(0.01 - abs(ld1 - 1.0 / 3.0), 0.1 - abs(lc - 1.0))
    detail = {"ld1_mean": ld1, "lc_mean": lc, "lc_min": float(lcs.min()), "lc_max": float(lcs.max()),
              "images": images, "n": n}
    return ClaimResult("iid", margin >= 0, margin, detail)


# -- suite -----------------------------------------------------------------

CLAIMS = ("ld2-bound", "checkerboard-tight", "megacell-gd2", "prefix-ld1", "image-bounds", "two-pixel", "oracle", "domino", "bessel", "decay",
          "scale-margins", "iid")


def run_claim(name: str, workers: int = 1, envs: dict | None = None, **overrides) -> ClaimResult:
    if name in ("ld2-bound", "scale-margins"):
        if envs is None:
            envs = builtin_environments()
        if name == "ld2-bound":
            envs = {k: v for k, v in envs.items() if k != "constant"}
            return claim_ld2_bound(envs, workers=workers, **overrides)
        return claim_scale_margins(envs, workers=workers, **overrides)
    table = {
        "checkerboard-tight": lambda: claim_checkerboard(workers=workers, **overrides),
        "megacell-gd2": lambda: claim_megacell(workers=workers, **overrides),
        "prefix-ld1": lambda: claim_prefix_walk(workers=workers, **overrides),
        "image-bounds": lambda: claim_image_bounds(**overrides),
        "two-pixel": lambda: claim_two_pixel(**overrides),
        "oracle": lambda: claim_oracle(**overrides),
        "domino": lambda: claim_domino(**overrides),
        "bessel": lambda: claim_bessel(**overrides),
        "decay": lambda: claim_decay(**overrides),
        "iid": lambda: claim_iid(**overrides),
    }
    if name not in table:
        raise KeyError(f"unknown claim {name!r}; choose from {', '.join(CLAIMS)}")
    return table[name]()


def run_suite(workers: int = 1, claims=CLAIMS, envs: dict | None = None, log=None) -> list[ClaimResult]:
    if envs is None and any(c in ("ld2-bound", "scale-margins") for c in claims):
        envs = builtin_environments()
    results = []
    for name in claims:
        start = time.perf_counter()
        res = run_claim(name, workers=workers, envs=envs)
        if log is not None:
            log(f"{res.line()}  ({time.perf_counter() - start:.1f}s)")
        results.append(res)
    return results


def suite_json(results: list[ClaimResult]) -> str:
    return json.dumps([r.to_dict() for r in results], sort_keys=True, indent=2)


def claim_determinism(workers_a: int = 1, workers_b: int = 8, claims=CLAIMS, log=None) -> ClaimResult:
    envs = builtin_environments()
    a = suite_json(run_suite(workers_a, claims, envs, log))
    b = suite_json(run_suite(workers_b, claims, envs, log))
    same = a.encode() == b.encode()
    return ClaimResult("determinism", same, 0.0 if same else -1.0,
                       {"workers": [workers_a, workers_b], "bytes": len(a)})
