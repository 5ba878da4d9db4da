import csv
import io
import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smoothscale.discrepancy import (
    STAT_NAMES,
    Equipartition,
    ScaleProfile,
    domino_partitions,
    edge_count,
    equipartition_discrepancy,
    estimate_profile,
    global_discrepancy,
    global_discrepancy_bruteforce,
    local_correlation,
    local_discrepancy,
    local_discrepancy_bruteforce,
    report,
    sample_scale_stats,
)
from smoothscale.env import (
    make_checkerboard,
    make_constant,
    make_iid_uniform,
    make_megacell,
    make_prefix_walk,
    make_row_gradient,
)
from smoothscale.errors import InvalidParameter, InvariantViolation, UndefinedStatistic
from smoothscale.sampling import SamplerConfig, extract_image

unit = st.floats(0.0, 1.0, allow_nan=False)


def images(min_side=1, max_side=12, square=False):
    if square:
        shapes = st.integers(min_side, max_side).map(lambda n: (n, n))
    else:
        shapes = st.tuples(st.integers(min_side, max_side), st.integers(min_side, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=unit))


def gradient_image(n):
    return np.repeat((np.arange(n) / n)[:, None], n, axis=1)


# -- examples -----------------------------------------------------------------

def test_two_pixel_image():
    x = np.array([[0.0], [1.0]])
    assert local_discrepancy(x, 1) == 1.0
    assert local_discrepancy(x, 2) == 1.0
    assert global_discrepancy(x, 2) == 0.5
    assert global_discrepancy(x, 1) == 0.5


def test_checkerboard_scale0_image():
    x = extract_image(make_checkerboard(64), 0, (5, 9), 8).pixels
    assert local_discrepancy(x, 1) == local_discrepancy(x, 2) == 1.0
    assert global_discrepancy(x, 1) == global_discrepancy(x, 2) == 0.5


@pytest.mark.parametrize("n", [2, 8, 64])
def test_gradient_closed_forms(n):
    x = gradient_image(n)
    assert local_discrepancy(x, 2) == pytest.approx(1 / (2 * n * n), abs=1e-15)
    assert global_discrepancy(x, 2) == pytest.approx((n * n - 1) / (6 * n * n), abs=1e-15)
    assert local_correlation(x) == pytest.approx((n * n - 1) / 3, rel=1e-12)
    if n <= 8:
        assert local_discrepancy_bruteforce(x, 2) == pytest.approx(float(local_discrepancy(x, 2)), abs=1e-15)


def test_gradient_image_from_environment():
    n = 64
    env = make_row_gradient(n)
    x = extract_image(env, 0, (0, 0), n).pixels
    assert np.array_equal(x, gradient_image(n))
    assert local_correlation(x) == pytest.approx(1365.0, rel=1e-12)


def test_constant_image_lc_is_one():
    assert local_correlation(np.full((8, 8), 0.3)) == 1.0
    assert global_discrepancy(np.full((8, 8), 0.1), 2) == 0.0


def test_report_and_edge_count():
    rep = report(np.array([[0.0, 1.0]]))
    assert rep.to_dict() == {"ld1": 1.0, "ld2": 1.0, "gd1": 0.5, "gd2": 0.5, "lc": 0.5, "edge_count": 1}
    assert edge_count(4, 4) == 24
    assert edge_count(3, 5) == 22


def test_errors():
    with pytest.raises(UndefinedStatistic):
        local_discrepancy(np.zeros((1, 1)))
    with pytest.raises(InvalidParameter):
        local_discrepancy(np.zeros((2, 2)), 3)
    with pytest.raises(InvalidParameter):
        global_discrepancy(np.zeros(4))


def test_zero_local_with_nonzero_global_is_a_bug(monkeypatch):
    import smoothscale.discrepancy as d

    monkeypatch.setattr(d, "global_discrepancy", lambda image, order=2: np.float64(0.25))
    with pytest.raises(InvariantViolation):
        d.local_correlation(np.zeros((2, 2)))


# -- oracles ------------------------------------------------------------------

def test_fast_formulas_match_bruteforce_with_ties():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n, m = rng.integers(1, 33, size=2)
        x = rng.random((n, m))
        if rng.random() < 0.3:
            x = np.round(x * 3) / 3
        for order in (1, 2):
            assert abs(float(global_discrepancy(x, order)) - global_discrepancy_bruteforce(x, order)) <= 1e-12
            if n * m > 1:
                assert abs(float(local_discrepancy(x, order)) - local_discrepancy_bruteforce(x, order)) <= 1e-12


def test_batched_matches_single():
    rng = np.random.default_rng(1)
    batch = rng.random((3, 5, 6, 6))
    for order in (1, 2):
        got = local_discrepancy(batch, order)
        assert got.shape == (3, 5)
        assert got[2, 4] == pytest.approx(float(local_discrepancy(batch[2, 4], order)), abs=1e-15)
        g = global_discrepancy(batch, order)
        assert g[1, 3] == pytest.approx(float(global_discrepancy(batch[1, 3], order)), abs=1e-15)


# -- properties ---------------------------------------------------------------

@given(images())
def test_range(x):
    assume(x.size > 1)
    for order in (1, 2):
        assert -1e-15 <= local_discrepancy(x, order) <= 1 + 1e-15
        assert -1e-15 <= global_discrepancy(x, order) <= 0.5 + 1e-15


@given(images(min_side=2, square=True))
def test_global_at_least_half_local(x):
    n = x.shape[0]
    for order in (1, 2):
        assert global_discrepancy(x, order) >= local_discrepancy(x, order) / 2 - 2.0 / n


@given(st.lists(unit, min_size=2, max_size=2), st.booleans())
def test_two_pixel_local_is_twice_global(values, vertical):
    x = np.array(values).reshape((2, 1) if vertical else (1, 2))
    for order in (1, 2):
        assert abs(local_discrepancy(x, order) - 2 * global_discrepancy(x, order)) <= 1e-12


@given(images(max_side=10), st.integers(0, 2**32 - 1), st.data())
def test_equipartition_never_exceeds_image(x, seed, data):
    M = x.size
    sizes = [d for d in range(1, M + 1) if M % d == 0]
    d = data.draw(st.sampled_from(sizes))
    part = Equipartition.random(M, d, np.random.default_rng(seed))
    assert equipartition_discrepancy(x, part) <= global_discrepancy(x, 2) + 1e-12


@given(images(min_side=2, max_side=8, square=True).filter(lambda a: a.shape[0] % 2 == 0))
def test_domino_partitions_never_exceed_image(x):
    g = global_discrepancy(x, 2)
    for part in domino_partitions(x.shape[0]):
        assert part.part_size == 2
        assert equipartition_discrepancy(x, part) <= g + 1e-12


@given(images(min_side=2, max_side=10), st.floats(0.05, 1.0), st.booleans(), st.floats(0.0, 1.0))
def test_local_correlation_affine_invariance(x, a, flip, shift):
    assume(float(local_discrepancy(x, 2)) > 1e-6)
    scale = -a if flip else a
    y = scale * x
    lo, hi = y.min(), y.max()
    room = 1.0 - (hi - lo)
    y = y - lo + shift * room
    assert local_correlation(y) == pytest.approx(local_correlation(x), rel=1e-9, abs=1e-9)


@given(images(min_side=2, max_side=10, square=True))
def test_local_lower_bound_advisory(x):
    n = x.shape[0]
    gap = float(local_discrepancy(x, 2)) - float(global_discrepancy(x, 2)) / (8 * n * n)
    if gap < -1e-12:
        warnings.warn(f"LD2 >= GD2/(8n^2) envelope missed by {-gap:.3g} at n={n}")


@given(images(min_side=1, max_side=12))
def test_convexity_bridge(x):
    assume(x.size > 1)
    assert local_discrepancy(x, 1) <= math.sqrt(local_discrepancy(x, 2)) + 1e-12


def test_row_gradient_separation():
    for n in (8, 32, 128):
        x = gradient_image(n)
        assert global_discrepancy(x, 2) >= 0.16
        assert local_discrepancy(x, 2) * n * n == pytest.approx(0.5)


def test_equipartition_examples():
    rng = np.random.default_rng(3)
    x = rng.random((4, 4))
    assert equipartition_discrepancy(x, Equipartition(np.arange(16))) == 0.0
    assert equipartition_discrepancy(x, Equipartition(np.zeros(16))) == pytest.approx(float(global_discrepancy(x, 2)))
    with pytest.raises(InvalidParameter):
        Equipartition(np.array([0, 0, 1]))
    with pytest.raises(InvalidParameter):
        Equipartition.random(16, 3, rng)
    with pytest.raises(InvalidParameter):
        domino_partitions(5)


def test_domino_partitions_cover_adjacent_pairs():
    n = 4
    for part in domino_partitions(n):
        for label in np.unique(part.labels):
            a, b = np.flatnonzero(part.labels == label)
            (ra, ca), (rb, cb) = divmod(a, n), divmod(b, n)
            torus_dist = min(abs(ra - rb), n - abs(ra - rb)) + min(abs(ca - cb), n - abs(ca - cb))
            assert torus_dist == 1


# -- profiles -----------------------------------------------------------------

def test_checkerboard_profile_exact():
    prof = estimate_profile(make_checkerboard(1 << 12), SamplerConfig(32, 6, 1), 6000)
    assert prof.scale_values("ld2").tolist() == [1.0, 0, 0, 0, 0, 0]
    assert prof.scale_se("ld2").tolist() == [0.0] * 6
    assert prof.aggregate("ld2") == pytest.approx(1 / 6, abs=1e-15)


def test_constant_profile_zero():
    prof = estimate_profile(make_constant(1 << 10, 0.4), SamplerConfig(16, 4, 2), 400)
    for s in STAT_NAMES:
        assert prof.scale_values(s).tolist() == [0.0] * 4


@pytest.mark.parametrize("env", [make_iid_uniform(1 << 10, 5), make_megacell(1 << 10, 4), make_row_gradient(1 << 10),
                                 make_prefix_walk(1 << 17, 16)], ids=["iid", "megacell", "gradient", "prefix"])
def test_profile_under_one_over_k(env):
    prof = estimate_profile(env, SamplerConfig(16, 6, 3), 3000)
    assert prof.aggregate("ld2") <= 1 / 6 + 3 * prof.aggregate_se("ld2")


def test_frozen_profile():
    prof = estimate_profile(make_iid_uniform(256, 1), SamplerConfig(8, 3, 1), 300)
    assert prof.trials_per_scale == 100
    assert prof.aggregate("ld2") == pytest.approx(0.07200361369864071, abs=1e-12)
    assert prof.aggregate("gd1") == pytest.approx(0.18911291862554833, abs=1e-12)


def test_profile_independent_of_workers():
    env = make_iid_uniform(512, 6)
    cfg = SamplerConfig(16, 4, 9)
    a = sample_scale_stats(env, cfg, 5000, workers=1)
    b = sample_scale_stats(env, cfg, 5000, workers=8)
    assert np.array_equal(a, b)
    assert estimate_profile(env, cfg, 9000, 1).to_json() == estimate_profile(env, cfg, 9000, 4).to_json()


def test_profile_json_and_csv():
    prof = estimate_profile(make_checkerboard(256), SamplerConfig(8, 3, 0), 30)
    d = json.loads(prof.to_json())
    assert d["aggregate"]["ld2"] == pytest.approx(1 / 3)
    assert ScaleProfile.from_dict(d).to_json() == prof.to_json()
    rows = list(csv.reader(io.StringIO(prof.to_csv())))
    assert rows[0] == ["scale", "ld1", "ld2", "gd2", "se_ld1", "se_ld2", "se_gd2", "trials"]
    assert rows[1] == ["0", "1", "1", "0.5", "0", "0", "0", "10"]
    assert len(rows) == 4


def test_seventeen_digit_csv_round_trips():
    prof = estimate_profile(make_iid_uniform(256, 2), SamplerConfig(8, 3, 0), 30)
    rows = list(csv.reader(io.StringIO(prof.to_csv())))
    assert float(rows[2][2]) == prof.scale_values("ld2")[1]


def test_per_scale_budget():
    cfg = SamplerConfig(8, 3, 0)
    env = make_checkerboard(256)
    assert estimate_profile(env, cfg, 10).trials_per_scale == 4
    assert estimate_profile(env, cfg, 10, per_scale=True).trials_per_scale == 10
    with pytest.raises(InvalidParameter):
        estimate_profile(env, cfg, 0)
