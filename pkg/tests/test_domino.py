import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smoothscale import domino
from smoothscale.domino import (
    Window,
    build_basis,
    constant_value,
    parseval_slack,
    parseval_slack_normalized,
    pieces,
    bound_chain,
    transform,
    window_ld,
)
from smoothscale.env import make_checkerboard, make_megacell
from smoothscale.errors import InvalidParameter, InvariantViolation, ResourceLimit
from smoothscale.sampling import extract_batch

R2 = 1 / math.sqrt(2)


def windows(k):
    return arrays(np.float64, (1 << (k - 1), 1 << k), elements=st.floats(0.0, 1.0)).map(Window)


def checkerboard_window(k):
    a, b = np.indices((1 << (k - 1), 1 << k))
    return Window(((a + b) % 2).astype(float))


def test_k1_basis():
    np.testing.assert_allclose(build_basis(1), [[R2, R2], [R2, -R2]], atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_gram_is_identity(k):
    B = build_basis(k)
    assert B.shape[0] == 1 + sum(4 ** (k - 1 - ell) for ell in range(k))
    assert np.max(np.abs(B @ B.T - np.eye(B.shape[0]))) <= 1e-12


def test_k2_has_six_vectors():
    assert build_basis(2).shape == (6, 8)


def test_constant_vector_conventions():
    for k in (2, 4):
        assert np.linalg.norm(build_basis(k)[0]) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(build_basis(k, half_norm=True)[0]) == pytest.approx(0.5, abs=1e-12)
    assert constant_value(3) == pytest.approx(math.sqrt(2) / 8)


def test_pieces_tile_each_scale():
    k = 4
    for ell in range(k):
        side = 1 << ell
        cover = np.zeros((8, 16), dtype=int)
        for p in pieces(k, ell):
            cover[p.row : p.row + side, p.col : p.col + 2 * side] += 1
        assert np.all(cover == 1)
        assert len(pieces(k, ell)) == 4 ** (k - 1 - ell)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_transform_matches_inner_products(k):
    rng = np.random.default_rng(k)
    w = Window(rng.random((1 << (k - 1), 1 << k)))
    coeffs = transform(w)
    explicit = build_basis(k) @ w.cells.ravel()
    flat = [coeffs.c0] + [c for ell in range(k) for c in coeffs.by_scale[ell].ravel()]
    assert np.max(np.abs(np.array(flat) - explicit)) <= 1e-9


def test_transform_matches_block_averages_k3():
    rng = np.random.default_rng(30)
    w = Window(rng.random((4, 8)))
    coeffs = transform(w)
    for ell in range(3):
        side = 1 << ell
        for p in pieces(3, ell):
            left = w.cells[p.row : p.row + side, p.col : p.col + side].mean()
            right = w.cells[p.row : p.row + side, p.col + side : p.col + 2 * side].mean()
            got = coeffs.by_scale[ell][p.row // side, p.col // (2 * side)]
            assert got == pytest.approx(side * (left - right) / math.sqrt(2), abs=1e-12)


def test_constant_window_coefficients():
    k, v = 3, 0.6
    coeffs = transform(Window(np.full((4, 8), v)))
    assert coeffs.c0 == pytest.approx(2 ** (k - 0.5) * v, abs=1e-12)
    assert all(np.all(c == 0) for c in coeffs.by_scale)


def test_k1_window():
    w = Window(np.array([[0.0, 1.0]]))
    coeffs = transform(w)
    assert coeffs.c0 == pytest.approx(R2)
    assert coeffs.by_scale[0][0, 0] == pytest.approx(-R2)
    assert coeffs.squared_sum() == pytest.approx(1.0)
    assert window_ld(w) == 1.0


@given(windows(1))
def test_k1_slack_is_zero(w):
    assert abs(parseval_slack(w)) <= 1e-12


@pytest.mark.parametrize("k", [2, 3, 4])
def test_slack_is_residual_norm(k):
    rng = np.random.default_rng(100 + k)
    w = Window(rng.random((1 << (k - 1), 1 << k)))
    x = w.cells.ravel()
    B = build_basis(k)
    residual = x - B.T @ (B @ x)
    assert parseval_slack(w) == pytest.approx(float(residual @ residual), abs=1e-10)
    assert parseval_slack(w) >= 0
    assert parseval_slack_normalized(w) == pytest.approx(parseval_slack(w) / 2 ** (2 * k - 1), abs=1e-13)


def test_constant_window_slack_and_ld():
    w = Window(np.full((8, 16), 0.35))
    assert parseval_slack(w) == pytest.approx(0.0, abs=1e-12)
    assert window_ld(w) == 0.0
    assert bound_chain(w) == pytest.approx((0.0, 0.0, 0.25), abs=1e-15)


@pytest.mark.parametrize("k", [1, 2, 4, 6])
def test_checkerboard_window_chain_is_tight(k):
    chain = bound_chain(checkerboard_window(k))
    assert max(abs(v - 1 / k) for v in chain) <= 1e-12


@given(windows(4))
def test_bessel_and_chain_on_random_windows(w):
    assert parseval_slack(w) >= -1e-9
    ld, mid, final = bound_chain(w)
    assert ld <= mid + 1e-9 and mid <= final + 1e-9


@given(windows(3))
def test_chain_on_k3_windows(w):
    bound_chain(w)


def test_chain_violation_raises(monkeypatch):
    monkeypatch.setattr(domino, "window_ld", lambda w: 5.0)
    with pytest.raises(InvariantViolation):
        domino.bound_chain(checkerboard_window(3))


def test_window_validation():
    with pytest.raises(InvalidParameter):
        Window(np.zeros((4, 4)))
    with pytest.raises(InvalidParameter):
        Window(np.zeros((3, 6)))
    with pytest.raises(InvalidParameter):
        Window(np.full((2, 4), 1.5))
    with pytest.raises(ResourceLimit):
        build_basis(7)
    w = Window(np.array([[0.0, 1.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0]]))
    assert (w.k, w.mu, w.w2) == (2, 0.625, 0.625)


def test_coefficient_csv():
    text = transform(checkerboard_window(3)).to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "scale,piece_row,piece_col,coefficient"
    assert len(lines) == 1 + 1 + 16 + 4 + 1
    assert lines[2].startswith("0,0,0,")


def horizontal_ld2(batch):
    d = np.diff(batch, axis=-1)
    return (d * d).mean(axis=(-2, -1))


@pytest.mark.parametrize("env", [make_checkerboard(1 << 10), make_megacell(1 << 10, 2)], ids=["checkerboard", "megacell"])
def test_window_expectation_matches_horizontal_profile(env):
    # E[LD(W)] over random cell windows with 2^(k-1) x 2^k cells, against the
    # scale-averaged horizontal LD2 of 2 x 2 pixel images: each domino pair at
    # scale l of the window is one horizontal pixel edge at scale l.
    k, T = 3, 4000
    rng = np.random.default_rng(7)
    ai, aj = rng.integers(0, env.N, size=(2, T))
    cells = extract_batch(env, 0, ai, aj, 1 << (k - 1), 1 << k)
    lds = np.array([window_ld(Window(c)) for c in cells])
    per_scale = []
    for ell in range(k):
        px = extract_batch(env, ell, ai, aj, 1, 2)
        per_scale.append(((px[:, 0, 0] - px[:, 0, 1]) ** 2))
    profile_value = np.mean([p.mean() for p in per_scale])
    se = math.sqrt(lds.var(ddof=1) / T + sum(p.var(ddof=1) / T for p in per_scale) / k**2)
    assert abs(lds.mean() - profile_value) <= 3 * se + 1e-12
