import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumplab.collective import (
    IndicatorPanel,
    chi_series,
    cojump_matrix,
    explained_fraction,
    sector_jumps,
    uniform_mode,
)
from jumplab.jumps import hill
from jumplab.synth import GenConfig, gen_market
from jumplab.timebase import EventIndex


def _bernoulli(seed, N, T, p=0.01):
    rng = np.random.default_rng(seed)
    return IndicatorPanel(rng.random((N, T)) < p)


def test_identical_rows_give_rank_one_correlation():
    row = np.random.default_rng(0).random(500) < 0.05
    ind = IndicatorPanel(np.tile(row, (8, 1)))
    dec = cojump_matrix(ind)
    np.testing.assert_allclose(dec.corr, np.ones((8, 8)), atol=1e-12)
    assert dec.eigenvalues[0] == pytest.approx(8.0, abs=1e-10)
    np.testing.assert_allclose(dec.market_mode, uniform_mode(8), atol=1e-10)


def test_silent_stock_is_excluded():
    theta = _bernoulli(1, 6, 2000).theta.copy()
    theta[2] = False
    dec = cojump_matrix(IndicatorPanel(theta))
    assert dec.corr.shape == (5, 5)
    assert dec.excluded == [{"row": 2, "p": 0.0}]
    assert dec.market_mode_full(6)[2] == 0.0


def test_covariance_formula():
    ind = _bernoulli(2, 5, 3000, 0.05)
    th = ind.theta.astype(float)
    want = th @ th.T / th.shape[1] - np.outer(ind.p, ind.p)
    np.testing.assert_allclose(cojump_matrix(ind, chunk=700).c, want, atol=1e-15)


def test_spectrum_invariants():
    ind, _ = gen_market(GenConfig(seed=3, n_stocks=40, market_rate=0.002, participation_fixed=0.3), n_bins=20_000)
    dec = cojump_matrix(ind)
    assert dec.eigenvalues.sum() == pytest.approx(40.0, abs=1e-8)
    np.testing.assert_allclose(dec.eigenvectors.T @ dec.eigenvectors, np.eye(40), atol=1e-8)
    np.testing.assert_allclose(dec.c, dec.c.T)
    assert np.all(np.diff(dec.eigenvalues) <= 0)
    assert dec.market_mode.sum() > 0


def test_independent_panel_mostly_inside_band():
    dec = cojump_matrix(_bernoulli(4, 100, 23_400, 0.01))
    assert dec.n_outside_band / 100 <= 0.02
    assert dec.mp_band[0] == pytest.approx((1 - np.sqrt(100 / 23_400)) ** 2)


def test_wide_panel_flags_band():
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        dec = cojump_matrix(_bernoulli(5, 30, 20, 0.3))
    assert not dec.mp_reliable


def test_chi_is_jumping_fraction_with_uniform_mode():
    theta = np.zeros((100, 3), dtype=bool)
    theta[:10, 0] = True
    theta[:, 2] = True
    ms = chi_series(IndicatorPanel(theta), uniform_mode(100), threshold=0.1)
    np.testing.assert_allclose(ms.chi, [0.10, 0.0, 1.0], atol=1e-12)
    assert ms.events.tolist() == [2]
    assert ms.with_threshold(0.05).events.tolist() == [0, 2]


def test_chi_sign_fix():
    ind = _bernoulli(6, 10, 50, 0.3)
    a = chi_series(ind, uniform_mode(10)).chi
    b = chi_series(ind, -uniform_mode(10)).chi
    np.testing.assert_array_equal(a, b)


@given(st.integers(0, 2**31), st.integers(2, 40))
@settings(max_examples=40, deadline=None)
def test_chi_equals_count_over_n_every_bin(seed, n):
    rng = np.random.default_rng(seed)
    theta = rng.random((n, 30)) < rng.random()
    chi = chi_series(IndicatorPanel(theta), uniform_mode(n)).chi
    np.testing.assert_allclose(chi, theta.sum(axis=0) / n, rtol=1e-12, atol=1e-15)


def test_full_participation_gives_chi_one():
    ind, truth = gen_market(GenConfig(seed=7, n_stocks=30, idio_prob=0.0, market_rate=0.01,
                                      participation_fixed=1.0), n_bins=5000)
    chi = chi_series(ind, uniform_mode(30)).chi
    np.testing.assert_allclose(chi[truth.truth["market_t"]], 1.0)


def test_chi_tail_matches_planted_participation():
    cfg = GenConfig(seed=8, n_stocks=200, idio_prob=0.002, market_rate=0.01, participation_alpha=1.5,
                    participation_min=0.05)
    ind, truth = gen_market(cfg, n_bins=100_000)
    dec = cojump_matrix(ind)
    chi = chi_series(ind, dec.market_mode).chi
    fit = hill(chi, xmin=0.05)
    assert fit.n_tail >= 500
    assert abs(fit.exponent - truth.truth["participation_alpha"]) < 0.2


def _jumps(pairs):
    s, t = zip(*pairs)
    return EventIndex(np.array(s), np.array(t))


def test_explained_fraction_extremes():
    jumps = _jumps([(0, 5), (1, 100), (2, 389), (0, 400)])
    every = np.arange(2 * 390)
    assert explained_fraction(jumps, every)["fraction"] == 1.0
    assert explained_fraction(jumps, np.array([], dtype=np.int64))["fraction"] == 0.0
    with pytest.raises(ValueError):
        explained_fraction(EventIndex([], []), every)


def test_explained_fraction_window_stays_in_session():
    jumps = _jumps([(0, 389), (0, 391)])
    res = explained_fraction(jumps, np.array([390]), half_window=2)
    assert res["explained"] == 1  # 389 is in the previous session
    assert explained_fraction(jumps, np.array([388]), half_window=1)["explained"] == 1


def test_explained_fraction_union_of_series():
    jumps = _jumps([(0, 10), (1, 20), (2, 30)])
    theta = np.zeros((3, 40), dtype=bool)
    theta[:, 10] = True
    ms = chi_series(IndicatorPanel(theta), uniform_mode(3), 0.5)
    res = explained_fraction(jumps, [ms, np.array([30])])
    assert res["explained"] == 2 and res["n_collective"] == 2


def test_single_sector_equals_market():
    ind = _bernoulli(9, 12, 400, 0.1)
    series, skipped = sector_jumps(ind, ["ALL"] * 12, 0.1)
    market = chi_series(ind, uniform_mode(12), 0.1)
    assert skipped == []
    np.testing.assert_allclose(series["ALL"].chi, market.chi, atol=1e-12)
    np.testing.assert_array_equal(series["ALL"].events, market.events)


def test_sector_fraction_and_small_sectors():
    theta = np.zeros((14, 2), dtype=bool)
    theta[:3, 0] = True
    labels = ["A"] * 10 + ["B"] * 4
    series, skipped = sector_jumps(IndicatorPanel(theta), labels, 0.1)
    assert series["A"].chi[0] == pytest.approx(0.3)
    assert skipped == [{"sector": "B", "members": 4}]
    with pytest.raises(ValueError):
        sector_jumps(IndicatorPanel(theta), labels[:-1])
    with pytest.raises(ValueError):
        sector_jumps(IndicatorPanel(theta), labels[:-1] + [""])


def test_two_sector_generator():
    rng = np.random.default_rng(10)
    N, T = 100, 30_000
    theta = rng.random((N, T)) < 0.002
    labels = np.array(["A"] * 50 + ["B"] * 50)
    planted = {"A": np.sort(rng.choice(T, 60, replace=False)), "B": np.sort(rng.choice(T, 60, replace=False))}
    for lab, bins in planted.items():
        rows = np.nonzero(labels == lab)[0]
        for t in bins:
            theta[rng.choice(rows, 6, replace=False), t] = True
    ind = IndicatorPanel(theta)
    series, _ = sector_jumps(ind, labels, 0.1)
    for lab, bins in planted.items():
        np.testing.assert_array_equal(series[lab].events, bins)
    # sector-only structure has no market mode; the market index is the uniform one
    market = chi_series(ind, uniform_mode(N), 0.1)
    assert market.chi.max() < 0.1


def test_permuting_stocks():
    ind, _ = gen_market(GenConfig(seed=11, n_stocks=30, market_rate=0.003, participation_fixed=0.4), n_bins=10_000)
    perm = np.random.default_rng(0).permutation(30)
    a, b = cojump_matrix(ind), cojump_matrix(IndicatorPanel(ind.theta[perm]))
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-9)
    np.testing.assert_allclose(a.market_mode[perm], b.market_mode, atol=1e-9)
    ca = chi_series(ind, a.market_mode).chi
    cb = chi_series(IndicatorPanel(ind.theta[perm]), b.market_mode).chi
    np.testing.assert_allclose(ca, cb, atol=1e-12)


@given(st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_explained_fraction_monotone(seed):
    rng = np.random.default_rng(seed)
    theta = rng.random((20, 2 * 50)) < 0.05
    ind = IndicatorPanel(theta)
    s, t = np.nonzero(theta)
    jumps = EventIndex(s, t)
    base = chi_series(ind, uniform_mode(20), 0.0)
    prev_row = None
    for thr in (0.0, 0.05, 0.1, 0.15, 0.2, 0.3):
        row = [explained_fraction(jumps, base.with_threshold(thr), w, 50)["fraction"] for w in range(5)]
        assert all(x <= y for x, y in zip(row, row[1:]))
        if prev_row is not None:
            assert all(x <= y for x, y in zip(row, prev_row))
        prev_row = row
