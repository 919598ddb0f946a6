import datetime as dt

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import calendar, panel_from_closes
from jumplab.synth import GenConfig, gen_returns, u_shape
from jumplab.timebase import (
    BarPanel,
    BinStamp,
    EventIndex,
    TradingCalendar,
    build_panel,
    intraday_mean_curve,
    read_bars,
    write_bars,
)


def test_default_session_has_390_bins():
    cal = TradingCalendar((dt.date(2006, 1, 3),))
    assert cal.bins_per_day == 390
    assert cal.time_strings()[0] == "09:30" and cal.time_strings()[-1] == "15:59"


def test_calendar_rejects_unsorted_days_and_empty_session():
    with pytest.raises(ValueError):
        TradingCalendar((dt.date(2006, 1, 4), dt.date(2006, 1, 3)))
    with pytest.raises(ValueError):
        TradingCalendar((dt.date(2006, 1, 3), dt.date(2006, 1, 3)))
    with pytest.raises(ValueError):
        TradingCalendar((dt.date(2006, 1, 3),), session_open=600, session_close=600)


def test_locate_and_stamp_agree():
    cal = calendar(n_days=3, bins=390)
    t = cal.locate(dt.datetime(2006, 1, 4, 9, 31, 45))
    assert t == 390 + 1
    assert cal.stamp(t) == BinStamp(1, 1)
    assert cal.locate(dt.datetime(2006, 1, 4, 16, 0)) is None
    assert cal.locate(dt.datetime(2006, 1, 4, 9, 29)) is None
    assert cal.locate(dt.datetime(2007, 1, 4, 10, 0)) is None
    assert cal.bin_start(t) == dt.datetime(2006, 1, 4, 9, 31)


def test_binstamp_total_order():
    assert BinStamp(0, 389) < BinStamp(1, 0) < BinStamp(1, 1)


def test_relative_returns_with_first_bin_masked():
    p = panel_from_closes([[100.0, 101.0, 100.0]])
    assert p.missing[0, 0]
    assert p.returns[0, 1] == pytest.approx(0.01, abs=1e-15)
    assert p.returns[0, 2] == pytest.approx(-1.0 / 101.0, abs=1e-15)


def test_constant_closes_give_exact_zero_returns():
    p = panel_from_closes(np.full((2, 10), 37.25), n_days=2)
    assert np.all(p.returns[p.valid] == 0.0)
    assert p.valid.sum() == 2 * 2 * 4


def test_overnight_change_is_masked():
    p = panel_from_closes([[100.0, 100.0, 100.0, 110.0, 110.0, 110.0]], n_days=2)
    assert p.missing[0, 3]
    assert np.nanmax(np.abs(p.returns)) == 0.0


def test_missing_bar_masks_its_return_and_the_next():
    closes = np.array([[100.0, 101.0, np.nan, 103.0, 104.0]])
    p = panel_from_closes(closes)
    assert p.missing[0].tolist() == [True, False, True, True, False]
    assert p.volumes[0, 2] == 100  # volume kept as given; has_bar governs
    assert np.isfinite(p.returns[p.valid]).all()


def _records(rows):
    return pd.DataFrame(rows, columns=["date", "time", "ticker", "close", "volume"])


def test_build_panel_rejections_are_reported():
    cal = calendar(bins=5)
    df = _records([
        ("2006-01-03", "09:30", "A", 10.0, 5),
        ("2006-01-03", "09:31", "A", 10.5, 5),
        ("2006-02-01", "09:31", "A", 10.5, 5),  # unknown date
        ("2006-01-03", "09:32", "A", -1.0, 5),  # non-positive price
        ("2006-01-03", "17:30", "A", 10.0, 5),  # out of session
        ("2006-01-03", "9h33", "A", 10.0, 5),  # bad time
        ("2006-01-03", "09:33", "A", 10.0, -5),  # bad volume
    ])
    panel, rep = build_panel(df, cal)
    assert rep.n_accepted == 2
    assert rep.rejected == {"unknown date": 1, "non-positive price": 1, "out of session": 1, "bad time": 1,
                            "bad volume": 1}
    assert panel.returns[0, 1] == pytest.approx(0.05)
    assert {s["reason"] for s in rep.samples} == set(rep.rejected)


def test_build_panel_duplicates():
    cal = calendar(bins=5)
    df = _records([
        ("2006-01-03", "09:30", "A", 10.0, 5),
        ("2006-01-03", "09:30", "A", 10.0, 5),  # identical, kept once
        ("2006-01-03", "09:31", "A", 11.0, 5),
        ("2006-01-03", "09:31", "A", 12.0, 5),  # conflict: both dropped
    ])
    panel, rep = build_panel(df, cal)
    assert rep.rejected == {"identical duplicate": 1, "conflicting duplicate": 2}
    assert panel.has_bar[0].tolist() == [True, False, False, False, False]


def test_build_panel_unknown_ticker_with_fixed_universe():
    cal = calendar(bins=5)
    df = _records([("2006-01-03", "09:30", "A", 10.0, 5), ("2006-01-03", "09:30", "ZZ", 10.0, 5)])
    panel, rep = build_panel(df, cal, tickers=["A", "B"])
    assert panel.tickers == ("A", "B")
    assert rep.rejected == {"unknown ticker": 1}
    assert not panel.has_bar[1].any()


@st.composite
def small_panels(draw):
    n = draw(st.integers(1, 3))
    days = draw(st.integers(1, 3))
    bins = draw(st.integers(2, 6))
    shape = (n, days * bins)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    has = rng.random(shape) < draw(st.floats(0.3, 1.0))
    closes = np.where(has, np.round(rng.uniform(1, 200, shape), 4), np.nan)
    vols = np.where(has, rng.integers(0, 10_000, shape), 0)
    cal = calendar(days, bins)
    return BarPanel(tuple(f"S{i}" for i in range(n)), cal, closes, vols, has), seed


def _same_panel(a: BarPanel, b: BarPanel):
    assert a.tickers == b.tickers
    np.testing.assert_array_equal(a.has_bar, b.has_bar)
    np.testing.assert_array_equal(a.closes, b.closes)
    np.testing.assert_array_equal(a.volumes, b.volumes)
    np.testing.assert_array_equal(a.missing, b.missing)


@given(small_panels())
@settings(max_examples=60, deadline=None)
def test_records_round_trip(args):
    panel, _ = args
    rebuilt, rep = build_panel(panel.records(), panel.calendar, panel.tickers)
    assert rep.rejected == {}
    _same_panel(panel, rebuilt)


@given(small_panels(), st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_record_order_never_matters(args, rnd):
    panel, _ = args
    rec = panel.records()
    dup = rec.sample(frac=0.3, random_state=1)
    conflict = rec.head(1).assign(close=lambda d: d["close"] + 1.0)
    rec = pd.concat([rec, dup, conflict], ignore_index=True)
    perm = list(range(len(rec)))
    rnd.shuffle(perm)
    a, rep_a = build_panel(rec, panel.calendar, panel.tickers)
    b, rep_b = build_panel(rec.iloc[perm], panel.calendar, panel.tickers)
    _same_panel(a, b)
    assert rep_a.rejected == rep_b.rejected


def test_bar_file_round_trip_is_exact(tmp_path):
    panel, _ = gen_returns(GenConfig(seed=4, n_stocks=3, n_days=2, missing_frac=0.05))
    write_bars(panel, tmp_path / "bars.csv")
    again = build_panel(read_bars(tmp_path / "bars.csv"), panel.calendar)[0]
    _same_panel(panel, again)
    text = (tmp_path / "bars.csv").read_bytes()
    assert text.startswith(b"date,time,ticker,close,volume\n") and b"\r" not in text


def test_read_bars_checks_header(tmp_path):
    (tmp_path / "b.csv").write_text("date,ticker,time,close,volume\n")
    with pytest.raises(ValueError, match="expected header"):
        read_bars(tmp_path / "b.csv")


def test_panel_save_load(tmp_path):
    panel, _ = gen_returns(GenConfig(seed=1, n_stocks=2, n_days=2, missing_frac=0.1))
    panel.save(tmp_path / "p")
    _same_panel(panel, BarPanel.load(tmp_path / "p"))


def test_event_index_indicator():
    ev = EventIndex([0, 1, 1], [2, 0, 2])
    theta = ev.indicator(2, 3)
    assert theta.tolist() == [[False, False, True], [True, False, True]]
    assert ev.sorted().t.tolist() == [2, 0, 2]


def _chance_level_exceedances(z):
    # 389 bins at 3 sigma: about one exceedance expected by chance
    z = z[1:]  # bin 0 is always masked and interpolated
    assert np.sum(z > 3.0) <= 5, np.sort(z)[-6:]
    assert z.max() < 4.5


def test_flat_curve_for_iid_returns():
    panel, _ = gen_returns(GenConfig(seed=2, n_stocks=40, n_days=40))
    curve, se = intraday_mean_curve(panel, with_stderr=True)
    assert abs(curve.mean() - 1.0) < 1e-12
    _chance_level_exceedances(np.abs(curve - 1.0) / se)


def test_imposed_u_shape_recovered():
    cfg = GenConfig(seed=3, n_stocks=40, n_days=60, u_amplitude=0.5)
    panel, truth = gen_returns(cfg)
    curve, se = intraday_mean_curve(panel, with_stderr=True)
    imposed = np.asarray(truth.truth["u_curve"])
    imposed = imposed / imposed.mean()
    _chance_level_exceedances(np.abs(curve - imposed) / se)
    assert abs(curve.mean() - 1.0) < 1e-12


@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(0, 4))
@settings(max_examples=40, deadline=None)
def test_curve_mean_is_one(seed, bins, smooth):
    rng = np.random.default_rng(seed)
    vals = rng.pareto(3.0, (3, 2 * bins))
    valid = rng.random(vals.shape) < 0.7
    valid[:, 0] = True
    from jumplab.timebase import seasonal_curve
    curve = seasonal_curve(vals, valid, bins, smooth=smooth)
    assert abs(curve.mean() - 1.0) < 1e-12


def test_all_masked_panel_is_an_error():
    p = panel_from_closes(np.full((2, 5), np.nan))
    with pytest.raises(ValueError, match="empty panel"):
        intraday_mean_curve(p)


def test_event_curve_counts_events():
    cal = calendar(n_days=2, bins=4)
    p = BarPanel(("A",), cal, np.ones((1, 8)), np.ones((1, 8), dtype=np.int64), np.ones((1, 8), dtype=bool))
    curve = intraday_mean_curve(p, "event-count", EventIndex([0, 0, 0], [1, 5, 2]))
    counts = np.array([0.0, 2.0, 1.0, 0.0])
    np.testing.assert_allclose(curve, counts / counts.mean())


def test_u_shape_generator_has_mean_one():
    assert abs(u_shape(390, 0.5).mean() - 1.0) < 1e-12
