import datetime as dt

import numpy as np
import pytest

from jumplab.timebase import BarPanel, TradingCalendar

_AC_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _AC_RESULTS[mark.args[0]] = (rep.outcome, detail, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_AC_RESULTS, key=lambda s: int(s[2:])):
        outcome, detail, secs = _AC_RESULTS[label]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{label} {status} ({secs:.1f}s) {detail}")


def calendar(n_days=1, bins=5, start=dt.date(2006, 1, 3)):
    days = [start + dt.timedelta(days=i) for i in range(n_days)]
    return TradingCalendar(tuple(days), session_open=570, session_close=570 + bins)


def panel_from_closes(closes, n_days=1, volumes=None, has_bar=None, tickers=None):
    closes = np.atleast_2d(np.asarray(closes, dtype=float))
    n, T = closes.shape
    cal = calendar(n_days, T // n_days)
    if volumes is None:
        volumes = np.full((n, T), 100, dtype=np.int64)
    if has_bar is None:
        has_bar = np.isfinite(closes)
    tickers = tickers or [f"T{i}" for i in range(n)]
    return BarPanel(tuple(tickers), cal, closes, np.asarray(volumes), np.asarray(has_bar))


def panel_from_abs_returns(absr, n_days=1):
    """Panel whose unmasked |r| equal ``absr`` (first bin of each day masked)."""
    absr = np.atleast_2d(np.asarray(absr, dtype=float))
    closes = 100.0 * np.cumprod(1.0 + absr, axis=1)
    return panel_from_closes(closes, n_days)


def null_ratio_stderr(trigger, lags, bpd, p_bin, u):
    """Binomial standard error of a rate-ratio profile when targets are
    Bernoulli(p_bin[b]) independent of the triggers."""
    base = np.mean(p_bin)
    b = (trigger.t % bpd)[:, None] + lags[None, :]
    inside = (b >= 0) & (b < bpd)
    bb = np.clip(b, 0, bpd - 1)
    # per contribution x = theta / (u * base); var = p (1 - p) / (u * base)**2
    var = np.where(inside, p_bin[bb] * (1 - p_bin[bb]) / (u[bb] * base) ** 2, 0.0)
    n = inside.sum(axis=0)
    return np.sqrt(var.sum(axis=0)) / n
