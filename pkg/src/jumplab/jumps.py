"""s-jump detection against a trailing mean of absolute returns, and tail fits."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from jumplab.timebase import BarPanel, BinStamp, EventIndex, TradingCalendar


class TailFitError(ValueError):
    """Raised when a tail exponent cannot be estimated from the sample."""


def n_threads() -> int:
    env = os.environ.get("JUMPLAB_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class BaselineSeries:
    m: np.ndarray
    window: int
    min_history: int
    policy: str = "span"


def baseline(panel: BarPanel, window: int = 120, min_history: int = 30, policy: str = "span") -> BaselineSeries:
    """Trailing flat mean of |r| over the last ``window`` unmasked bins before t.

    The current bin is excluded. With ``policy="span"`` the window runs back
    across session boundaries (intraday bins only); with ``"per-session"``
    it restarts every day. m(t) is NaN until ``min_history`` bins exist.
    """
    if not window >= min_history >= 1:
        raise ValueError("need window >= min_history >= 1")
    if policy not in ("span", "per-session"):
        raise ValueError(f"unknown window policy {policy!r}")
    absr = panel.abs_returns()
    valid = panel.valid
    bpd = panel.calendar.bins_per_day
    m = np.full(absr.shape, np.nan)

    def one(i):
        m[i] = _trailing_mean(absr[i], valid[i], window, min_history, bpd if policy == "per-session" else None)

    workers = n_threads()
    if workers > 1 and panel.n_stocks > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(one, range(panel.n_stocks)))
    else:
        for i in range(panel.n_stocks):
            one(i)
    m.flags.writeable = False
    return BaselineSeries(m, window, min_history, policy)


def _trailing_mean(absr, valid, window, min_history, session_len):
    n_before = np.cumsum(valid) - valid
    csum = np.concatenate(([0.0], np.cumsum(absr[valid])))
    lo = np.maximum(n_before - window, 0)
    if session_len is not None:
        day_first = n_before[:: session_len]
        lo = np.maximum(lo, np.repeat(day_first, session_len)[: len(absr)])
    n = n_before - lo
    out = np.full(len(absr), np.nan)
    ok = n >= min_history
    out[ok] = (csum[n_before[ok]] - csum[lo[ok]]) / n[ok]
    return out


@dataclass(frozen=True)
class JumpEvent:
    ticker: str
    stamp: BinStamp
    score: float
    return_sign: str


@dataclass(frozen=True)
class JumpTable:
    """Detected jumps as column arrays, sorted by (stock, bin)."""

    tickers: tuple[str, ...]
    calendar: TradingCalendar
    stock: np.ndarray
    t: np.ndarray
    score: np.ndarray
    sign: np.ndarray
    s: float = float("nan")
    n_degenerate: int = 0

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        for i in range(len(self)):
            yield JumpEvent(
                self.tickers[self.stock[i]],
                self.calendar.stamp(self.t[i]),
                float(self.score[i]),
                "+" if self.sign[i] > 0 else "-",
            )

    def index(self) -> EventIndex:
        return EventIndex(self.stock, self.t)

    def take(self, idx) -> "JumpTable":
        return JumpTable(self.tickers, self.calendar, self.stock[idx], self.t[idx], self.score[idx],
                         self.sign[idx], self.s, self.n_degenerate)

    def to_frame(self) -> pd.DataFrame:
        bpd = self.calendar.bins_per_day
        return pd.DataFrame(
            {
                "ticker": np.asarray(self.tickers, dtype=object)[self.stock],
                "date": self.calendar.date_strings()[self.t // bpd],
                "time": self.calendar.time_strings()[self.t % bpd],
                "score": self.score,
                "sign": np.where(self.sign > 0, "+", "-"),
            }
        )

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def read_csv(cls, path, tickers, calendar: TradingCalendar) -> "JumpTable":
        df = pd.read_csv(path, dtype={"ticker": str, "date": str, "time": str, "sign": str},
                         float_precision="round_trip")
        return cls.from_frame(df, tickers, calendar)

    @classmethod
    def from_frame(cls, df, tickers, calendar) -> "JumpTable":
        tix = {tk: i for i, tk in enumerate(tickers)}
        days = {d.isoformat(): i for i, d in enumerate(calendar.trading_days)}
        mins = df["time"].str.slice(0, 2).astype(int) * 60 + df["time"].str.slice(3, 5).astype(int)
        t = df["date"].map(days).to_numpy(dtype=np.int64) * calendar.bins_per_day + (
            mins.to_numpy() - calendar.session_open)
        return cls(
            tuple(tickers), calendar,
            df["ticker"].map(tix).to_numpy(dtype=np.int64), t,
            df["score"].to_numpy(dtype=float),
            np.where(df["sign"].to_numpy() == "+", 1, -1).astype(np.int8),
        )


def detect_jumps(panel: BarPanel, base: BaselineSeries, s: float) -> JumpTable:
    """All bins with |r(t)| > s * m(t); score = |r(t)| / m(t).

    Bins where m(t) is zero but |r(t)| is not are skipped and counted in
    ``n_degenerate``.
    """
    if not s > 1:
        raise ValueError("jump threshold s must exceed 1")
    if base.m.shape != panel.returns.shape:
        raise ValueError("baseline does not match panel")
    r = panel.returns
    absr = np.abs(r)
    m = base.m
    usable = panel.valid & np.isfinite(m)
    with np.errstate(invalid="ignore"):
        degenerate = usable & (m == 0) & (absr > 0)
        hit = usable & (m > 0) & (absr > s * m)
    stock, t = np.nonzero(hit)
    return JumpTable(
        panel.tickers, panel.calendar, stock.astype(np.int64), t.astype(np.int64),
        absr[stock, t] / m[stock, t], np.where(r[stock, t] > 0, 1, -1).astype(np.int8),
        float(s), int(degenerate.sum()),
    )


@dataclass(frozen=True)
class TailFit:
    exponent: float
    fit_range: tuple[float, float]
    n_tail: int
    stderr: float

    def to_json(self) -> dict:
        return {"exponent": self.exponent, "fit_range": list(self.fit_range), "n_tail": self.n_tail,
                "stderr": self.stderr}


def hill(scores, n_tail: int | None = None, xmin: float | None = None) -> TailFit:
    """Hill estimate of the CCDF exponent.

    Uses the ``n_tail`` largest values against the next order statistic, or,
    with ``xmin``, every value at or above ``xmin`` against ``xmin`` itself
    (inclusive, so discrete scores sitting on the threshold stay in the tail).
    """
    x = np.sort(np.asarray(scores, dtype=float))[::-1]
    x = x[np.isfinite(x)]
    if xmin is not None:
        if not xmin > 0:
            raise TailFitError("xmin must be positive")
        tail = x[x >= xmin]
        k, ref = len(tail), float(xmin)
    else:
        if n_tail is None or n_tail >= len(x):
            raise TailFitError(f"n_tail={n_tail} needs at least n_tail + 1 scores, have {len(x)}")
        k, ref = int(n_tail), float(x[n_tail])
        tail = x[:k]
    if k < 50:
        raise TailFitError(f"only {k} tail points, need at least 50")
    if not ref > 0:
        raise TailFitError("tail reference point is not positive")
    spread = np.log(tail / ref).sum()
    if not spread > 0:
        raise TailFitError("zero Hill spread (tail values all equal)")
    alpha = k / spread
    return TailFit(float(alpha), (ref, float(tail[0])), k, float(alpha / np.sqrt(k)))


def _auto_tail(x_desc) -> int:
    n = len(x_desc)
    grid = np.unique(np.geomspace(50, n - 1, 40).astype(int))
    logs = np.log(x_desc)
    cum = np.cumsum(logs)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = grid / (cum[grid - 1] - grid * logs[grid])
    best = grid[0]
    for j, k in enumerate(grid):
        if not np.isfinite(h[j]):
            break
        earlier = h[: j + 1]
        if np.all(np.abs(h[j] - earlier) <= earlier / np.sqrt(grid[: j + 1])):
            best = k
    return int(best)


def score_ccdf(scores, tail_fraction: float = 0.05, n_tail=None, xmin: float | None = None,
               grid_points: int = 50) -> tuple[pd.DataFrame, TailFit]:
    """Empirical CCDF on a log grid plus a Hill fit of its exponent.

    ``n_tail`` may be an int, ``"auto"`` (largest count with a flat Hill
    plot) or None (top ``tail_fraction`` of the scores, at least 50).
    """
    if isinstance(scores, JumpTable):
        scores = scores.score
    x = np.sort(np.asarray(scores, dtype=float))
    x = x[np.isfinite(x)]
    if len(x) < 51:
        raise TailFitError(f"only {len(x)} scores, need at least 51")
    pos = x[x > 0]
    grid = np.geomspace(pos[0], x[-1], grid_points) if len(pos) and x[-1] > pos[0] else np.array([x[-1]])
    ccdf = 1.0 - np.searchsorted(x, grid, side="right") / len(x)
    table = pd.DataFrame({"score": grid, "ccdf": ccdf})
    desc = x[::-1]
    if xmin is not None:
        return table, hill(desc, xmin=xmin)
    if n_tail == "auto":
        if not desc[-1] > 0:
            desc = desc[desc > 0]
        k = _auto_tail(desc)
    elif n_tail is None:
        k = max(50, int(np.ceil(tail_fraction * len(x))))
    else:
        k = int(n_tail)
    return table, hill(desc, n_tail=min(k, len(desc) - 1))


def classify_news_jumps(jumps, news: EventIndex, bins_per_day: int, assoc_window: int = 2) -> np.ndarray:
    """Boolean mask over ``jumps``: True when a same-stock news event fell in
    bins [t - assoc_window, t] of the jump's own session."""
    idx = jumps.index() if isinstance(jumps, JumpTable) else jumps
    if len(news) == 0 or len(idx) == 0:
        return np.zeros(len(idx), dtype=bool)
    span = int(max(idx.t.max(), news.t.max())) + 1
    keys = np.sort(news.stock * span + news.t)
    lo_t = np.maximum(idx.t - assoc_window, idx.t - idx.t % bins_per_day)
    lo = np.searchsorted(keys, idx.stock * span + lo_t, side="left")
    hi = np.searchsorted(keys, idx.stock * span + idx.t, side="right")
    return hi > lo
