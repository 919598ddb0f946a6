"""Trading calendar, bin arithmetic and the aligned one-minute panel.

Every bin is addressed by a flat index ``t = day * bins_per_day + bin``.
Bin ``b`` covers the minute starting at ``session_open + b`` (so 09:30 is
bin 0 and 15:59 is bin 389 with the default session).
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

BAR_COLUMNS = ["date", "time", "ticker", "close", "volume"]


@dataclass(frozen=True)
class TradingCalendar:
    trading_days: tuple[dt.date, ...]
    session_open: int = 570
    session_close: int = 960

    def __post_init__(self):
        days = tuple(self.trading_days)
        object.__setattr__(self, "trading_days", days)
        if self.session_close - self.session_open <= 0:
            raise ValueError("session_close must be after session_open")
        if any(b <= a for a, b in zip(days, days[1:])):
            raise ValueError("trading_days must be strictly increasing")
        object.__setattr__(self, "_day_lookup", {d: i for i, d in enumerate(days)})

    @classmethod
    def from_dates(cls, dates, **kw) -> "TradingCalendar":
        parsed = sorted({_as_date(d) for d in dates})
        return cls(tuple(parsed), **kw)

    @property
    def bins_per_day(self) -> int:
        return self.session_close - self.session_open

    @property
    def n_days(self) -> int:
        return len(self.trading_days)

    @property
    def n_bins(self) -> int:
        return self.n_days * self.bins_per_day

    def day_index(self, date) -> int | None:
        return self._day_lookup.get(_as_date(date))

    def flat(self, day, bin):
        return np.asarray(day) * self.bins_per_day + np.asarray(bin)

    def stamp(self, t: int) -> "BinStamp":
        day, b = divmod(int(t), self.bins_per_day)
        return BinStamp(day, b)

    def locate(self, when: dt.datetime) -> int | None:
        """Flat bin holding ``when``, or None outside the sessions."""
        day = self.day_index(when.date())
        if day is None:
            return None
        minute = when.hour * 60 + when.minute - self.session_open
        if not 0 <= minute < self.bins_per_day:
            return None
        return day * self.bins_per_day + minute

    def bin_start(self, t: int) -> dt.datetime:
        day, b = divmod(int(t), self.bins_per_day)
        base = dt.datetime.combine(self.trading_days[day], dt.time())
        return base + dt.timedelta(minutes=self.session_open + b)

    def date_strings(self) -> np.ndarray:
        return np.array([d.isoformat() for d in self.trading_days], dtype=object)

    def time_strings(self) -> np.ndarray:
        mins = self.session_open + np.arange(self.bins_per_day)
        return np.array([f"{m // 60:02d}:{m % 60:02d}" for m in mins], dtype=object)

    def session_minutes(self, when: dt.datetime) -> float | None:
        """Continuous intraday clock: minutes since the first open, sessions concatenated."""
        day = self.day_index(when.date())
        if day is None:
            return None
        m = when.hour * 60 + when.minute + when.second / 60 - self.session_open
        if not 0 <= m < self.bins_per_day:
            return None
        return day * self.bins_per_day + m

    def to_json(self) -> dict:
        return {
            "session_open": self.session_open,
            "session_close": self.session_close,
            "trading_days": [d.isoformat() for d in self.trading_days],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TradingCalendar":
        return cls(
            tuple(_as_date(d) for d in obj["trading_days"]),
            session_open=obj["session_open"],
            session_close=obj["session_close"],
        )


@dataclass(frozen=True, order=True)
class BinStamp:
    day: int
    bin: int


@dataclass(frozen=True)
class EventIndex:
    """Events as parallel arrays of stock row and flat bin."""

    stock: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "stock", np.asarray(self.stock, dtype=np.int64).ravel())
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.int64).ravel())
        if self.stock.shape != self.t.shape:
            raise ValueError("stock and t must have equal length")

    def __len__(self):
        return len(self.t)

    def take(self, idx) -> "EventIndex":
        return EventIndex(self.stock[idx], self.t[idx])

    def sorted(self) -> "EventIndex":
        order = np.lexsort((self.t, self.stock))
        return self.take(order)

    def indicator(self, n_stocks: int, n_bins: int) -> np.ndarray:
        theta = np.zeros((n_stocks, n_bins), dtype=bool)
        theta[self.stock, self.t] = True
        return theta


@dataclass(frozen=True)
class BarPanel:
    """Per-stock one-minute closes, returns and volumes on a calendar.

    ``returns`` is NaN wherever ``missing`` is True; ``volumes`` is zero
    where there is no bar (``has_bar`` False).
    """

    tickers: tuple[str, ...]
    calendar: TradingCalendar
    closes: np.ndarray
    volumes: np.ndarray
    has_bar: np.ndarray
    returns: np.ndarray = field(init=False)
    missing: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        shape = (len(self.tickers), self.calendar.n_bins)
        for name in ("closes", "volumes", "has_bar"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        returns, missing = _returns_from_closes(self.closes, self.has_bar, self.calendar.bins_per_day)
        for arr in (self.closes, self.volumes, self.has_bar, returns, missing):
            arr.flags.writeable = False
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "missing", missing)

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_bins(self) -> int:
        return self.calendar.n_bins

    @property
    def valid(self) -> np.ndarray:
        return ~self.missing

    def abs_returns(self) -> np.ndarray:
        return np.abs(self.returns)

    def ticker_index(self) -> dict[str, int]:
        return {tk: i for i, tk in enumerate(self.tickers)}

    def records(self) -> pd.DataFrame:
        """Bar records (one per present bar) in the bar-file layout."""
        si, t = np.nonzero(self.has_bar)
        bpd = self.calendar.bins_per_day
        return pd.DataFrame(
            {
                "date": self.calendar.date_strings()[t // bpd],
                "time": self.calendar.time_strings()[t % bpd],
                "ticker": np.asarray(self.tickers, dtype=object)[si],
                "close": self.closes[si, t],
                "volume": self.volumes[si, t],
            },
            columns=BAR_COLUMNS,
        )

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.save(directory / "closes.npy", self.closes)
        np.save(directory / "volumes.npy", self.volumes)
        np.save(directory / "has_bar.npy", self.has_bar)
        meta = {"tickers": list(self.tickers), "calendar": self.calendar.to_json()}
        (directory / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def load(cls, directory) -> "BarPanel":
        directory = Path(directory)
        meta = json.loads((directory / "meta.json").read_text())
        return cls(
            meta["tickers"],
            TradingCalendar.from_json(meta["calendar"]),
            np.load(directory / "closes.npy"),
            np.load(directory / "volumes.npy"),
            np.load(directory / "has_bar.npy"),
        )


def _returns_from_closes(closes, has_bar, bins_per_day):
    returns = np.full(closes.shape, np.nan)
    both = has_bar[:, 1:] & has_bar[:, :-1]
    # first bin of each session: overnight change excluded
    both[:, bins_per_day - 1 :: bins_per_day] = False
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = closes[:, 1:] / closes[:, :-1] - 1.0
    returns[:, 1:][both] = rel[both]
    return returns, ~np.isfinite(returns)


@dataclass
class PanelReport:
    n_records: int = 0
    n_accepted: int = 0
    rejected: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)

    def reject(self, reason: str, rows: pd.DataFrame, keep: int = 5) -> None:
        if len(rows) == 0:
            return
        self.rejected[reason] = self.rejected.get(reason, 0) + len(rows)
        for rec in rows.head(keep).to_dict("records"):
            self.samples.append({"reason": reason, **{k: str(v) for k, v in rec.items()}})

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_accepted": self.n_accepted,
            "rejected": dict(sorted(self.rejected.items())),
            "samples": self.samples,
        }


def build_panel(records: pd.DataFrame, cal: TradingCalendar, tickers=None) -> tuple[BarPanel, PanelReport]:
    """Align bar records onto ``cal``; returns the panel and a rejection report.

    Records with an unknown date, an out-of-session time, a non-positive
    price or a negative volume are rejected. Repeated (ticker, date, time)
    keys are kept once if identical and dropped entirely if they conflict, so
    the result never depends on record order.
    """
    report = PanelReport(n_records=len(records))
    df = records.loc[:, BAR_COLUMNS]

    lookup = {d.isoformat(): i for i, d in enumerate(cal.trading_days)}
    day = pd.Series(_map_unique(df["date"], lambda d: lookup.get(str(d), -1)), index=df.index)
    bad = day < 0
    report.reject("unknown date", df[bad])
    df, day = df[~bad], day[~bad]

    minute = pd.Series(_map_unique(df["time"], _parse_hhmm), index=df.index)
    ok_fmt = minute >= 0
    report.reject("bad time", df[~ok_fmt])
    df, day, minute = df[ok_fmt], day[ok_fmt], minute[ok_fmt]
    b = minute - cal.session_open
    ok = (b >= 0) & (b < cal.bins_per_day)
    report.reject("out of session", df[~ok])
    df, day, b = df[ok], day[ok], b[ok]

    close = pd.to_numeric(df["close"], errors="coerce")
    volume = pd.to_numeric(df["volume"], errors="coerce")
    ok = np.isfinite(close) & (close > 0)
    report.reject("non-positive price", df[~ok])
    ok_v = ok & volume.notna() & (volume >= 0)
    report.reject("bad volume", df[ok & ~ok_v])
    df, day, b, close, volume = df[ok_v], day[ok_v], b[ok_v], close[ok_v], volume[ok_v]

    if tickers is None:
        tickers = sorted(str(tk) for tk in df["ticker"].unique())
    tix = {tk: i for i, tk in enumerate(tickers)}
    si = pd.Series(_map_unique(df["ticker"], lambda tk: tix.get(str(tk), -1)), index=df.index)
    known = si >= 0
    report.reject("unknown ticker", df[~known])
    df, day, b, close, volume, si = (x[known] for x in (df, day, b, close, volume, si))

    flat = (day * cal.bins_per_day + b).to_numpy()
    si = si.to_numpy(dtype=np.int64)
    close = close.to_numpy(dtype=float)
    volume = volume.to_numpy(dtype=np.int64)

    key = si * cal.n_bins + flat
    order = np.lexsort((volume, close, key))
    key, close, volume, si, flat = key[order], close[order], volume[order], si[order], flat[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    if not first.all():
        grp = np.cumsum(first) - 1
        same = np.ones(len(key), dtype=bool)
        same[1:] = ((close[1:] == close[:-1]) & (volume[1:] == volume[:-1])) | first[1:]
        conflict_grp = np.zeros(grp[-1] + 1, dtype=bool)
        np.logical_or.at(conflict_grp, grp, ~same)
        drop = conflict_grp[grp]
        n_conf = int(drop.sum())
        if n_conf:
            report.rejected["conflicting duplicate"] = n_conf
        n_dup = int((~first & ~drop).sum())
        if n_dup:
            report.rejected["identical duplicate"] = n_dup
        keep = first & ~drop
        close, volume, si, flat = close[keep], volume[keep], si[keep], flat[keep]

    shape = (len(tickers), cal.n_bins)
    closes = np.full(shape, np.nan)
    volumes = np.zeros(shape, dtype=np.int64)
    has_bar = np.zeros(shape, dtype=bool)
    closes[si, flat] = close
    volumes[si, flat] = volume
    has_bar[si, flat] = True
    report.n_accepted = int(len(si))
    return BarPanel(tuple(tickers), cal, closes, volumes, has_bar), report


def _map_unique(col: pd.Series, fn) -> np.ndarray:
    """Apply ``fn`` once per distinct value of a low-cardinality column."""
    codes, uniq = pd.factorize(col, use_na_sentinel=False)
    return np.array([fn(u) for u in uniq], dtype=np.int64)[codes] if len(col) else np.zeros(0, np.int64)


def _parse_hhmm(s) -> int:
    """Minutes since midnight for ``HH:MM``, -1 when malformed."""
    s = str(s)
    if len(s) != 5 or s[2] != ":" or not (s[:2].isdigit() and s[3:].isdigit()):
        return -1
    hh, mm = int(s[:2]), int(s[3:])
    return hh * 60 + mm if hh < 24 and mm < 60 else -1


def read_bars(path) -> pd.DataFrame:
    df = pd.read_csv(
        path,
        dtype={"date": str, "time": str, "ticker": str},
        float_precision="round_trip",
        encoding="utf-8",
    )
    if list(df.columns) != BAR_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(BAR_COLUMNS)}, got {','.join(df.columns)}")
    return df


def write_bars(panel: BarPanel, path) -> None:
    # repr gives the shortest round-trip form, same as pandas but much faster here
    rec = panel.records()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(BAR_COLUMNS) + "\n")
        fh.writelines(
            f"{d},{t},{k},{c!r},{v}\n"
            for d, t, k, c, v in zip(rec["date"], rec["time"], rec["ticker"], rec["close"].tolist(),
                                     rec["volume"].tolist())
        )


def intraday_mean_curve(panel: BarPanel, quantity: str = "abs-return", events: EventIndex | None = None,
                        smooth: int = 0, with_stderr: bool = False):
    """Average of ``quantity`` per bin-of-day, normalized to mean 1.

    ``quantity`` is ``"abs-return"`` (masked bins skipped) or
    ``"event-count"`` (``events`` counted over every stock-bin slot).
    Bins without observations are interpolated from their neighbours;
    ``smooth`` > 0 applies a centred moving average of half-width ``smooth``.
    """
    cal = panel.calendar
    if quantity == "abs-return":
        return seasonal_curve(panel.abs_returns(), panel.valid, cal.bins_per_day, smooth, with_stderr)
    if quantity == "event-count":
        if events is None:
            raise ValueError("event-count curve needs events")
        return event_curve(events, panel.n_stocks, cal, smooth, with_stderr)
    raise ValueError(f"unknown quantity {quantity!r}")


def seasonal_curve(values, valid, bins_per_day, smooth=0, with_stderr=False):
    n_rows = values.shape[0]
    v = np.where(valid, values, 0.0).reshape(n_rows, -1, bins_per_day)
    ok = valid.reshape(n_rows, -1, bins_per_day)
    s1 = v.sum(axis=(0, 1))
    s2 = (v * v).sum(axis=(0, 1))
    n = ok.sum(axis=(0, 1))
    return _finish_curve(s1, s2, n, smooth, with_stderr)


def event_curve(events: EventIndex, n_stocks, cal, smooth=0, with_stderr=False):
    bpd = cal.bins_per_day
    counts = np.bincount(events.t % bpd, minlength=bpd).astype(float)
    # second moment from per-slot counts; duplicates in one slot counted as such
    slot, mult = np.unique(events.stock * cal.n_bins + events.t, return_counts=True)
    s2 = np.bincount(slot % cal.n_bins % bpd, weights=mult.astype(float) ** 2, minlength=bpd)
    n = np.full(bpd, n_stocks * cal.n_days)
    return _finish_curve(counts, s2, n, smooth, with_stderr)


def _finish_curve(s1, s2, n, smooth, with_stderr):
    if n.sum() == 0:
        raise ValueError("empty panel")
    have = n > 0
    mean = np.zeros(len(n))
    var = np.zeros(len(n))
    mean[have] = s1[have] / n[have]
    var[have] = np.maximum(s2[have] / n[have] - mean[have] ** 2, 0.0)
    se = np.zeros(len(n))
    se[have] = np.sqrt(var[have] / n[have])
    if not have.all():
        idx = np.arange(len(n))
        mean = np.interp(idx, idx[have], mean[have])
        se = np.interp(idx, idx[have], se[have])
    if smooth > 0:
        kern = np.ones(2 * smooth + 1)
        norm = np.convolve(np.ones(len(mean)), kern, mode="same")
        mean = np.convolve(mean, kern, mode="same") / norm
    grand = mean.mean()
    if not grand > 0:
        raise ValueError("seasonal curve has zero mean")
    curve = mean / grand
    curve = curve / curve.mean()
    if with_stderr:
        return curve, se / grand
    return curve


def _as_date(d) -> dt.date:
    if isinstance(d, dt.datetime):
        return d.date()
    if isinstance(d, dt.date):
        return d
    return dt.date.fromisoformat(str(d))
