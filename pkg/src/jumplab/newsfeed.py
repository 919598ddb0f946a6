"""News record parsing, relevance filtering, avalanche deduplication and feed merging."""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from jumplab.timebase import BinStamp, EventIndex, TradingCalendar

NEWS_COLUMNS = ["timestamp", "source", "story_id", "tickers", "headline"]

# Automated or market-wide items that carry no firm-specific information.
DEFAULT_BLOCKLIST = (
    "Imbalance",
    "Sector roundup",
    "Market Talk",
    "Stocks to Watch",
    "Earnings Calendar",
)

_EPOCH = dt.datetime(1970, 1, 1)


@dataclass(frozen=True)
class RawNewsRecord:
    timestamp: dt.datetime
    source: str
    story_id: str
    tickers: tuple[str, ...]
    headline: str


@dataclass(frozen=True)
class NewsEvent:
    stamp: BinStamp
    ticker: str
    source: str
    story_id: str
    timestamp: dt.datetime
    headline: str = ""

    def sort_key(self):
        return (self.timestamp, self.ticker, self.source, self.story_id)


@dataclass
class FilterReport:
    n_records: int = 0
    bad_record: int = 0
    avalanche: int = 0
    blocklisted: int = 0
    non_trading_day: int = 0
    out_of_session: int = 0
    unknown_ticker: int = 0
    no_name: int = 0
    n_events: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def read_news(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if list(df.columns) != NEWS_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(NEWS_COLUMNS)}, got {','.join(df.columns)}")
    return df


def records_frame(records) -> pd.DataFrame:
    """Raw records as a string frame in news-file layout."""
    if isinstance(records, pd.DataFrame):
        return records.loc[:, NEWS_COLUMNS].astype(str)
    rows = [
        {"timestamp": r.timestamp.isoformat() if isinstance(r.timestamp, dt.datetime) else str(r.timestamp),
         "source": r.source, "story_id": r.story_id,
         "tickers": r.tickers if isinstance(r.tickers, str) else "|".join(r.tickers), "headline": r.headline}
        for r in records
    ]
    return pd.DataFrame(rows, columns=NEWS_COLUMNS, dtype=str)


def events_frame(events) -> pd.DataFrame:
    """Events back in news-file layout, one row per story (tickers re-joined)."""
    if not events:
        return pd.DataFrame(columns=NEWS_COLUMNS)
    df = pd.DataFrame({
        "timestamp": [e.timestamp.strftime("%Y-%m-%dT%H:%M:%S") for e in events],
        "source": [e.source for e in events],
        "story_id": [e.story_id for e in events],
        "tickers": [e.ticker for e in events],
        "headline": [e.headline for e in events],
    })
    keys = ["timestamp", "source", "story_id", "headline"]
    out = df.groupby(keys, sort=False)["tickers"].agg("|".join).reset_index()
    return out.loc[:, NEWS_COLUMNS]


def write_news(events, path) -> None:
    events_frame(events).to_csv(path, index=False, lineterminator="\n")


def read_aliases(path) -> dict[str, list[str]]:
    """``TICKER = Company name`` per line; a ticker may repeat to add aliases."""
    out: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, name = line.partition("=")
            if not sep or not key.strip() or not name.strip():
                raise ValueError(f"{path}:{lineno}: expected 'TICKER = name'")
            out.setdefault(key.strip(), []).append(name.strip())
    return out


def read_blocklist(path) -> list[str]:
    pats = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                re.compile(line)
            except re.error as err:
                raise ValueError(f"{path}:{lineno}: bad pattern {line!r}: {err}") from None
            pats.append(line)
    return pats


def _name_pattern(ticker: str, names) -> re.Pattern:
    if names:
        return re.compile("|".join(re.escape(n) for n in names), re.IGNORECASE)
    # no alias configured: the bare symbol as a whole word
    return re.compile(rf"(?<![A-Za-z0-9]){re.escape(ticker)}(?![A-Za-z0-9])", re.IGNORECASE)


def filter_news(records, universe, cal: TradingCalendar, blocklist=DEFAULT_BLOCKLIST,
                aliases: dict | None = None) -> tuple[list[NewsEvent], FilterReport]:
    """Relevant, deduplicated news events for ``universe`` on ``cal``.

    Steps: keep the earliest record of each story_id (ties broken on
    source, tickers, headline so input order never matters); drop
    headlines matching any blocklist pattern (case-insensitive regex);
    drop records off the calendar or outside the session; emit one event
    per listed universe ticker whose company name (any alias,
    case-insensitive substring) appears in the headline.
    """
    df = records_frame(records).reset_index(drop=True)
    rep = FilterReport(n_records=len(df))
    if df.empty:
        return [], rep
    ts = pd.to_datetime(df["timestamp"], format="ISO8601", errors="coerce")
    if getattr(ts.dt, "tz", None) is not None:
        ts = ts.dt.tz_localize(None)
    bad = ts.isna() | (df["story_id"].str.strip() == "")
    rep.bad_record = int(bad.sum())
    df = df.loc[~bad].assign(_ts=ts[~bad])

    df = df.sort_values(["_ts", "source", "tickers", "headline", "story_id"], kind="mergesort")
    first = ~df["story_id"].duplicated()
    rep.avalanche = int((~first).sum())
    df = df.loc[first]

    pats = list(blocklist or ())
    if pats:
        rx = re.compile("|".join(f"(?:{p})" for p in pats), re.IGNORECASE)
        blocked = df["headline"].map(lambda h: rx.search(h) is not None).astype(bool)
        rep.blocklisted = int(blocked.sum())
        df = df.loc[~blocked]

    days = {d: i for i, d in enumerate(cal.trading_days)}
    day = df["_ts"].dt.date.map(days)
    off = day.isna()
    rep.non_trading_day = int(off.sum())
    df, day = df.loc[~off], day[~off].astype(np.int64)
    minute = df["_ts"].dt.hour * 60 + df["_ts"].dt.minute - cal.session_open
    out = (minute < 0) | (minute >= cal.bins_per_day)
    rep.out_of_session = int(out.sum())
    df = df.loc[~out].assign(_day=day[~out], _bin=minute[~out])

    df = df.assign(ticker=df["tickers"].str.split("|")).explode("ticker")
    df["ticker"] = df["ticker"].fillna("").str.strip()
    df = df.loc[df["ticker"] != ""]
    known = df["ticker"].isin(set(universe))
    rep.unknown_ticker = int((~known).sum())
    df = df.loc[known]
    aliases = aliases or {}
    named = np.zeros(len(df), dtype=bool)
    tick = df["ticker"].to_numpy()
    heads = df["headline"].to_numpy()
    for tk in np.unique(tick):
        rows = np.nonzero(tick == tk)[0]
        pat = _name_pattern(tk, aliases.get(tk))
        named[rows] = [pat.search(heads[r]) is not None for r in rows]
    rep.no_name = int((~named).sum())
    df = df.loc[named].drop_duplicates(["story_id", "ticker"])

    events = [
        NewsEvent(BinStamp(int(d), int(b)), tk, src, sid, t.to_pydatetime(), h)
        for d, b, tk, src, sid, t, h in zip(df["_day"], df["_bin"], df["ticker"], df["source"],
                                              df["story_id"], df["_ts"], df["headline"])
    ]
    events.sort(key=NewsEvent.sort_key)
    rep.n_events = len(events)
    return events, rep


def news_index(events, tickers, cal: TradingCalendar) -> EventIndex:
    tix = {tk: i for i, tk in enumerate(tickers)}
    bpd = cal.bins_per_day
    stock = [tix[e.ticker] for e in events]
    t = [e.stamp.day * bpd + e.stamp.bin for e in events]
    return EventIndex(np.array(stock, dtype=np.int64), np.array(t, dtype=np.int64))


@dataclass(frozen=True)
class DelayHistogram:
    """Secondary-minus-primary delays (minutes) of matched isolated pairs."""

    delays: np.ndarray
    edges: np.ndarray
    counts: np.ndarray = field(init=False)
    n_covered: int = 0
    n_appended: int = 0

    def __post_init__(self):
        counts, _ = np.histogram(self.delays, bins=self.edges)
        object.__setattr__(self, "counts", counts)

    @property
    def n_matched(self) -> int:
        return len(self.delays)

    @property
    def mean(self) -> float:
        return float(np.mean(self.delays)) if len(self.delays) else float("nan")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"delay_lo": self.edges[:-1], "delay_hi": self.edges[1:], "count": self.counts})

    def summary(self) -> dict:
        d = np.asarray(self.delays)
        return {"n_matched": self.n_matched, "n_covered": self.n_covered, "n_appended": self.n_appended,
                "mean_delay": self.mean, "median_delay": float(np.median(d)) if len(d) else float("nan"),
                "stderr": float(d.std(ddof=1) / np.sqrt(len(d))) if len(d) > 1 else float("nan")}


def _minutes(events) -> np.ndarray:
    return np.array([(e.timestamp - _EPOCH).total_seconds() / 60.0 for e in events])


def _isolated(t, silence) -> np.ndarray:
    gap = np.diff(t, prepend=-np.inf)
    return gap >= silence


def merge_feeds(primary, secondary, match_window: float = 15.0, silence: float = 30.0,
                bin_width: float = 0.5) -> tuple[list[NewsEvent], DelayHistogram]:
    """Union of two filtered feeds with cross-feed duplicates removed.

    Per ticker, a primary and a secondary event pair up when they are at
    most ``match_window`` minutes apart and each follows ``silence``
    minutes without news for that ticker in its own feed; pairs are taken
    nearest first. Each pair adds t(secondary) - t(primary) to the delay
    histogram and survives as whichever event came first (primary on
    ties). A secondary event within ``match_window`` of any primary event
    of its ticker is a duplicate even when the silence test fails, and is
    dropped; all others are appended. Times are wall-clock minutes.
    """
    if not match_window > 0 or silence < 0:
        raise ValueError("need match_window > 0 and silence >= 0")
    by_p, by_s = _by_ticker(primary), _by_ticker(secondary)
    merged: list[NewsEvent] = []
    delays: list[float] = []
    n_covered = n_appended = 0
    for tk in sorted(set(by_p) | set(by_s)):
        pe, se = by_p.get(tk, []), by_s.get(tk, [])
        tp, ts = _minutes(pe), _minutes(se)
        keep_p = list(pe)
        if len(pe) and len(se):
            pairs = _match(tp, ts, _isolated(tp, silence), _isolated(ts, silence), match_window)
            for i, j in pairs:
                delays.append(ts[j] - tp[i])
                if ts[j] < tp[i]:
                    keep_p[i] = se[j]
            lo = np.searchsorted(tp, ts - match_window, side="left")
            hi = np.searchsorted(tp, ts + match_window, side="right")
            covered = hi > lo
        else:
            covered = np.zeros(len(se), dtype=bool)
        n_covered += int(covered.sum())
        extra = [e for e, c in zip(se, covered) if not c]
        n_appended += len(extra)
        merged.extend(keep_p)
        merged.extend(extra)
    merged.sort(key=NewsEvent.sort_key)
    edges = np.arange(-match_window, match_window + bin_width / 2, bin_width)
    return merged, DelayHistogram(np.array(delays), edges, n_covered, n_appended)


def _by_ticker(events) -> dict[str, list[NewsEvent]]:
    out: dict[str, list[NewsEvent]] = {}
    for e in sorted(events, key=NewsEvent.sort_key):
        out.setdefault(e.ticker, []).append(e)
    return out


def _match(tp, ts, iso_p, iso_s, window):
    ip = np.nonzero(iso_p)[0]
    cand = []
    for i in ip:
        lo = np.searchsorted(ts, tp[i] - window, side="left")
        hi = np.searchsorted(ts, tp[i] + window, side="right")
        for j in range(lo, hi):
            if iso_s[j]:
                cand.append((abs(ts[j] - tp[i]), tp[i], ts[j], i, j))
    cand.sort()
    used_p, used_s, pairs = set(), set(), []
    for _, _, _, i, j in cand:
        if i in used_p or j in used_s:
            continue
        used_p.add(i)
        used_s.add(j)
        pairs.append((i, j))
    return pairs
