"""Quantile tail dependence C(p) between absolute returns and volumes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from jumplab.timebase import BarPanel

TRADE_COLUMNS = ["timestamp", "ticker", "price", "size"]
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class PairedSample:
    x: np.ndarray
    v: np.ndarray
    resolution: str

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape:
            raise ValueError("x and v must have equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("paired sample must be finite")
        if np.any(v < 0):
            raise ValueError("volumes must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class TailCurve:
    grid: np.ndarray
    c_of_p: np.ndarray
    k: np.ndarray
    ci: np.ndarray
    ties: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"p": self.grid, "c": self.c_of_p, "k": self.k, "ci": self.ci})

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def read_trades(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"timestamp": str, "ticker": str}, float_precision="round_trip", encoding="utf-8")
    if list(df.columns) != TRADE_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(TRADE_COLUMNS)}, got {','.join(df.columns)}")
    return df


def write_trades(tape: pd.DataFrame, path) -> None:
    tape.loc[:, TRADE_COLUMNS].to_csv(path, index=False, lineterminator="\n")


def trade_pairs(trades: pd.DataFrame) -> tuple[PairedSample, dict]:
    """Trade-by-trade |log price change| paired with the size of the later trade.

    Pairs never straddle two sessions; stock-sessions with fewer than two
    trades are skipped. Input order is kept within a (ticker, date) group,
    so ties in timestamp resolve to file order.
    """
    df = trades.loc[:, TRADE_COLUMNS]
    price = pd.to_numeric(df["price"], errors="coerce").to_numpy(dtype=float)
    if not np.all(price > 0):
        raise ValueError("trade prices must be positive")
    ts = df["timestamp"].astype(str)
    date = ts.str.slice(0, 10).to_numpy()
    ticker = df["ticker"].astype(str).to_numpy()
    # np.lexsort is stable, so equal timestamps keep file order
    order = np.lexsort((ts.to_numpy(), date, ticker))
    price, date, ticker = price[order], date[order], ticker[order]
    size = pd.to_numeric(df["size"], errors="coerce").to_numpy(dtype=float)[order]
    if not np.all(np.isfinite(size)) or np.any(size < 0):
        raise ValueError("trade sizes must be nonnegative numbers")
    same = np.zeros(len(df), dtype=bool)
    same[1:] = (date[1:] == date[:-1]) & (ticker[1:] == ticker[:-1])
    x = np.abs(np.log(price[1:] / price[:-1]))[same[1:]]
    v = size[1:][same[1:]]
    starts = np.nonzero(~same)[0]
    lengths = np.diff(np.append(starts, len(df)))
    report = {"n_trades": int(len(df)), "n_sessions": int(len(starts)), "n_pairs": int(len(x)),
              "skipped_sessions": int((lengths < 2).sum())}
    return PairedSample(x, v, "trade"), report


def bar_pairs(panel: BarPanel, standardize: bool = True, stock: int | None = None) -> PairedSample:
    """(|r|, V) over unmasked bins, one stock or pooled.

    With ``standardize`` each stock's |r| and V are divided by their
    medians (means where the median is zero) before pooling.
    """
    rows = range(panel.n_stocks) if stock is None else [stock]
    xs, vs = [], []
    for i in rows:
        ok = panel.valid[i]
        x = np.abs(panel.returns[i, ok])
        v = panel.volumes[i, ok].astype(float)
        if standardize and len(x):
            x = x / _robust_scale(x)
            v = v / _robust_scale(v)
        xs.append(x)
        vs.append(v)
    return PairedSample(np.concatenate(xs), np.concatenate(vs), "bar")


def _robust_scale(a):
    med = float(np.median(a))
    if med > 0:
        return med
    mean = float(a.mean())
    return mean if mean > 0 else 1.0


def default_grid(n: int, points: int = 40) -> np.ndarray:
    return np.geomspace(0.5, 10.0 / n, points)


def _ranks_desc(a):
    order = np.argsort(-a, kind="stable")
    rank = np.empty(len(a), dtype=np.int64)
    rank[order] = np.arange(len(a))
    return order, rank


def tail_curve(sample: PairedSample, grid=None, min_k: int = 10) -> TailCurve:
    """C(p) = |top-k(x) & top-k(v)| / k with k = ceil(p n).

    The top-k sets are exactly k indices each, taken from a stable
    descending sort (ties resolve to the earlier index), so
    P(|r| > R_p | V > V_p) and P(V > V_p | |r| > R_p) coincide. Grid points
    with k < ``min_k`` are dropped. ``ci`` is the Wilson-score 95%
    half-width for a binomial(k, C) proportion.
    """
    n = len(sample)
    if n < 100:
        raise ValueError(f"need at least 100 pairs, have {n}")
    grid = default_grid(n) if grid is None else np.asarray(grid, dtype=float)
    grid = np.sort(grid)[::-1]
    k = np.ceil(np.round(grid * n, 9)).astype(np.int64)
    keep = (k >= min_k) & (k <= n)
    grid, k = grid[keep], k[keep]
    ox, rx = _ranks_desc(sample.x)
    ov, rv = _ranks_desc(sample.v)
    both = np.sort(np.maximum(rx, rv))
    inter = np.searchsorted(both, k, side="left")
    c = inter / k
    ties = _has_boundary_tie(sample.x, ox, k) or _has_boundary_tie(sample.v, ov, k)
    return TailCurve(grid, c, k, wilson_halfwidth(c, k), ties)


def _has_boundary_tie(a, order, k) -> bool:
    inner = k[k < len(a)]
    return bool(np.any(a[order[inner - 1]] == a[order[inner]]))


def wilson_halfwidth(c, k, z: float = _Z95):
    c = np.asarray(c, dtype=float)
    k = np.asarray(k, dtype=float)
    return z / (1 + z * z / k) * np.sqrt(c * (1 - c) / k + z * z / (4 * k * k))
