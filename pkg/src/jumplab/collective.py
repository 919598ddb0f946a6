"""Co-jump matrix, Marcenko-Pastur filtering and collective (market/sector) jumps."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from jumplab.timebase import EventIndex


@dataclass(frozen=True)
class IndicatorPanel:
    """theta[i, t] is True when stock i jumps in bin t."""

    theta: np.ndarray
    p: np.ndarray = field(init=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=bool)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "p", theta.mean(axis=1) if theta.shape[1] else np.zeros(theta.shape[0]))

    @classmethod
    def from_events(cls, events: EventIndex, n_stocks: int, n_bins: int) -> "IndicatorPanel":
        return cls(events.indicator(n_stocks, n_bins))

    @property
    def n_stocks(self) -> int:
        return self.theta.shape[0]

    @property
    def n_bins(self) -> int:
        return self.theta.shape[1]


@dataclass(frozen=True)
class CoJumpDecomposition:
    c: np.ndarray
    corr: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mp_band: tuple[float, float]
    kept: np.ndarray
    excluded: list
    mp_reliable: bool = True

    @property
    def n_outside_band(self) -> int:
        lo, hi = self.mp_band
        return int(((self.eigenvalues < lo) | (self.eigenvalues > hi)).sum())

    @property
    def market_mode(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def market_mode_full(self, n_stocks: int) -> np.ndarray:
        """Leading eigenvector on the full universe, zero for excluded stocks."""
        v = np.zeros(n_stocks)
        v[self.kept] = self.market_mode
        return v

    def to_json(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "mp_band": list(self.mp_band),
            "n_outside_band": self.n_outside_band,
            "mp_reliable": self.mp_reliable,
            "market_mode": self.market_mode.tolist(),
            "excluded": self.excluded,
        }


def cojump_matrix(ind: IndicatorPanel, chunk: int = 65536) -> CoJumpDecomposition:
    """c_ij = T^-1 sum_t theta_i theta_j - p_i p_j, its correlation form and spectrum.

    Stocks that never jump (or always jump) have zero variance and are
    dropped; ``excluded`` lists their rows. The eigen-decomposition is done
    on the correlation matrix, sorted descending, with the leading vector
    sign-fixed to a positive sum.
    """
    p = ind.p
    keep = (p > 0) & (p < 1)
    excluded = [{"row": int(i), "p": float(p[i])} for i in np.nonzero(~keep)[0]]
    theta = ind.theta[keep]
    N, T = theta.shape
    if N == 0:
        raise ValueError("no stock has a jump probability strictly between 0 and 1")
    reliable = T > N
    if not reliable:
        warnings.warn(f"N={N} >= T={T}: Marcenko-Pastur band is unreliable", stacklevel=2)
    co = np.zeros((N, N))
    for lo in range(0, T, chunk):
        block = theta[:, lo : lo + chunk].astype(np.float64)
        co += block @ block.T
    pk = p[keep]
    c = co / T - np.outer(pk, pk)
    c = (c + c.T) / 2
    d = np.sqrt(np.diag(c))
    corr = c / np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    vals, vecs = np.linalg.eigh(corr)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if vecs[:, 0].sum() < 0:
        vecs[:, 0] = -vecs[:, 0]
    q = N / T
    band = ((1 - np.sqrt(q)) ** 2, (1 + np.sqrt(q)) ** 2)
    return CoJumpDecomposition(c, corr, vals, vecs, band, np.nonzero(keep)[0], excluded, reliable)


@dataclass(frozen=True)
class MarketJumpSeries:
    chi: np.ndarray
    threshold: float
    events: np.ndarray

    def with_threshold(self, threshold: float) -> "MarketJumpSeries":
        return MarketJumpSeries(self.chi, threshold, np.nonzero(self.chi > threshold)[0])


def chi_series(ind: IndicatorPanel, v1: np.ndarray, threshold: float = 0.1) -> MarketJumpSeries:
    """chi^t = N^-1/2 sum_i theta_i^t v1_i; market jumps are bins with chi > threshold.

    With a uniform mode v1_i = N^-1/2 this is the fraction of stocks that
    jump in the bin. ``v1`` is sign-fixed to a positive sum.
    """
    v1 = np.asarray(v1, dtype=float)
    if v1.shape != (ind.n_stocks,):
        raise ValueError("v1 must have one entry per stock")
    if v1.sum() < 0:
        v1 = -v1
    chi = (v1 @ ind.theta) / np.sqrt(ind.n_stocks)
    return MarketJumpSeries(chi, float(threshold), np.nonzero(chi > threshold)[0])


def uniform_mode(n: int) -> np.ndarray:
    return np.full(n, 1.0 / np.sqrt(n))


def coincident(jumps: EventIndex, market_bins: np.ndarray, half_window: int, bins_per_day: int) -> np.ndarray:
    """Mask over jumps with a market bin in [t - w, t + w] inside the same session."""
    mb = np.unique(np.asarray(market_bins, dtype=np.int64))
    if len(mb) == 0 or len(jumps) == 0:
        return np.zeros(len(jumps), dtype=bool)
    day0 = jumps.t - jumps.t % bins_per_day
    lo = np.maximum(jumps.t - half_window, day0)
    hi = np.minimum(jumps.t + half_window, day0 + bins_per_day - 1)
    return np.searchsorted(mb, hi, side="right") > np.searchsorted(mb, lo, side="left")


def explained_fraction(jumps: EventIndex, market, half_window: int = 0, bins_per_day: int = 390) -> dict:
    """Share of individual jumps within ``half_window`` bins of a collective jump.

    ``market`` is a :class:`MarketJumpSeries`, a list of them (union, e.g.
    market plus sectors) or an array of bins. half_window = 2 realizes a
    five-minute interval.
    """
    if len(jumps) == 0:
        raise ValueError("no jumps")
    if isinstance(market, MarketJumpSeries):
        bins = market.events
    elif isinstance(market, (list, tuple)):
        parts = [m.events if isinstance(m, MarketJumpSeries) else np.asarray(m) for m in market]
        bins = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    else:
        bins = np.asarray(market)
    hit = coincident(jumps, bins, half_window, bins_per_day)
    return {"fraction": float(hit.mean()), "explained": int(hit.sum()), "total": len(jumps),
            "n_collective": int(len(np.unique(bins))), "half_window": int(half_window)}


def sector_jumps(ind: IndicatorPanel, sectors, threshold: float = 0.1, min_members: int = 5):
    """Per-sector chi (fraction of member stocks jumping) and its exceedances.

    ``sectors`` holds one label per stock row. Returns ``(series, report)``
    where ``series`` maps label to :class:`MarketJumpSeries` and ``report``
    lists sectors skipped for having fewer than ``min_members`` stocks.
    """
    labels = np.asarray(sectors, dtype=object)
    if labels.shape != (ind.n_stocks,):
        raise ValueError("need one sector label per stock")
    if any(lab is None or lab == "" for lab in labels):
        raise ValueError("every stock needs a sector label")
    out, skipped = {}, []
    for lab in sorted(set(labels.tolist())):
        rows = np.nonzero(labels == lab)[0]
        if len(rows) < min_members:
            skipped.append({"sector": lab, "members": int(len(rows))})
            continue
        chi = ind.theta[rows].sum(axis=0) / len(rows)
        out[lab] = MarketJumpSeries(chi, float(threshold), np.nonzero(chi > threshold)[0])
    return out, skipped
