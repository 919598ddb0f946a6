"""Price-jump, news and tail-dependence analytics for one-minute stock data."""

__version__ = "0.1.0"

from jumplab.timebase import BarPanel, BinStamp, EventIndex, TradingCalendar, build_panel, intraday_mean_curve
from jumplab.newsfeed import NewsEvent, RawNewsRecord, filter_news, merge_feeds
from jumplab.jumps import JumpTable, TailFit, baseline, classify_news_jumps, detect_jumps, hill, score_ccdf
from jumplab.eventstudy import EventProfile, RelaxFit, conditional_rate, fit_relaxation, pre_post_baseline, vol_profile
from jumplab.collective import (
    CoJumpDecomposition,
    IndicatorPanel,
    MarketJumpSeries,
    chi_series,
    cojump_matrix,
    explained_fraction,
    sector_jumps,
)
from jumplab.taildep import PairedSample, TailCurve, bar_pairs, tail_curve, trade_pairs

__all__ = [
    "BarPanel",
    "BinStamp",
    "CoJumpDecomposition",
    "EventIndex",
    "EventProfile",
    "IndicatorPanel",
    "JumpTable",
    "MarketJumpSeries",
    "NewsEvent",
    "PairedSample",
    "RawNewsRecord",
    "RelaxFit",
    "TailCurve",
    "TailFit",
    "TradingCalendar",
    "bar_pairs",
    "baseline",
    "build_panel",
    "chi_series",
    "classify_news_jumps",
    "cojump_matrix",
    "conditional_rate",
    "detect_jumps",
    "explained_fraction",
    "filter_news",
    "fit_relaxation",
    "hill",
    "intraday_mean_curve",
    "merge_feeds",
    "pre_post_baseline",
    "score_ccdf",
    "sector_jumps",
    "tail_curve",
    "trade_pairs",
    "vol_profile",
]
