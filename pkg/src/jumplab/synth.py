"""Seeded generators with known ground truth for every estimator.

Each generator returns its data plus a :class:`GroundTruth` sidecar. The
same seed always gives identical output; components draw from independent
child streams of one ``SeedSequence`` so turning one feature on does not
reshuffle the others.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from jumplab.timebase import BarPanel, TradingCalendar

SCHEMA_VERSION = 1

_STREAMS = ("returns", "shocks", "news", "coupled", "secondary", "market", "trades", "volumes", "missing")


def _rng(seed: int, stream: str) -> np.random.Generator:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return np.random.default_rng(children[_STREAMS.index(stream)])


@dataclass
class GenConfig:
    seed: int = 0
    n_stocks: int = 20
    n_days: int = 20
    start: str = "2006-01-03"
    session_open: int = 570
    session_close: int = 960

    # returns
    tail_alpha: float = 4.0
    zero_frac: float = 0.0
    base_vol: float = 1e-3
    vol_dispersion: float = 0.0
    u_amplitude: float = 0.0
    missing_frac: float = 0.0

    # planted shocks with post-shock relaxation sigma_inf * (1 + amp * tau**-beta)
    shock_rate: float = 0.0
    shock_size: float = 10.0
    shock_relax: tuple = (1.0, 2.0, 0.5)
    relax_horizon: int = 200

    # volumes
    volume_scale: float = 1000.0
    volume_alpha: float = 1.5
    volume_vol_link: float = 1.0

    # news (Hawkes on the concatenated intraday clock)
    news_rate: float = 0.0
    news_branching: float = 0.0
    news_decay: float = 0.1
    news_u_amplitude: float = 0.0
    news_coupling: float = 0.0
    news_jump_alpha: float = 2.7
    news_jump_min: float = 4.0
    news_relax: tuple = (1.0, 2.0, 1.0)
    news_noise: bool = True
    secondary_overlap: float = 0.25
    secondary_extra: float = 0.3
    secondary_delay: tuple = (1.5, 2.0)

    # collective jumps
    idio_prob: float = 0.004
    market_rate: float = 0.0
    participation_alpha: float = 1.5
    participation_min: float = 0.1
    participation_fixed: float | None = None

    # trade tape
    n_trades: int = 100_000
    trade_coupled: bool = False
    trade_lambda: float = 1.0
    trade_exponent: float = 0.5
    trade_noise: float = 3.0
    trade_scale: float = 1e-4

    def calendar(self) -> TradingCalendar:
        days = pd.bdate_range(self.start, periods=self.n_days).date
        return TradingCalendar(tuple(days), self.session_open, self.session_close)

    def tickers(self) -> tuple[str, ...]:
        width = max(3, len(str(self.n_stocks)))
        return tuple(f"S{i:0{width}d}" for i in range(self.n_stocks))

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def company_name(ticker: str) -> str:
    return f"{ticker} Holdings"


@dataclass
class GroundTruth:
    generator: str
    config: dict
    truth: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {"schema_version": self.schema_version, "generator": self.generator, "config": self.config,
             "truth": self.truth},
            indent=1, sort_keys=True, default=_jsonable,
        ) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def read(cls, path) -> "GroundTruth":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported truth schema {obj.get('schema_version')}")
        return cls(obj["generator"], obj["config"], obj["truth"], obj["schema_version"])


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def u_shape(bins_per_day: int, amplitude: float) -> np.ndarray:
    """Intraday modulation 1 + a*cos(2*pi*b/B): high at open and close, mean 1."""
    return 1.0 + amplitude * np.cos(2 * np.pi * np.arange(bins_per_day) / bins_per_day)


def draw_abs_innovations(rng: np.random.Generator, size, alpha: float, zero_frac: float = 0.0) -> np.ndarray:
    """|eps| with mean 1 and an exact Pareto tail P(|eps| > x) ~ x**-alpha.

    The continuous part has a flat density on [0, x_t) spliced onto a Pareto
    tail of mass 1/(1+alpha); that mass makes the density continuous at x_t.
    A point mass ``zero_frac`` at zero mimics tick-size discreteness.
    """
    if not alpha > 1:
        raise ValueError("tail exponent must exceed 1 for a finite mean")
    if not 0 <= zero_frac < 1:
        raise ValueError("zero_frac must lie in [0, 1)")
    q = 1.0 / (1.0 + alpha)
    xt = 2.0 * (alpha - 1.0) / alpha
    u = rng.random(size)
    body = u < 1.0 - q
    x = np.empty(size)
    x[body] = u[body] / (1.0 - q) * xt
    x[~body] = xt * (q / (1.0 - u[~body])) ** (1.0 / alpha)
    if zero_frac > 0:
        x /= 1.0 - zero_frac
        x[rng.random(size) < zero_frac] = 0.0
    return x


def tail_prob(threshold: float, alpha: float, zero_frac: float = 0.0) -> float:
    """P(|eps| > threshold) for :func:`draw_abs_innovations`."""
    q = 1.0 / (1.0 + alpha)
    xt = 2.0 * (alpha - 1.0) / alpha / (1.0 - zero_frac)
    if threshold >= xt:
        return (1.0 - zero_frac) * q * (xt / threshold) ** alpha
    return (1.0 - zero_frac) * (1.0 - (1.0 - q) * threshold / xt)


def relax_curve(relax, horizon: int) -> np.ndarray:
    sigma_inf, amp, beta = relax
    tau = np.arange(1, horizon + 1, dtype=float)
    return sigma_inf * (1.0 + amp * tau ** (-beta))


def _shock_list(cfg: GenConfig, cal: TradingCalendar) -> dict:
    rng = _rng(cfg.seed, "shocks")
    n = rng.poisson(cfg.shock_rate * cfg.n_stocks * cfg.n_days)
    stock = rng.integers(0, cfg.n_stocks, n)
    t = rng.integers(0, cal.n_bins, n)
    order = np.lexsort((t, stock))
    return {"stock": stock[order], "t": t[order], "size": np.full(n, float(cfg.shock_size)),
            "kind": np.zeros(n, dtype=np.int8)}


def gen_returns(cfg: GenConfig, spikes: dict | None = None) -> tuple[BarPanel, GroundTruth]:
    """Bar panel of i.i.d. heavy-tailed returns with optional seasonality and shocks.

    ``spikes`` adds planted returns (dict of arrays ``stock``, ``t``,
    ``size`` in units of the local mean |r|, ``kind`` 0 = endogenous shock,
    1 = news jump); each is followed by its relaxation profile.
    """
    cal = cfg.calendar()
    bpd = cal.bins_per_day
    n, T = cfg.n_stocks, cal.n_bins
    rng = _rng(cfg.seed, "returns")
    scale = cfg.base_vol * np.exp(cfg.vol_dispersion * rng.standard_normal(n))
    absx = draw_abs_innovations(rng, (n, T), cfg.tail_alpha, cfg.zero_frac)
    sign = np.where(rng.random((n, T)) < 0.5, -1.0, 1.0)
    useason = np.tile(u_shape(bpd, cfg.u_amplitude), cal.n_days)
    mult = scale[:, None] * useason[None, :]

    planted = _shock_list(cfg, cal)
    if spikes is not None and len(spikes["t"]):
        planted = {k: np.concatenate([planted[k], np.asarray(spikes[k])]) for k in planted}
    order = np.lexsort((planted["t"], planted["stock"]))
    planted = {k: np.asarray(v)[order] for k, v in planted.items()}
    # a later spike on the same bin replaces an earlier one
    key = planted["stock"] * T + planted["t"]
    last = np.ones(len(key), dtype=bool)
    last[:-1] = key[1:] != key[:-1]
    planted = {k: v[last] for k, v in planted.items()}

    curves = {0: relax_curve(cfg.shock_relax, cfg.relax_horizon), 1: relax_curve(cfg.news_relax, cfg.relax_horizon)}
    relax = np.ones((n, T))
    ps, pt, pk = planted["stock"], planted["t"], planted["kind"]
    for j in range(len(pt)):
        i, t0 = ps[j], pt[j]
        end = min(t0 + cfg.relax_horizon, (t0 // bpd + 1) * bpd - 1)
        if j + 1 < len(pt) and ps[j + 1] == i:
            end = min(end, pt[j + 1] - 1)
        if end > t0:
            relax[i, t0 + 1 : end + 1] = curves[int(pk[j])][: end - t0]
    if len(pt):
        relax[ps, pt] = 1.0
        absx[ps, pt] = planted["size"]
    r = np.clip(sign * absx * mult * relax, -0.5, 0.5)

    closes = 50.0 * np.exp(np.log1p(np.concatenate([np.zeros((n, 1)), r[:, 1:]], axis=1)).cumsum(axis=1))
    vrng = _rng(cfg.seed, "volumes")
    pareto = (1.0 - vrng.random((n, T))) ** (-1.0 / cfg.volume_alpha)
    volumes = np.ceil(cfg.volume_scale * pareto * (useason * relax) ** cfg.volume_vol_link).astype(np.int64)
    has_bar = np.ones((n, T), dtype=bool)
    if cfg.missing_frac > 0:
        has_bar &= _rng(cfg.seed, "missing").random((n, T)) >= cfg.missing_frac
        volumes[~has_bar] = 0
        closes[~has_bar] = np.nan

    panel = BarPanel(cfg.tickers(), cal, closes, volumes, has_bar)
    truth = GroundTruth("gen_returns", cfg.to_json(), {
        "tail_alpha": cfg.tail_alpha,
        "mean_abs_innovation": 1.0,
        "stock_scale": scale,
        "u_curve": u_shape(bpd, cfg.u_amplitude),
        "shocks": _planted_rows(planted, cfg.tickers(), cal),
    })
    return panel, truth


def _planted_rows(planted, tickers, cal) -> dict:
    bpd = cal.bins_per_day
    return {
        "ticker": [tickers[i] for i in planted["stock"]],
        "date": [cal.trading_days[t // bpd].isoformat() for t in planted["t"]],
        "time": list(cal.time_strings()[np.asarray(planted["t"], dtype=np.int64) % bpd]),
        "t": planted["t"],
        "stock": planted["stock"],
        "size": planted["size"],
        "kind": ["shock" if k == 0 else "news" for k in planted["kind"]],
    }


def hawkes_times(rng: np.random.Generator, horizon: float, rate: float, branching: float, decay: float) -> np.ndarray:
    """Stationary-rate Hawkes times on [0, horizon) via the cluster representation.

    Exponential kernel with integral ``branching`` and decay ``decay``
    (per minute); ``rate`` is the stationary intensity mu / (1 - branching).
    """
    if not 0 <= branching < 1:
        raise ValueError("branching must lie in [0, 1)")
    mu = rate * (1.0 - branching)
    gen = np.sort(rng.random(rng.poisson(mu * horizon)) * horizon)
    out = [gen]
    while len(gen) and branching > 0:
        kids = rng.poisson(branching, len(gen))
        parents = np.repeat(gen, kids)
        gen = parents + rng.exponential(1.0 / decay, len(parents))
        gen = gen[gen < horizon]
        out.append(gen)
    return np.sort(np.concatenate(out))


_VERBS = ("reports", "announces", "comments on", "updates", "confirms", "wins", "files")
_OBJECTS = ("quarterly results", "new contract", "guidance", "management change", "product launch",
            "share buyback", "merger talks", "regulatory review")


def gen_news(cfg: GenConfig) -> tuple[pd.DataFrame, pd.DataFrame, dict, GroundTruth]:
    """Primary and secondary raw news feeds plus the news-coupled jump spikes.

    Returns ``(primary_records, secondary_records, spikes, truth)``; pass
    ``spikes`` to :func:`gen_returns` to plant the coupled jumps. With
    ``news_noise`` the primary feed also carries avalanche follow-ups,
    blocklisted, nameless and out-of-session records that the filters must
    remove; the truth lists only the clean first-of-story events.
    """
    cal = cfg.calendar()
    bpd = cal.bins_per_day
    tickers = cfg.tickers()
    horizon = float(cal.n_bins)
    rng = _rng(cfg.seed, "news")
    rate = cfg.news_rate / bpd
    useason = u_shape(bpd, cfg.news_u_amplitude)
    stock_l, time_l = [], []
    for i in range(cfg.n_stocks):
        times = hawkes_times(rng, horizon, rate * (1 + cfg.news_u_amplitude), cfg.news_branching, cfg.news_decay)
        if cfg.news_u_amplitude > 0:
            keep = rng.random(len(times)) < useason[(times % bpd).astype(int)] / (1 + cfg.news_u_amplitude)
            times = times[keep]
        times = np.floor(times * 60.0) / 60.0  # whole seconds
        stock_l.append(np.full(len(times), i))
        time_l.append(times)
    stock = np.concatenate(stock_l).astype(np.int64) if stock_l else np.zeros(0, np.int64)
    times = np.concatenate(time_l) if time_l else np.zeros(0)

    crng = _rng(cfg.seed, "coupled")
    coupled = crng.random(len(times)) < cfg.news_coupling
    lag = crng.integers(0, 3, len(times))
    size = cfg.news_jump_min * (1.0 - crng.random(len(times))) ** (-1.0 / cfg.news_jump_alpha)
    nbin = np.floor(times).astype(np.int64)
    jt = nbin + lag
    coupled &= (jt // bpd) == (nbin // bpd)
    spikes = {"stock": stock[coupled], "t": jt[coupled], "size": size[coupled],
              "kind": np.ones(int(coupled.sum()), dtype=np.int8)}

    story = np.array([f"DJ{k:07d}" for k in range(len(times))], dtype=object)
    primary = _news_frame(cal, times, stock, story, "DJ", tickers, rng)
    clean = primary.copy()
    if cfg.news_noise and len(times):
        primary = pd.concat([primary, _news_noise(cal, times, stock, story, tickers, rng)], ignore_index=True)

    srng = _rng(cfg.seed, "secondary")
    copy = srng.random(len(times)) < cfg.secondary_overlap
    mu_d, sd_d = cfg.secondary_delay
    st = times[copy] + np.clip(srng.normal(mu_d, sd_d, int(copy.sum())), -10.0, 10.0)
    ss = stock[copy]
    same_day = (np.floor(st / bpd) == np.floor(times[copy] / bpd)) & (st >= 0)
    st, ss = st[same_day], ss[same_day]
    n_extra = srng.poisson(cfg.secondary_extra * len(times))
    st = np.concatenate([st, srng.random(n_extra) * horizon])
    ss = np.concatenate([ss, srng.integers(0, max(cfg.n_stocks, 1), n_extra)])
    st = np.floor(st * 60.0) / 60.0
    order = np.lexsort((ss, st))
    st, ss = st[order], ss[order]
    sstory = np.array([f"RT{k:07d}" for k in range(len(st))], dtype=object)
    secondary = _news_frame(cal, st, ss, sstory, "RT", tickers, srng)

    truth = GroundTruth("gen_news", cfg.to_json(), {
        "news": {"ticker": list(clean["tickers"]), "timestamp": list(clean["timestamp"]),
                 "story_id": list(clean["story_id"]), "t": nbin, "stock": stock},
        "news_rate_per_bin": rate,
        "branching": cfg.news_branching,
        "decay": cfg.news_decay,
        "coupling": cfg.news_coupling,
        "coupled_jumps": {"stock": spikes["stock"], "t": spikes["t"], "size": spikes["size"]},
        "n_secondary_copies": int(same_day.sum()),
    })
    return primary, secondary, spikes, truth


def _stamp_strings(cal, times) -> np.ndarray:
    bpd = cal.bins_per_day
    day = np.floor(times / bpd).astype(np.int64)
    secs = np.round((times - day * bpd) * 60.0).astype(np.int64) + cal.session_open * 60
    base = np.array([np.datetime64(d, "s") for d in cal.trading_days])
    stamps = base[day] + secs.astype("timedelta64[s]")
    return np.datetime_as_string(stamps, unit="s").astype(object)


def _news_frame(cal, times, stock, story, source, tickers, rng) -> pd.DataFrame:
    verbs = rng.integers(0, len(_VERBS), len(times))
    objs = rng.integers(0, len(_OBJECTS), len(times))
    tk = np.asarray(tickers, dtype=object)[stock] if len(stock) else np.zeros(0, dtype=object)
    heads = [f"{company_name(t)} {_VERBS[v]} {_OBJECTS[o]}" for t, v, o in zip(tk, verbs, objs)]
    return pd.DataFrame({"timestamp": _stamp_strings(cal, times), "source": source, "story_id": story,
                         "tickers": tk, "headline": heads},
                        columns=["timestamp", "source", "story_id", "tickers", "headline"])


def _news_noise(cal, times, stock, story, tickers, rng) -> pd.DataFrame:
    n = len(times)
    tk = np.asarray(tickers, dtype=object)
    frames = []
    # avalanche follow-ups: same story, a few minutes later
    fol = rng.random(n) < 0.3
    ft = times[fol] + rng.uniform(0.5, 20.0, int(fol.sum()))
    ok = np.floor(ft / cal.bins_per_day) == np.floor(times[fol] / cal.bins_per_day)
    f = pd.DataFrame({"timestamp": _stamp_strings(cal, ft[ok]), "source": "DJ", "story_id": story[fol][ok],
                      "tickers": tk[stock[fol][ok]],
                      "headline": [f"UPDATE: {company_name(t)} follow-up" for t in tk[stock[fol][ok]]]})
    frames.append(f)
    k = max(1, n // 20)
    horizon = float(cal.n_bins)
    bt = np.floor(rng.random(k) * horizon * 60) / 60
    bs = rng.integers(0, len(tickers), k)
    frames.append(pd.DataFrame({
        "timestamp": _stamp_strings(cal, bt), "source": "DJ",
        "story_id": [f"DJX{j:07d}" for j in range(k)], "tickers": tk[bs],
        "headline": [f"Order Imbalance at Close: {company_name(t)}" for t in tk[bs]]}))
    nt = np.floor(rng.random(k) * horizon * 60) / 60
    ns = rng.integers(0, len(tickers), k)
    frames.append(pd.DataFrame({
        "timestamp": _stamp_strings(cal, nt), "source": "DJ",
        "story_id": [f"DJN{j:07d}" for j in range(k)], "tickers": tk[ns],
        "headline": ["Sector roundup: movers in early trade"] * k}))
    od = rng.integers(0, cal.n_days, k)
    os_ = rng.integers(0, len(tickers), k)
    late = [dt.datetime.combine(cal.trading_days[d], dt.time(17, 30)).isoformat() for d in od]
    frames.append(pd.DataFrame({
        "timestamp": late, "source": "DJ", "story_id": [f"DJO{j:07d}" for j in range(k)],
        "tickers": tk[os_], "headline": [f"{company_name(t)} after-hours statement" for t in tk[os_]]}))
    return pd.concat(frames, ignore_index=True)


def gen_market(cfg: GenConfig, n_bins: int | None = None):
    """Jump-indicator panel: idiosyncratic Bernoulli jumps plus market bins.

    Each market bin draws a participation fraction (Pareto with exponent
    ``participation_alpha`` above ``participation_min``, capped at 1, or
    ``participation_fixed``) and that many uniformly chosen stocks co-jump.
    Returns ``(IndicatorPanel, GroundTruth)``.
    """
    from jumplab.collective import IndicatorPanel

    if cfg.participation_fixed is None and not cfg.participation_alpha > 1:
        raise ValueError("participation exponent must exceed 1")
    T = n_bins if n_bins is not None else cfg.n_days * (cfg.session_close - cfg.session_open)
    N = cfg.n_stocks
    rng = _rng(cfg.seed, "market")
    p = np.broadcast_to(np.asarray(cfg.idio_prob, dtype=float), (N,))
    theta = rng.random((N, T)) < p[:, None]
    n_mkt = rng.binomial(T, cfg.market_rate) if cfg.market_rate > 0 else 0
    mt = np.sort(rng.choice(T, n_mkt, replace=False)) if n_mkt else np.zeros(0, dtype=np.int64)
    if cfg.participation_fixed is not None:
        frac = np.full(n_mkt, float(cfg.participation_fixed))
    else:
        frac = cfg.participation_min * (1.0 - rng.random(n_mkt)) ** (-1.0 / cfg.participation_alpha)
    frac = np.minimum(frac, 1.0)
    k = np.clip(np.rint(frac * N).astype(np.int64), 1, N)
    planted = np.zeros((N, T), dtype=bool)
    for j in range(n_mkt):
        who = rng.choice(N, k[j], replace=False)
        planted[who, mt[j]] = True
    n_planted = int(planted.sum())
    theta |= planted
    ind = IndicatorPanel(theta)
    truth = GroundTruth("gen_market", cfg.to_json(), {
        "market_t": mt, "participation": frac, "n_participants": k,
        "planted_cells": n_planted, "total_cells": int(theta.sum()),
        "idio_prob": p, "participation_alpha": cfg.participation_alpha,
        "market_rate": cfg.market_rate,
    })
    return ind, truth


def _trade_draws(cfg: GenConfig, rng):
    n = cfg.n_trades
    v = (1.0 - rng.random(n)) ** (-1.0 / cfg.volume_alpha)
    v_other = (1.0 - rng.random(n)) ** (-1.0 / cfg.volume_alpha)
    eps = rng.normal(0.0, cfg.trade_noise, n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    driver = v if cfg.trade_coupled else v_other
    x = cfg.trade_scale * np.abs(cfg.trade_lambda * driver ** cfg.trade_exponent + eps)
    return x, np.ceil(100.0 * v).astype(np.int64), sign


def trade_draws(cfg: GenConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-trade (|r|, size) exactly as :func:`gen_trades` draws them, without the tape.

    Element 0 is the first trade's move, which the tape never pairs.
    """
    x, size, _ = _trade_draws(cfg, _rng(cfg.seed, "trades"))
    return x, size


def gen_trades(cfg: GenConfig) -> tuple[pd.DataFrame, GroundTruth]:
    """Single-stock trade tape with Pareto sizes.

    Returns are either independent of size or coupled through
    |r| = lambda * V**a + eps with Gaussian eps. Both modes draw the same
    random numbers; the independent mode uses a second, independent volume
    copy inside the relation, so the marginal of |r| is identical.
    """
    cal = cfg.calendar()
    rng = _rng(cfg.seed, "trades")
    n = cfg.n_trades
    x, size, sign = _trade_draws(cfg, rng)

    per_day = np.bincount(rng.integers(0, cfg.n_days, n), minlength=cfg.n_days)
    day = np.repeat(np.arange(cfg.n_days), per_day)
    secs = rng.integers(0, cal.bins_per_day * 60, n)
    secs = secs[np.lexsort((secs, day))]
    base = np.array([np.datetime64(d, "s") for d in cal.trading_days])
    stamps = base[day] + (secs + cal.session_open * 60).astype("timedelta64[s]")
    price = 20.0 * np.exp(np.cumsum(sign * x))
    tape = pd.DataFrame({
        "timestamp": np.datetime_as_string(stamps, unit="s"),
        "ticker": cfg.tickers()[0] if cfg.n_stocks else "S000",
        "price": price,
        "size": size,
    })
    first = np.ones(n, dtype=bool)
    first[1:] = day[1:] != day[:-1]
    truth = GroundTruth("gen_trades", cfg.to_json(), {
        "coupled": cfg.trade_coupled,
        "lambda": cfg.trade_lambda,
        "exponent": cfg.trade_exponent,
        "noise": cfg.trade_noise,
        "scale": cfg.trade_scale,
        "volume_alpha": cfg.volume_alpha,
        "abs_return_mean": float(x[~first].mean()) if n > 1 else 0.0,
        "abs_return_var": float(x[~first].var()) if n > 1 else 0.0,
        "n_pairs": int((~first).sum()),
    })
    return tape, truth


def market_spikes(cfg: GenConfig) -> tuple[dict, GroundTruth]:
    """Market-jump bins of :func:`gen_market` as planted return spikes.

    Only the collective part is kept (idiosyncratic jumps come from the
    return tails); every participating cell gets a spike of ``shock_size``.
    """
    ind, truth = gen_market(replace(cfg, idio_prob=0.0), n_bins=cfg.calendar().n_bins)
    stock, t = np.nonzero(ind.theta)
    spikes = {"stock": stock.astype(np.int64), "t": t.astype(np.int64),
              "size": np.full(len(t), float(cfg.shock_size)), "kind": np.zeros(len(t), dtype=np.int8)}
    return spikes, truth


def merge_spikes(*parts: dict) -> dict:
    keys = ("stock", "t", "size", "kind")
    return {k: np.concatenate([np.asarray(p[k]) for p in parts]) for k in keys}


SCENARIOS = {
    # pure heavy-tailed returns: the tail exponent is the only structure
    "returns": {},
    # every module has something to find
    "default": {
        "u_amplitude": 0.5, "shock_rate": 0.5, "news_rate": 2.0, "news_branching": 0.3,
        "news_u_amplitude": 0.5, "news_coupling": 0.2, "market_rate": 0.004, "participation_min": 0.05,
        "trade_coupled": True,
    },
    # 166 stocks x 149 days, point mass at zero tuned for roughly 180k jumps at s=4
    "paper-scale": {"n_stocks": 166, "n_days": 149, "zero_frac": 0.40},
}


def scenario_config(name: str, **overrides) -> GenConfig:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    kw = dict(SCENARIOS[name])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return GenConfig(**kw)


def sector_labels(n_stocks: int, n_sectors: int = 5) -> list[str]:
    return [f"SEC{i % n_sectors}" for i in range(n_stocks)]
