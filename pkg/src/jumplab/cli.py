"""jumplab command line: synth -> ingest -> detect-jumps -> event-study -> collective -> taildep -> report.

Every command reads an optional INI run config (``--config``) with a
``[data]`` section of input paths and one section per command; flags win
over the file. All artifacts land in one run directory (``--out``) along
with ``manifests/<command>.json``.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from jumplab import __version__
from jumplab import collective as col
from jumplab import eventstudy as es
from jumplab import jumps as jp
from jumplab import newsfeed as nf
from jumplab import synth as sy
from jumplab import taildep as td
from jumplab import timebase as tb

EXIT_OK, EXIT_INPUT, EXIT_REFUSED = 0, 1, 2


class InputError(Exception):
    """Bad or missing input file, or a parameter out of range (exit 1)."""


class Refused(Exception):
    """An analysis declined to produce a result (exit 2)."""


@dataclass(frozen=True)
class Param:
    name: str
    kind: type
    default: object
    help: str
    check: tuple = ()  # (predicate, "must ...")


def _gt(x):
    return (lambda v: v > x, f"must exceed {x}")


def _ge(x):
    return (lambda v: v >= x, f"must be at least {x}")


def _unit():
    return (lambda v: 0 < v < 1, "must lie strictly between 0 and 1")


def _hhmm():
    return (lambda v: tb._parse_hhmm(v) >= 0, "must be HH:MM")


DATA_KEYS = {
    "bars": "bar file (date,time,ticker,close,volume)",
    "news_primary": "primary news feed CSV",
    "news_secondary": "secondary news feed CSV",
    "aliases": "company-name alias file (TICKER = Name per line)",
    "blocklist": "headline blocklist, one regex per line",
    "universe": "ticker list, one per line (default: tickers in the bar file)",
    "sectors": "sector file (ticker,sector)",
    "trades": "trade tape (timestamp,ticker,price,size)",
}

PARAMS = {
    "ingest": [
        Param("session_open", str, "09:30", "session open, HH:MM", _hhmm()),
        Param("session_close", str, "16:00", "session close, HH:MM", _hhmm()),
        Param("match_window", float, 15.0, "cross-feed match window in minutes", _gt(0)),
        Param("silence", float, 30.0, "required news-free minutes before a matchable event", _ge(0)),
        Param("curve_smooth", int, 15, "half-width of the news intraday-curve smoother", _ge(0)),
    ],
    "detect-jumps": [
        Param("s", float, 4.0, "jump threshold in units of the trailing mean |r|", _gt(1)),
        Param("s_high", float, 8.0, "second threshold for the count ratio", _gt(1)),
        Param("window", int, 120, "trailing window in unmasked bins", _ge(1)),
        Param("min_history", int, 30, "bins needed before m(t) is defined", _ge(1)),
        Param("window_policy", str, "span", "span | per-session",
              (lambda v: v in ("span", "per-session"), "must be span or per-session")),
        Param("tail_fraction", float, 0.05, "share of jump scores used by the Hill fit", _unit()),
    ],
    "event-study": [
        Param("lags", int, 120, "profile half-width L in bins", _ge(1)),
        Param("assoc_window", int, 2, "bins before a jump searched for news", _ge(0)),
        Param("tau_max", int, 120, "relaxation fit range 1..tau_max", _ge(4)),
        Param("min_lag", int, 30, "pre/post baseline excludes |lag| < min_lag", _ge(1)),
        Param("curve_smooth", int, 15, "half-width of the event intraday-curve smoother", _ge(0)),
        Param("news_min_gap", int, 0, "news volatility profile keeps news with no same-stock news in the "
              "previous news_min_gap bins (0 keeps all)", _ge(0)),
    ],
    "collective": [
        Param("s_prime", float, 0.1, "market-jump threshold on chi", _unit()),
        Param("half_window", int, 2, "explained-jump half window in bins", _ge(0)),
        Param("chi_min", float, 0.05, "lower cutoff of the chi tail fit", _unit()),
        Param("min_members", int, 5, "smallest sector analysed", _ge(1)),
    ],
    "taildep": [
        Param("grid_points", int, 40, "points on the log p grid", _ge(2)),
        Param("min_k", int, 10, "smallest exceedance count kept", _ge(1)),
        Param("standardize", bool, True, "divide each stock's |r| and V by their medians before pooling"),
    ],
    "synth": [
        Param("scenario", str, "default", "returns | default | paper-scale",
              (lambda v: v in sy.SCENARIOS, "must name a known scenario")),
        Param("seed", int, 0, "master seed", _ge(0)),
        Param("n_stocks", int, None, "override the scenario's stock count", _ge(1)),
        Param("n_days", int, None, "override the scenario's day count", _ge(1)),
        Param("n_trades", int, None, "override the trade-tape length", _ge(2)),
    ],
    "report": [],
}


# --------------------------------------------------------------------------- config


@dataclass
class Context:
    command: str
    out: Path
    params: dict
    data: dict  # key -> (as written, resolved Path)

    def path(self, key, required=True) -> Path | None:
        if key not in self.data:
            if required:
                raise InputError(f"missing input: no '{key}' path given (config [data] or --{key.replace('_', '-')})")
            return None
        shown, p = self.data[key]
        if not p.is_file():
            raise InputError(f"missing input: {shown} (resolved to {p})")
        return p


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(p: Param, raw, origin):
    try:
        val = _parse_bool(raw) if p.kind is bool else p.kind(raw)
    except (TypeError, ValueError):
        raise InputError(f"parameter {p.name} ({origin}): cannot read {raw!r} as {p.kind.__name__}") from None
    if p.check and not p.check[0](val):
        raise InputError(f"parameter {p.name} ({origin}) {p.check[1]}, got {val!r}")
    return val


def build_context(command: str, args) -> Context:
    cfg = configparser.ConfigParser(interpolation=None)
    base = Path.cwd()
    if args.config:
        cpath = Path(args.config)
        if not cpath.is_file():
            raise InputError(f"missing input: config file {args.config}")
        try:
            cfg.read(cpath, encoding="utf-8")
        except configparser.Error as err:
            raise InputError(f"{args.config}: {err}") from None
        base = cpath.resolve().parent
    section = cfg[command] if cfg.has_section(command) else {}
    known = {p.name for p in PARAMS[command]}
    for key in section:
        if key not in known:
            raise InputError(f"parameter {key} (config [{command}]) is not a {command} parameter")
    params = {}
    for p in PARAMS[command]:
        val = p.default
        if p.name in section:
            val = _coerce(p, section[p.name], f"config [{command}]")
        flag = getattr(args, p.name, None)
        if flag is not None:
            val = _coerce(p, flag, "flag")
        params[p.name] = val
    data = {}
    if cfg.has_section("data"):
        for key, val in cfg["data"].items():
            if key not in DATA_KEYS:
                raise InputError(f"parameter {key} (config [data]) is not a known input")
            if val.strip():
                data[key] = (val.strip(), (base / val.strip()))
    for key in DATA_KEYS:
        flag = getattr(args, key, None)
        if flag:
            data[key] = (flag, Path(flag))
    if args.out:
        out = Path(args.out)
    elif cfg.has_section("run") and cfg["run"].get("out"):
        out = base / cfg["run"]["out"]
    else:
        out = base
    return Context(command, out, params, data)


# --------------------------------------------------------------------------- manifest


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _rel(p: Path, out: Path) -> str:
    try:
        return p.resolve().relative_to(out.resolve()).as_posix()
    except ValueError:
        return p.as_posix()


def write_manifest(ctx: Context, inputs: dict, outputs: list, started: float, extra: dict | None = None) -> None:
    man = {
        "command": ctx.command,
        "parameters": ctx.params,
        "inputs": {name: {"path": _rel(p, ctx.out), "sha256": sha256(p)} for name, p in sorted(inputs.items())},
        "outputs": {_rel(p, ctx.out): sha256(p) for p in sorted(outputs)},
        "versions": {"jumplab": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "pandas": pd.__version__, "scipy": scipy.__version__},
        "timing": {"wall_seconds": round(time.time() - started, 3)},
    }
    if extra:
        man.update(extra)
    mdir = ctx.out / "manifests"
    mdir.mkdir(parents=True, exist_ok=True)
    _write_json(mdir / f"{ctx.command}.json", man)


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=sy._jsonable, allow_nan=True)
        fh.write("\n")
    return path


def _write_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    return path


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _need(ctx: Context, *names) -> list[Path]:
    paths = [ctx.out / n for n in names]
    missing = [n for n, p in zip(names, paths) if not p.exists()]
    if missing:
        raise InputError(f"missing input: {', '.join(str(ctx.out / m) for m in missing)} (run the earlier commands first)")
    return paths


def _panel_inputs(ctx: Context) -> dict:
    d = ctx.out / "panel"
    return {f"panel/{f.name}": f for f in sorted(d.iterdir())}


def _load_panel(ctx: Context) -> tb.BarPanel:
    _need(ctx, "panel/meta.json")
    return tb.BarPanel.load(ctx.out / "panel")


def _read_lines(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


# --------------------------------------------------------------------------- commands


def cmd_synth(ctx: Context) -> int:
    started = time.time()
    p = ctx.params
    try:
        cfg = sy.scenario_config(p["scenario"], seed=p["seed"], n_stocks=p["n_stocks"], n_days=p["n_days"],
                                 n_trades=p["n_trades"])
    except ValueError as err:
        raise InputError(f"parameter scenario: {err}") from None
    data = ctx.out / "data"
    data.mkdir(parents=True, exist_ok=True)
    primary, secondary, news_spikes, news_truth = sy.gen_news(cfg)
    mkt_spikes, mkt_truth = sy.market_spikes(cfg)
    panel, ret_truth = sy.gen_returns(cfg, sy.merge_spikes(news_spikes, mkt_spikes))
    tape, trade_truth = sy.gen_trades(cfg)
    tickers = cfg.tickers()

    outs = []
    tb.write_bars(panel, data / "bars.csv")
    outs.append(data / "bars.csv")
    outs.append(_write_csv(primary, data / "news_primary.csv"))
    outs.append(_write_csv(secondary, data / "news_secondary.csv"))
    td.write_trades(tape, data / "trades.csv")
    outs.append(data / "trades.csv")
    outs.append(_write_csv(pd.DataFrame({"ticker": tickers, "sector": sy.sector_labels(len(tickers))}),
                           data / "sectors.csv"))
    (data / "aliases.txt").write_text("".join(f"{t} = {sy.company_name(t)}\n" for t in tickers), encoding="utf-8")
    (data / "blocklist.txt").write_text("".join(f"{pat}\n" for pat in nf.DEFAULT_BLOCKLIST), encoding="utf-8")
    (data / "universe.txt").write_text("".join(f"{t}\n" for t in tickers), encoding="utf-8")
    outs += [data / "aliases.txt", data / "blocklist.txt", data / "universe.txt"]

    truth = sy.GroundTruth("synth", cfg.to_json(), {
        "returns": ret_truth.truth, "news": news_truth.truth, "market": mkt_truth.truth,
        "trades": trade_truth.truth,
    })
    truth.write(ctx.out / "truth.json")
    outs.append(ctx.out / "truth.json")
    ini = configparser.ConfigParser(interpolation=None)
    ini["data"] = {k: f"data/{f}" for k, f in (
        ("bars", "bars.csv"), ("news_primary", "news_primary.csv"), ("news_secondary", "news_secondary.csv"),
        ("aliases", "aliases.txt"), ("blocklist", "blocklist.txt"), ("universe", "universe.txt"),
        ("sectors", "sectors.csv"), ("trades", "trades.csv"))}
    for name in ("ingest", "detect-jumps", "event-study", "collective", "taildep"):
        ini[name] = {q.name: str(q.default).lower() if q.kind is bool else str(q.default) for q in PARAMS[name]}
    with open(ctx.out / "run.ini", "w", encoding="utf-8", newline="\n") as fh:
        ini.write(fh)
    outs.append(ctx.out / "run.ini")
    write_manifest(ctx, {}, outs, started)
    print(f"synth: scenario {p['scenario']}, {cfg.n_stocks} stocks x {cfg.n_days} days -> {ctx.out}")
    return EXIT_OK


def cmd_ingest(ctx: Context) -> int:
    started = time.time()
    p = ctx.params
    inputs = {"bars": ctx.path("bars")}
    try:
        bars = tb.read_bars(inputs["bars"])
    except (ValueError, pd.errors.ParserError) as err:
        raise InputError(f"{ctx.data['bars'][0]}: {err}") from None
    if bars.empty:
        raise InputError(f"{ctx.data['bars'][0]}: no bar records")
    universe = None
    if "universe" in ctx.data:
        inputs["universe"] = ctx.path("universe")
        universe = _read_lines(inputs["universe"])
    open_m, close_m = tb._parse_hhmm(p["session_open"]), tb._parse_hhmm(p["session_close"])
    if close_m <= open_m:
        raise InputError("parameter session_close must be later than session_open")
    dates = sorted({str(d) for d in bars["date"].unique()})
    try:
        cal = tb.TradingCalendar.from_dates(dates, session_open=open_m, session_close=close_m)
    except ValueError as err:
        raise InputError(f"{ctx.data['bars'][0]}: {err}") from None
    panel, prep = tb.build_panel(bars, cal, universe)
    panel.save(ctx.out / "panel")
    outs = list(_panel_inputs(ctx).values())
    report = {"bars": prep.to_json(), "calendar": {"n_days": cal.n_days, "bins_per_day": cal.bins_per_day},
              "n_stocks": panel.n_stocks}

    aliases, blocklist = None, list(nf.DEFAULT_BLOCKLIST)
    if "aliases" in ctx.data:
        inputs["aliases"] = ctx.path("aliases")
        aliases = _guard(nf.read_aliases, inputs["aliases"])
    if "blocklist" in ctx.data:
        inputs["blocklist"] = ctx.path("blocklist")
        blocklist = _guard(nf.read_blocklist, inputs["blocklist"])
    feeds = {}
    for key in ("news_primary", "news_secondary"):
        if key in ctx.data:
            inputs[key] = ctx.path(key)
            raw = _guard(nf.read_news, inputs[key])
            events, frep = nf.filter_news(raw, panel.tickers, cal, blocklist, aliases)
            feeds[key] = events
            report[key] = frep.to_json()
    if feeds:
        primary = feeds.get("news_primary", [])
        if "news_secondary" in feeds:
            merged, hist = nf.merge_feeds(primary, feeds["news_secondary"], p["match_window"], p["silence"])
            report["merge"] = hist.summary()
            outs.append(_write_csv(hist.to_frame(), ctx.out / "news_delays.csv"))
        else:
            merged = primary
        report["n_news_events"] = len(merged)
        nf.write_news(merged, ctx.out / "news_merged.csv")
        outs.append(ctx.out / "news_merged.csv")
        idx = nf.news_index(merged, panel.tickers, cal)
        if len(idx):
            curve = tb.intraday_mean_curve(panel, "event-count", idx, smooth=p["curve_smooth"])
            outs.append(_write_csv(pd.DataFrame({"time": cal.time_strings(), "relative_rate": curve}),
                                   ctx.out / "news_intraday.csv"))
    outs.append(_write_json(ctx.out / "ingest.json", report))
    write_manifest(ctx, inputs, outs, started)
    rej = sum(prep.rejected.values())
    print(f"ingest: {prep.n_accepted} bars accepted, {rej} rejected; "
          f"{report.get('n_news_events', 0)} news events -> {ctx.out}")
    return EXIT_OK


def _guard(fn, path):
    try:
        return fn(path)
    except (ValueError, pd.errors.ParserError, UnicodeDecodeError) as err:
        raise InputError(f"{path}: {err}") from None


def cmd_detect_jumps(ctx: Context) -> int:
    started = time.time()
    p = ctx.params
    if p["window"] < p["min_history"]:
        raise InputError("parameter window must be at least min_history")
    if p["s_high"] <= p["s"]:
        raise InputError("parameter s_high must exceed s")
    panel = _load_panel(ctx)
    base = jp.baseline(panel, p["window"], p["min_history"], p["window_policy"])
    table = jp.detect_jumps(panel, base, p["s"])
    n_high = int((table.score > p["s_high"]).sum())
    table.write_csv(ctx.out / "jumps.csv")
    outs = [ctx.out / "jumps.csv"]
    summary = {"s": p["s"], "n_jumps": len(table), "s_high": p["s_high"], "n_jumps_high": n_high,
               "n_degenerate": table.n_degenerate}
    refused = None
    try:
        ccdf, fit = jp.score_ccdf(table, tail_fraction=p["tail_fraction"])
        outs.append(_write_csv(ccdf, ctx.out / "jump_ccdf.csv"))
        ratio = n_high / len(table)
        pred = (p["s_high"] / p["s"]) ** (-fit.exponent)
        summary.update({"tail": fit.to_json(), "ratio": ratio, "ratio_predicted": pred,
                        "ratio_predicted_stderr": pred * np.log(p["s_high"] / p["s"]) * fit.stderr,
                        "ratio_stderr": float(np.sqrt(ratio * (1 - ratio) / len(table)))})
    except jp.TailFitError as err:
        refused = f"tail fit refused: {err}"
        summary["refused"] = refused
    outs.append(_write_json(ctx.out / "jumps.json", summary))
    write_manifest(ctx, _panel_inputs(ctx), outs, started)
    print(f"detect-jumps: {len(table)} jumps at s={p['s']:g}, {n_high} above s={p['s_high']:g}")
    if refused:
        raise Refused(refused)
    return EXIT_OK


def _load_news_index(path: Path, panel: tb.BarPanel) -> tb.EventIndex:
    df = nf.read_news(path)
    cal = panel.calendar
    tix = panel.ticker_index()
    stock, t = [], []
    for ts, tks in zip(pd.to_datetime(df["timestamp"], format="ISO8601"), df["tickers"]):
        b = cal.locate(ts.to_pydatetime())
        for tk in tks.split("|"):
            if b is not None and tk in tix:
                stock.append(tix[tk])
                t.append(b)
    return tb.EventIndex(np.array(stock, dtype=np.int64), np.array(t, dtype=np.int64))


def _load_jumps(ctx: Context, panel: tb.BarPanel) -> jp.JumpTable:
    (path,) = _need(ctx, "jumps.csv")
    return jp.JumpTable.read_csv(path, panel.tickers, panel.calendar)


def cmd_event_study(ctx: Context) -> int:
    started = time.time()
    p = ctx.params
    if p["tau_max"] > p["lags"]:
        raise InputError("parameter tau_max must not exceed lags")
    if p["min_lag"] > p["lags"]:
        raise InputError("parameter min_lag must not exceed lags")
    panel = _load_panel(ctx)
    cal = panel.calendar
    jumps = _load_jumps(ctx, panel)
    inputs = {**_panel_inputs(ctx), "jumps.csv": ctx.out / "jumps.csv"}
    news_path = ctx.out / "news_merged.csv"
    news = _load_news_index(news_path, panel) if news_path.exists() else tb.EventIndex([], [])
    if news_path.exists():
        inputs["news_merged.csv"] = news_path
    jidx = jumps.index()
    is_news = jp.classify_news_jumps(jumps, news, cal.bins_per_day, p["assoc_window"])
    u = tb.intraday_mean_curve(panel, "abs-return")
    pdir = ctx.out / "profiles"
    pdir.mkdir(parents=True, exist_ok=True)
    outs, refusals = [], []
    summary = {"n_jumps": len(jumps), "n_news": len(news), "n_news_jumps": int(is_news.sum()),
               "n_endogenous_jumps": int((~is_news).sum()), "profiles": {}, "fits": {}, "pre_post": {}}

    def seasonal(ev, label):
        curve = tb.intraday_mean_curve(panel, "event-count", ev, smooth=p["curve_smooth"])
        if not np.all(curve > 0):
            raise Refused(f"{label} intraday curve has empty bins; raise curve_smooth")
        return curve

    groups = {"news": news, "jumps": jidx, "news_jumps": jidx.take(is_news), "endogenous_jumps": jidx.take(~is_news)}
    cond = [("news_given_news", "news", "news"), ("jump_given_jump", "jumps", "jumps"),
            ("jump_given_news", "news", "jumps")]
    for name, trig, targ in cond:
        if len(groups[trig]) == 0 or len(groups[targ]) == 0:
            refusals.append(f"{name}: no {trig if len(groups[trig]) == 0 else targ} events")
            continue
        try:
            prof = es.conditional_rate(groups[trig], groups[targ], panel.n_stocks, cal.n_bins, cal.bins_per_day,
                                       p["lags"], seasonal(groups[targ], targ))
        except Refused as err:
            refusals.append(f"{name}: {err}")
            continue
        prof.write_csv(pdir / f"{name}.csv")
        outs.append(pdir / f"{name}.csv")
        summary["profiles"][name] = prof.kind

    significant = groups["news"].take(es.isolated_events(groups["news"], p["news_min_gap"]))
    summary["n_significant_news"] = len(significant)
    for name in ("news", "news_jumps", "endogenous_jumps"):
        trig = significant if name == "news" else groups[name]
        if len(trig) == 0:
            refusals.append(f"vol_{name}: no events")
            continue
        prof = es.vol_profile(trig, panel, p["lags"], u)
        prof.write_csv(pdir / f"vol_{name}.csv")
        outs.append(pdir / f"vol_{name}.csv")
        summary["profiles"][f"vol_{name}"] = prof.kind
        summary["pre_post"][name] = es.pre_post_baseline(prof, p["min_lag"])
        if name == "news":
            continue
        try:
            fit = es.fit_relaxation(prof, p["tau_max"])
            summary["fits"][name] = fit.to_json()
        except es.RelaxFitError as err:
            refusals.append(f"relaxation fit {name}: {err}")
            summary["fits"][name] = {"refused": str(err), **(err.best.to_json() if err.best else {})}
        except ValueError as err:
            refusals.append(f"relaxation fit {name}: {err}")
            summary["fits"][name] = {"refused": str(err)}

    if is_news.sum() >= 51:
        ccdf, fit = jp.score_ccdf(jumps.score[is_news])
        outs.append(_write_csv(ccdf, ctx.out / "news_jump_ccdf.csv"))
        summary["news_jump_tail"] = fit.to_json()
    summary["refusals"] = refusals
    outs.append(_write_json(ctx.out / "event_study.json", summary))
    write_manifest(ctx, inputs, outs, started)
    print(f"event-study: {summary['n_news_jumps']} news jumps, {summary['n_endogenous_jumps']} endogenous; "
          f"{len(refusals)} refusals")
    if refusals:
        raise Refused("; ".join(refusals))
    return EXIT_OK


def cmd_collective(ctx: Context) -> int:
    started = time.time()
    p = ctx.params
    panel = _load_panel(ctx)
    cal = panel.calendar
    jumps = _load_jumps(ctx, panel)
    inputs = {**_panel_inputs(ctx), "jumps.csv": ctx.out / "jumps.csv"}
    ind = col.IndicatorPanel.from_events(jumps.index(), panel.n_stocks, cal.n_bins)
    try:
        dec = col.cojump_matrix(ind)
    except ValueError as err:
        raise Refused(f"co-jump matrix: {err}") from None
    v1 = dec.market_mode_full(panel.n_stocks)
    chi = col.chi_series(ind, v1, p["s_prime"])
    bpd = cal.bins_per_day
    outs = [_write_csv(pd.DataFrame({"date": cal.date_strings()[np.arange(cal.n_bins) // bpd],
                                     "time": cal.time_strings()[np.arange(cal.n_bins) % bpd], "chi": chi.chi}),
                       ctx.out / "chi.csv")]
    ev = chi.events
    outs.append(_write_csv(pd.DataFrame({"date": cal.date_strings()[ev // bpd], "time": cal.time_strings()[ev % bpd],
                                         "chi": chi.chi[ev]}), ctx.out / "market_jumps.csv"))
    summary = {"cojump": dec.to_json(), "n_market_jumps": int(len(ev)), "s_prime": p["s_prime"]}
    summary["explained_market"] = col.explained_fraction(jumps.index(), chi, p["half_window"], bpd)
    if "sectors" in ctx.data:
        inputs["sectors"] = ctx.path("sectors")
        sec = _guard(lambda q: pd.read_csv(q, dtype=str, keep_default_na=False), inputs["sectors"])
        if list(sec.columns) != ["ticker", "sector"]:
            raise InputError(f"{ctx.data['sectors'][0]}: expected header ticker,sector")
        labels = dict(zip(sec["ticker"], sec["sector"]))
        missing = [t for t in panel.tickers if not labels.get(t)]
        if missing:
            raise InputError(f"{ctx.data['sectors'][0]}: no sector for {', '.join(missing[:5])}")
        series, skipped = col.sector_jumps(ind, [labels[t] for t in panel.tickers], p["s_prime"], p["min_members"])
        rows = [(lab, int(t)) for lab, s in series.items() for t in s.events]
        outs.append(_write_csv(pd.DataFrame({
            "sector": [r[0] for r in rows], "date": [cal.date_strings()[r[1] // bpd] for r in rows],
            "time": [cal.time_strings()[r[1] % bpd] for r in rows]}), ctx.out / "sector_jumps.csv"))
        summary["sectors"] = {lab: int(len(s.events)) for lab, s in series.items()}
        summary["sectors_skipped"] = skipped
        summary["explained_market_and_sectors"] = col.explained_fraction(
            jumps.index(), [chi, *series.values()], p["half_window"], bpd)
    refused = None
    try:
        ccdf, fit = jp.score_ccdf(chi.chi[chi.chi > 0], xmin=p["chi_min"])
        outs.append(_write_csv(ccdf, ctx.out / "chi_ccdf.csv"))
        summary["chi_tail"] = fit.to_json()
    except jp.TailFitError as err:
        refused = f"chi tail fit refused: {err}"
        summary["chi_tail"] = {"refused": str(err)}
    outs.append(_write_json(ctx.out / "collective.json", summary))
    write_manifest(ctx, inputs, outs, started)
    frac = summary["explained_market"]["fraction"]
    print(f"collective: {dec.n_outside_band} eigenvalues outside the noise band, {len(ev)} market jumps, "
          f"{100 * frac:.1f}% of jumps explained")
    if refused:
        raise Refused(refused)
    return EXIT_OK


def cmd_taildep(ctx: Context) -> int:
    started = time.time()
    p = ctx.params
    inputs, outs, summary = {}, [], {}

    def run(sample, name):
        grid = td.default_grid(len(sample), p["grid_points"])
        curve = td.tail_curve(sample, grid, p["min_k"])
        curve.write_csv(ctx.out / f"taildep_{name}.csv")
        outs.append(ctx.out / f"taildep_{name}.csv")
        summary[name] = {"n": len(sample), "ties": curve.ties, "n_points": int(len(curve.grid))}

    if "trades" in ctx.data:
        inputs["trades"] = ctx.path("trades")
        tape = _guard(td.read_trades, inputs["trades"])
        try:
            sample, rep = td.trade_pairs(tape)
        except ValueError as err:
            raise InputError(f"{ctx.data['trades'][0]}: {err}") from None
        summary["trade_pairs"] = rep
        try:
            run(sample, "trade")
        except ValueError as err:
            raise Refused(f"trade tail curve: {err}") from None
    if (ctx.out / "panel" / "meta.json").exists():
        panel = _load_panel(ctx)
        inputs.update(_panel_inputs(ctx))
        try:
            run(td.bar_pairs(panel, p["standardize"]), "bar")
        except ValueError as err:
            raise Refused(f"bar tail curve: {err}") from None
    if not outs:
        raise InputError("missing input: need a trade tape (--trades) or an ingested panel")
    outs.append(_write_json(ctx.out / "taildep.json", summary))
    write_manifest(ctx, inputs, outs, started)
    print("taildep: " + ", ".join(f"{k} n={v['n']}" for k, v in summary.items() if "n" in v))
    return EXIT_OK


REPORT_NEEDS = ["ingest.json", "jumps.csv", "jumps.json", "jump_ccdf.csv", "event_study.json", "collective.json",
                "chi.csv", "taildep.json"]


def cmd_report(ctx: Context) -> int:
    started = time.time()
    missing = [n for n in REPORT_NEEDS if not (ctx.out / n).exists()]
    if missing:
        raise Refused("report needs prior artifacts; missing: " + ", ".join(missing))
    fdir = ctx.out / "figures"
    outs, inputs = [], {}

    def src(name):
        path = ctx.out / name
        if path.exists():
            inputs[name] = path
            return path
        return None

    def stack(items, key="series"):
        frames = [df.assign(**{key: lab}) for lab, df in items if df is not None]
        if not frames:
            return None
        df = pd.concat(frames, ignore_index=True)
        return df[[key] + [c for c in df.columns if c != key]]

    # fig1: cross-feed delays and the intraday news rate
    if src("news_delays.csv"):
        outs.append(_write_csv(pd.read_csv(inputs["news_delays.csv"]), fdir / "fig1_news_delays.csv"))
    if src("news_intraday.csv"):
        outs.append(_write_csv(pd.read_csv(inputs["news_intraday.csv"]), fdir / "fig1_news_intraday.csv"))
    # fig2: jump-size CCDF, all jumps vs news jumps
    ccdfs = [("all_jumps", pd.read_csv(src("jump_ccdf.csv"), float_precision="round_trip"))]
    if src("news_jump_ccdf.csv"):
        ccdfs.append(("news_jumps", pd.read_csv(inputs["news_jump_ccdf.csv"], float_precision="round_trip")))
    outs.append(_write_csv(stack(ccdfs), fdir / "fig2_jump_ccdf.csv"))
    # fig3/fig4: conditional rates and volatility profiles
    prof = {}
    for name in ("news_given_news", "jump_given_jump", "jump_given_news", "vol_news", "vol_news_jumps",
                 "vol_endogenous_jumps"):
        path = src(f"profiles/{name}.csv")
        prof[name] = pd.read_csv(path, float_precision="round_trip") if path else None
    for fig, names in (("fig3_conditional_rates", ("news_given_news", "jump_given_jump", "jump_given_news")),
                       ("fig4_volatility_profiles", ("vol_news", "vol_news_jumps", "vol_endogenous_jumps"))):
        df = stack([(n, prof[n]) for n in names])
        if df is not None:
            outs.append(_write_csv(df, fdir / f"{fig}.csv"))
    # fig5: relaxation above tau = 0 with the fitted law
    study = _read_json(src("event_study.json"))
    rows = []
    for name, fit in sorted(study.get("fits", {}).items()):
        df = prof.get(f"vol_{name}")
        if df is None or "beta" not in fit:
            continue
        df = df[(df["lag"] >= 1) & (df["lag"] <= fit["tau_range"][1])]
        tau = df["lag"].to_numpy(dtype=float)
        rows.append((name, pd.DataFrame({
            "tau": df["lag"], "value": df["value"], "stderr": df["stderr"],
            "fit": fit["sigma_inf"] + fit["amplitude"] * tau ** (-fit["beta"]),
            "excess": df["value"] - fit["sigma_inf"]})))
    if rows:
        outs.append(_write_csv(stack(rows), fdir / "fig5_relaxation.csv"))
    # fig6: tail dependence C(p)
    curves = [(n, pd.read_csv(src(f"taildep_{n}.csv"), float_precision="round_trip"))
              for n in ("trade", "bar") if (ctx.out / f"taildep_{n}.csv").exists()]
    if curves:
        six = stack(curves, "resolution")
        outs.append(_write_csv(six.assign(independent=six["p"]), fdir / "fig6_tail_dependence.csv"))
    # collective: chi law and eigenvalue spectrum
    coll = _read_json(src("collective.json"))
    if src("chi_ccdf.csv"):
        outs.append(_write_csv(pd.read_csv(inputs["chi_ccdf.csv"], float_precision="round_trip"),
                               fdir / "chi_ccdf.csv"))
    lo, hi = coll["cojump"]["mp_band"]
    ev = np.asarray(coll["cojump"]["eigenvalues"])
    outs.append(_write_csv(pd.DataFrame({"rank": np.arange(1, len(ev) + 1), "eigenvalue": ev,
                                         "outside_band": (ev < lo) | (ev > hi)}), fdir / "cojump_eigenvalues.csv"))
    jumps = _read_json(src("jumps.json"))
    ingest = _read_json(src("ingest.json"))
    summary = {
        "n_jumps": jumps["n_jumps"], "n_jumps_high": jumps["n_jumps_high"], "jump_tail": jumps.get("tail"),
        "news_jump_tail": study.get("news_jump_tail"), "fits": study.get("fits"),
        "pre_post": study.get("pre_post"), "merge": ingest.get("merge"),
        "n_market_jumps": coll["n_market_jumps"], "explained_market": coll["explained_market"],
        "explained_market_and_sectors": coll.get("explained_market_and_sectors"),
        "chi_tail": coll.get("chi_tail"), "figures": sorted(_rel(o, fdir) for o in outs),
    }
    outs.append(_write_json(fdir / "summary.json", summary))
    write_manifest(ctx, inputs, outs, started)
    print(f"report: {len(outs)} plot-data files in {fdir}")
    return EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic data set with ground truth and a run config"),
    "ingest": (cmd_ingest, "build the bar panel and the filtered, merged news stream"),
    "detect-jumps": (cmd_detect_jumps, "detect s-jumps and fit their size distribution"),
    "event-study": (cmd_event_study, "conditional rates, volatility profiles and relaxation fits"),
    "collective": (cmd_collective, "co-jump spectrum, market and sector jumps, explained fractions"),
    "taildep": (cmd_taildep, "return/volume tail dependence C(p) for trades and bars"),
    "report": (cmd_report, "plot-data CSVs for every figure from earlier artifacts"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jumplab", description=__doc__.splitlines()[0],
                                 epilog="Environment: JUMPLAB_THREADS caps worker threads.")
    ap.add_argument("--version", action="version", version=f"jumplab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, description=helptext)
        sp.add_argument("--config", help="INI run config; its [data] paths are relative to the file")
        sp.add_argument("--out", help="run directory for artifacts (default: config [run] out, else the config's directory)")
        if name != "report":
            grp = sp.add_argument_group("inputs (override config [data])")
            for key, desc in DATA_KEYS.items():
                grp.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="PATH", help=desc)
        grp = sp.add_argument_group(f"parameters (override config [{name}])")
        for p in PARAMS[name]:
            shown = "" if p.default is None else f" (default {p.default})"
            grp.add_argument(f"--{p.name.replace('_', '-')}", dest=p.name, metavar=p.kind.__name__.upper(),
                             help=p.help + shown)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        ctx = build_context(args.command, args)
        ctx.out.mkdir(parents=True, exist_ok=True)
        return fn(ctx)
    except InputError as err:
        print(f"jumplab {args.command}: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except Refused as err:
        print(f"jumplab {args.command}: refused: {err}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
