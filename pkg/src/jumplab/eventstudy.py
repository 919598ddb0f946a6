"""Conditional event rates, volatility profiles and power-law relaxation fits."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from jumplab.timebase import BarPanel, EventIndex

_CHUNK = 4096


class RelaxFitError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class EventProfile:
    lags: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    n_obs: np.ndarray
    kind: str

    def at(self, lag: int):
        i = int(lag - self.lags[0])
        return self.value[i]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lag": self.lags, "value": self.value, "stderr": self.stderr, "n_obs": self.n_obs})

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def read_csv(cls, path, kind: str) -> "EventProfile":
        df = pd.read_csv(path, float_precision="round_trip")
        return cls(df["lag"].to_numpy(), df["value"].to_numpy(), df["stderr"].to_numpy(),
                   df["n_obs"].to_numpy(), kind)


def _lag_sums(trigger: EventIndex, values: np.ndarray, valid: np.ndarray | None, weight_by_bin: np.ndarray,
              L: int, bins_per_day: int, stock_scale: np.ndarray | None = None):
    """Per-lag sum, sum of squares and count of values[s, t0 + lag] * weight[bin].

    Lags that leave the trigger's session are not observed; neither are
    masked cells when ``valid`` is given.
    """
    lags = np.arange(-L, L + 1)
    s1 = np.zeros(len(lags))
    s2 = np.zeros(len(lags))
    n = np.zeros(len(lags), dtype=np.int64)
    n_bins = values.shape[1]
    for lo in range(0, len(trigger), _CHUNK):
        st = trigger.stock[lo : lo + _CHUNK]
        t0 = trigger.t[lo : lo + _CHUNK]
        b = (t0 % bins_per_day)[:, None] + lags[None, :]
        inside = (b >= 0) & (b < bins_per_day)
        tt = np.clip(t0[:, None] + lags[None, :], 0, n_bins - 1)
        ss = np.broadcast_to(st[:, None], tt.shape)
        ok = inside.copy()
        if valid is not None:
            ok &= valid[ss, tt]
        x = np.where(ok, values[ss, tt], 0.0) * weight_by_bin[np.clip(b, 0, bins_per_day - 1)]
        if stock_scale is not None:
            x = x / stock_scale[st][:, None]
        x = np.where(ok, x, 0.0)
        s1 += x.sum(axis=0)
        s2 += (x * x).sum(axis=0)
        n += ok.sum(axis=0)
    return lags, s1, s2, n


def _profile(lags, s1, s2, n, kind) -> EventProfile:
    value = np.full(len(lags), np.nan)
    se = np.full(len(lags), np.nan)
    has = n > 0
    value[has] = s1[has] / n[has]
    var = np.zeros(len(lags))
    var[has] = np.maximum(s2[has] / n[has] - value[has] ** 2, 0.0)
    more = n > 1
    se[more] = np.sqrt(var[more] / n[more])
    return EventProfile(lags, value, se, n, kind)


def conditional_rate(trigger: EventIndex, target: EventIndex, n_stocks: int, n_bins: int, bins_per_day: int,
                     L: int = 120, seasonal: np.ndarray | None = None) -> EventProfile:
    """Probability of a same-stock target event at lag tau from each trigger.

    Without ``seasonal`` the output is the raw per-bin probability
    (``raw-rate``). With a seasonal curve of the targets, each contribution
    is divided by the curve at its bin and the profile by the unconditional
    target rate, so independence reads as 1 (``rate-ratio``).
    """
    if len(trigger) == 0:
        raise ValueError("no events")
    theta = target.indicator(n_stocks, n_bins).astype(float)
    if seasonal is None:
        w = np.ones(bins_per_day)
        kind = "raw-rate"
    else:
        seasonal = np.asarray(seasonal, dtype=float)
        if seasonal.shape != (bins_per_day,) or not np.all(seasonal > 0):
            raise ValueError("seasonal curve must be positive with one value per bin of day")
        w = 1.0 / seasonal
        kind = "rate-ratio"
    lags, s1, s2, n = _lag_sums(trigger, theta, None, w, L, bins_per_day)
    prof = _profile(lags, s1, s2, n, kind)
    if seasonal is not None:
        base = theta.sum() / theta.size
        if not base > 0:
            raise ValueError("no target events")
        prof = EventProfile(prof.lags, prof.value / base, prof.stderr / base, prof.n_obs, kind)
    return prof


def stock_vol_scale(panel: BarPanel, u_curve: np.ndarray) -> np.ndarray:
    """Per-stock mean of |r| / u over unmasked bins (deseasonalized volatility level)."""
    bpd = panel.calendar.bins_per_day
    w = np.tile(1.0 / np.asarray(u_curve, dtype=float), panel.calendar.n_days)
    x = np.where(panel.valid, panel.abs_returns() * w[None, :], 0.0)
    cnt = panel.valid.sum(axis=1)
    out = np.full(panel.n_stocks, np.nan)
    out[cnt > 0] = x.sum(axis=1)[cnt > 0] / cnt[cnt > 0]
    return out


def vol_profile(trigger: EventIndex, panel: BarPanel, L: int = 120, u_curve: np.ndarray | None = None,
                scale="stock") -> EventProfile:
    """Mean deseasonalized |r| at each lag around the triggers (masked bins skipped).

    ``scale="stock"`` divides every contribution by its stock's mean
    deseasonalized |r| so that profiles pool across stocks with different
    volatility and read 1 at the unconditional level; ``None`` keeps raw
    return units; an array gives explicit per-stock scales.
    """
    if len(trigger) == 0:
        raise ValueError("no events")
    bpd = panel.calendar.bins_per_day
    u = np.ones(bpd) if u_curve is None else np.asarray(u_curve, dtype=float)
    if u.shape != (bpd,) or not np.all(u > 0):
        raise ValueError("u_curve must be positive with one value per bin of day")
    if isinstance(scale, str):
        if scale != "stock":
            raise ValueError(f"unknown scale {scale!r}")
        scale = stock_vol_scale(panel, u)
    absr = np.where(panel.valid, panel.abs_returns(), 0.0)
    lags, s1, s2, n = _lag_sums(trigger, absr, panel.valid, 1.0 / u, L, bpd, scale)
    return _profile(lags, s1, s2, n, "vol-ratio")


@dataclass(frozen=True)
class RelaxFit:
    beta: float
    amplitude: float
    sigma_inf: float
    fit_window: tuple[int, int]
    residual: float
    beta_stderr: float = float("nan")
    n_evals: int = 0

    def predict(self, tau):
        return self.sigma_inf + self.amplitude * np.asarray(tau, dtype=float) ** (-self.beta)

    def to_json(self) -> dict:
        return {"beta": self.beta, "amplitude": self.amplitude, "sigma_inf": self.sigma_inf,
                "residual": self.residual, "beta_stderr": self.beta_stderr, "tau_range": list(self.fit_window)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"


_BETA_MAX = 3.0


def _linear_part(beta, tau, y, w):
    basis = np.column_stack([np.ones_like(tau), tau ** (-beta)])
    coef, *_ = np.linalg.lstsq(basis * w[:, None], y * w, rcond=None)
    resid = (y - basis @ coef) * w
    return coef, float(resid @ resid)


def fit_relaxation(profile: EventProfile, tau_max: int = 120, max_evals: int = 10_000) -> RelaxFit:
    """Fit value[tau] ~ sigma_inf + amplitude * tau**-beta over tau in [1, tau_max].

    Weighted least squares with weights sqrt(n_obs); the two linear
    parameters are solved exactly for each beta, and beta in (0, 3] is found
    by a grid scan refined with Nelder-Mead.
    """
    if profile.kind != "vol-ratio":
        raise ValueError("relaxation fits need a vol-ratio profile")
    lags = np.asarray(profile.lags)
    sel = (lags >= 1) & (lags <= tau_max)
    if sel.sum() != tau_max:
        raise ValueError(f"profile does not cover lags 1..{tau_max}")
    n_obs = np.asarray(profile.n_obs, dtype=float)[sel]
    if not np.all(n_obs > 0):
        raise ValueError("profile has lags without observations in the fit window")
    tau = lags[sel].astype(float)
    y = np.asarray(profile.value, dtype=float)[sel]
    w = np.sqrt(n_obs)

    evals = 0

    def objective(b):
        nonlocal evals
        evals += 1
        beta = float(np.atleast_1d(b)[0])
        if not 0 < beta <= _BETA_MAX:
            return np.inf
        return _linear_part(beta, tau, y, w)[1]

    grid = np.linspace(0.02, _BETA_MAX, 150)
    scores = [objective(b) for b in grid]
    start = grid[int(np.argmin(scores))]
    fatol = 1e-14 * float((y * w) @ (y * w))
    res = minimize(objective, x0=[start], method="Nelder-Mead",
                   options={"xatol": 1e-11, "fatol": fatol, "maxfev": max_evals - len(grid),
                            "initial_simplex": [[start], [min(start + 0.02, _BETA_MAX)]]})
    beta = float(res.x[0])
    (sigma_inf, amp), sse = _linear_part(beta, tau, y, w)
    resid = float(np.sqrt(sse / (w @ w)))
    best = RelaxFit(beta, float(amp), float(sigma_inf), (1, tau_max), resid, _beta_stderr(beta, amp, tau, y, w, sse),
                    evals)
    if not res.success:
        raise RelaxFitError(f"relaxation fit did not converge after {evals} evaluations", best)
    if not (best.sigma_inf > 0 and best.beta > 0):
        raise RelaxFitError("fit left the admissible region (sigma_inf or beta not positive)", best)
    return best


def _beta_stderr(beta, amp, tau, y, w, sse):
    if len(tau) <= 3:
        return float("nan")
    t_b = tau ** (-beta)
    jac = np.column_stack([np.ones_like(tau), t_b, -amp * np.log(tau) * t_b]) * w[:, None]
    s2 = sse / (len(tau) - 3)
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        return float("nan")
    return float(np.sqrt(max(cov[2, 2], 0.0)))


def pre_post_baseline(profile: EventProfile, min_lag: int = 30) -> dict:
    """Mean profile level over lags [-L, -min_lag] and [min_lag, L].

    Returns means, their standard errors (from the per-lag errors) and the
    post-minus-pre difference.
    """
    lags = np.asarray(profile.lags)
    L = int(lags.max())
    if L < min_lag or -int(lags.min()) < min_lag:
        raise ValueError(f"profile needs at least {min_lag} lags on each side")

    def side(mask):
        v = np.asarray(profile.value)[mask]
        e = np.asarray(profile.stderr)[mask]
        ok = np.isfinite(v)
        m = float(v[ok].mean())
        se = float(np.sqrt(np.nansum(e[ok] ** 2)) / ok.sum())
        return m, se

    pre, pre_se = side(lags <= -min_lag)
    post, post_se = side(lags >= min_lag)
    return {"pre_mean": pre, "pre_stderr": pre_se, "post_mean": post, "post_stderr": post_se,
            "difference": post - pre, "difference_stderr": float(np.hypot(pre_se, post_se))}


def isolated_events(events: EventIndex, min_gap: int) -> np.ndarray:
    """Mask of events with no earlier event on the same stock within ``min_gap`` bins.

    ``min_gap=0`` keeps every event. Used to pick the news that count as
    significant for the volatility profile.
    """
    if min_gap < 0:
        raise ValueError("min_gap must be >= 0")
    keep = np.ones(len(events), dtype=bool)
    if min_gap == 0 or len(events) == 0:
        return keep
    order = np.lexsort((events.t, events.stock))
    s, t = events.stock[order], events.t[order]
    same = np.concatenate(([False], s[1:] == s[:-1]))
    gap = np.concatenate(([np.iinfo(np.int64).max], np.diff(t)))
    keep[order] = ~(same & (gap <= min_gap))
    return keep
