"""Point-process diagnostics for activity days.

Ripley's K in one dimension (reference curve 2h under complete randomness),
state-conditional sub-series, bootstrap bands, and the exponential-spacings
Kolmogorov-Smirnov test.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from ._parallel import pmap
from .series import EventSeries, InterArrivalSeries, interarrivals


class DiagnosticError(ValueError):
    pass


@dataclass(frozen=True)
class RipleyCurve:
    h_grid: np.ndarray
    k_hat: np.ndarray
    corrected: bool
    ci_lo: np.ndarray | None = None
    ci_hi: np.ndarray | None = None

    @property
    def reference(self) -> np.ndarray:
        return 2.0 * self.h_grid

    def rows(self) -> list[dict]:
        out = []
        for i, h in enumerate(self.h_grid):
            out.append({
                "h": float(h),
                "k_hat": float(self.k_hat[i]),
                "2h": float(2 * h),
                "ci_lo": None if self.ci_lo is None else float(self.ci_lo[i]),
                "ci_hi": None if self.ci_hi is None else float(self.ci_hi[i]),
            })
        return out


def _points(ia) -> np.ndarray:
    if isinstance(ia, InterArrivalSeries):
        return ia.t_list.astype(float)
    return np.sort(np.asarray(ia, dtype=float))


def _pairs(t: np.ndarray, h_max: float):
    """Ordered pairs (i, j), i != j, with 0 < |t_i - t_j| <= h_max or duplicates."""
    n = t.size
    # points are sorted: partners of i within h_max are i+1 .. hi[i]-1
    hi = np.searchsorted(t, t + h_max, side="right")
    c = hi - np.arange(n) - 1
    i_idx = np.repeat(np.arange(n), c)
    offs = np.arange(i_idx.size) - np.repeat(np.cumsum(c) - c, c)
    j_idx = i_idx + offs + 1
    return np.concatenate([i_idx, j_idx]), np.concatenate([j_idx, i_idx])


def _cumulate(dist: np.ndarray, weights: np.ndarray, h_grid: np.ndarray) -> np.ndarray:
    if dist.size == 0:
        return np.zeros(h_grid.shape)
    order = np.argsort(dist, kind="stable")
    d, w = dist[order], np.cumsum(weights[order])
    idx = np.searchsorted(d, h_grid, side="right")
    return np.where(idx > 0, w[np.maximum(idx - 1, 0)], 0.0)


def ripley_naive(ia, span: int, h_grid: Sequence[float]) -> RipleyCurve:
    """K(h) = 1/(lam N) * #{ordered pairs i != j : |t_i - t_j| <= h}, lam = N / span."""
    t = _points(ia)
    n = t.size
    if n < 2:
        raise DiagnosticError("Ripley's K needs at least two activity days")
    h_grid = np.asarray(h_grid, dtype=float)
    lam = n / span
    i, j = _pairs(t, h_grid.max())
    counts = _cumulate(np.abs(t[i] - t[j]), np.ones(i.size), h_grid)
    return RipleyCurve(h_grid, counts / (lam * n), corrected=False)


def edge_weight(ti, R, t1, tN):
    """Ripley's edge-correction factor: the share of [t_i - R, t_i + R] inside [t_1, t_N]."""
    ti = np.asarray(ti, dtype=float)
    R = np.asarray(R, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        right = (tN - ti + R) / (2 * R)
        left = (R + ti - t1) / (2 * R)
        both = (tN - t1) / (2 * R)
    interior = (t1 + R <= ti) & (ti <= tN - R)
    is_right = ti > np.maximum(tN - R, t1 + R)
    is_left = ti < np.minimum(tN - R, t1 + R)
    w = np.where(interior, 1.0, np.where(is_right, right, np.where(is_left, left, both)))
    return np.where(R == 0, 1.0, w)


def ripley_corrected(ia, span: int, h_grid: Sequence[float], p_hat) -> RipleyCurve:
    """Reweighted, edge-corrected K(h) = 1/span * sum_{i != j} 1(|t_i - t_j| <= h) / (p_i p_j w_ij).

    ``p_hat`` is the per-activity-day probability of at least one attack
    (scalar or one value per activity day).
    """
    t = _points(ia)
    n = t.size
    if n < 2:
        raise DiagnosticError("Ripley's K needs at least two activity days")
    p = np.broadcast_to(np.asarray(p_hat, dtype=float), t.shape)
    if (p <= 0).any() or (p > 1).any():
        raise DiagnosticError("p_hat must lie in (0, 1]")
    h_grid = np.asarray(h_grid, dtype=float)
    i, j = _pairs(t, h_grid.max())
    R = np.abs(t[i] - t[j])
    w = edge_weight(t[i], R, t[0], t[-1])
    vals = _cumulate(R, 1.0 / (p[i] * p[j] * w), h_grid)
    return RipleyCurve(h_grid, vals / span, corrected=True)


def state_rates(series: EventSeries, day_states: np.ndarray) -> np.ndarray:
    """Per-activity-day p_hat: the empirical activity rate of the state assigned to that day."""
    day_states = np.asarray(day_states)
    active = series.counts > 0
    rates = {s: active[day_states == s].mean() for s in np.unique(day_states)}
    return np.array([rates[s] for s in day_states[active]])


# sub-series -----------------------------------------------------------------

@dataclass(frozen=True)
class SubSeries:
    series: EventSeries
    days_in_state: int
    n_act: int
    gaps: tuple


def subseries(series: EventSeries, day_states, state: int, seed: int = 0) -> SubSeries:
    """Patch together the runs of days labeled ``state``.

    Between consecutive disjoint runs a Poisson(N / span) number of zero days
    is inserted, N being the activity days of the whole series.
    """
    day_states = np.asarray(day_states)
    if day_states.size != series.n_days:
        raise DiagnosticError("state path must cover every day of the series")
    mask = day_states == state
    if not mask.any():
        raise DiagnosticError(f"state {state} never visited")
    edges = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(int), [0]])))
    runs = list(zip(edges[::2], edges[1::2]))
    lam = series.active_days / series.n_days
    rng = np.random.default_rng(seed)
    gaps = rng.poisson(lam, len(runs) - 1)
    pieces = []
    for k, (a, b) in enumerate(runs):
        if k:
            pieces.append(np.zeros(gaps[k - 1], dtype=np.int64))
        pieces.append(series.counts[a:b])
    counts = np.concatenate(pieces)
    days = int(mask.sum())
    return SubSeries(EventSeries(series.start_day, counts), days, min(days, counts.size),
                     tuple(int(g) for g in gaps))


# bootstrap ------------------------------------------------------------------

def resample_points(ia: InterArrivalSeries, rng: np.random.Generator) -> np.ndarray:
    gaps = rng.choice(ia.durations, size=len(ia), replace=True)
    return np.cumsum(gaps)


def bootstrap_band(builder: Callable[[np.ndarray, int], RipleyCurve], ia: InterArrivalSeries, span: int,
                   resamples: int = 1000, level: float = 0.95, seed: int = 0) -> RipleyCurve:
    """Percentile band from ``resamples`` gap-resampled point sets.

    ``builder(points, span)`` computes one curve; resample ``b`` uses its own
    stream ``default_rng([seed, b])`` so results do not depend on scheduling.
    The resampled span keeps the original trailing gap after the last point.
    """
    base = builder(ia.t_list, span)
    if resamples <= 0:
        return base
    tail = span - int(ia.t_list[-1])

    def one(b):
        rng = np.random.default_rng([seed, b])
        t = resample_points(ia, rng)
        return builder(t, int(t[-1]) + max(tail, 0)).k_hat

    curves = np.array(pmap(one, range(resamples)))
    q = 100 * np.array([(1 - level) / 2, (1 + level) / 2])
    lo, hi = np.percentile(curves, q, axis=0)
    return replace(base, ci_lo=lo, ci_hi=hi)


# KS test --------------------------------------------------------------------

@dataclass(frozen=True)
class KsResult:
    n: int
    statistic: float
    alpha: float
    critical: float
    p_value: float

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical

    def to_dict(self) -> dict:
        return {"n": self.n, "statistic": self.statistic, "alpha": self.alpha,
                "critical": self.critical, "p_value": self.p_value}


def ks_critical(n: int, alpha: float) -> float:
    return float(np.sqrt(-0.5 * np.log(alpha / 2) / n))


def ks_pvalue(n: int, statistic: float) -> float:
    return float(np.clip(2 * np.exp(-2 * n * statistic ** 2), 0.0, 1.0))


def spacings_transform(durations) -> np.ndarray:
    """z_j = (y_1 + ... + y_j) / (y_1 + ... + y_m) for j < m; z_m = 1 is dropped."""
    y = np.asarray(durations, dtype=float)
    return np.cumsum(y)[:-1] / y.sum()


def ks_uniform_statistic(z) -> float:
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - z), np.max(z - (i - 1) / n)))


def ks_exponential(durations, alpha: float = 0.05, cap: float | None = None) -> KsResult:
    """Test i.i.d. exponential gaps without estimating the rate.

    ``cap`` keeps only durations <= cap before transforming.
    """
    y = np.asarray(durations, dtype=float)
    if (y <= 0).any():
        raise DiagnosticError("durations must be positive")
    if cap is not None:
        y = y[y <= cap]
    if y.size < 2:
        raise DiagnosticError("need at least two durations")
    z = spacings_transform(y)
    n = z.size
    stat = ks_uniform_statistic(z)
    return KsResult(n, stat, alpha, ks_critical(n, alpha), ks_pvalue(n, stat))


# Q-Q ------------------------------------------------------------------------

def qq_data(sample, theoretical: str = "exponential", param: float | None = None) -> np.ndarray:
    """(n, 2) array of (theoretical quantile, sorted sample) at plotting positions (i - 0.5)/n.

    ``theoretical`` is ``exponential`` (``param`` = rate, default 1/mean) or
    ``poisson`` (``param`` = mean, default sample mean).
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise DiagnosticError("empty sample")
    pp = (np.arange(1, n + 1) - 0.5) / n
    if theoretical == "exponential":
        rate = param if param is not None else 1.0 / x.mean()
        q = stats.expon.ppf(pp, scale=1.0 / rate)
    elif theoretical == "poisson":
        mu = param if param is not None else x.mean()
        q = stats.poisson.ppf(pp, mu)
    else:
        raise DiagnosticError(f"unknown theoretical distribution {theoretical!r}")
    return np.column_stack([q, x])


def window_activity_counts(series: EventSeries, delta: int) -> np.ndarray:
    """Active days per complete window, for Poisson Q-Q plots."""
    from .series import windowize
    return windowize(series, delta).full().x


def default_h_grid(h_max: float, step: float = 1.0) -> np.ndarray:
    return np.arange(step, h_max + step / 2, step)


def series_points(series: EventSeries) -> InterArrivalSeries:
    return interarrivals(series)
