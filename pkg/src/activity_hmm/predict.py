"""One-step-ahead prediction of the gap to the next active day.

Three conditional-mean predictors: the HMM over gaps (``dt`` observations),
the SEHM, and the running sample mean.  Parameters are fit once per training
horizon ``n`` and then held fixed while the predictors roll forward through
the remaining gaps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from . import hmm, sehm
from ._parallel import pmap
from .series import EventSeries, InterArrivalSeries, interarrivals

ESTIMATORS = ("hmm", "sehm", "baseline")


class PredictionError(ValueError):
    pass


def smape(actuals, predictions) -> float:
    """Mean of |a - p| / (a + p), as a percentage in [0, 100]."""
    a = np.asarray(actuals, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if a.shape != p.shape:
        raise PredictionError("actuals and predictions differ in length")
    if a.size == 0:
        raise PredictionError("nothing to score")
    if (a <= 0).any() or (p <= 0).any():
        raise PredictionError("SMAPE needs positive values")
    with np.errstate(invalid="ignore"):
        r = np.abs(a - p) / (a + p)
    r = np.where(np.isinf(p), 1.0, r)
    return float(100 * r.mean())


def predict_baseline(history) -> float:
    return float(np.mean(history))


def next_state_probs(model: hmm.HmmModel, history) -> np.ndarray:
    """beta_i = P(Q_{n+1} = i | dT_1..n)."""
    la = hmm.forward(model, hmm.make_observations(InterArrivalSeries(history), "dt"))
    return _beta(model, la[-1])


def _beta(model, log_alpha_n):
    a = np.exp(log_alpha_n - special.logsumexp(log_alpha_n))
    b = a @ model.transition
    return b / b.sum()


def predict_hmm(model: hmm.HmmModel, history) -> float:
    if model.obs_kind != "dt":
        raise PredictionError("HMM prediction needs a model fit on inter-arrival gaps")
    if len(history) < 1:
        raise PredictionError("need at least one observed gap")
    return float(next_state_probs(model, history) @ (1.0 / model.gammas))


def hmm_rolling(model: hmm.HmmModel, durations, n: int) -> np.ndarray:
    """Predictions of dT_{k+1} from dT_1..k for k = n..m-1 with parameters fixed."""
    la = hmm.forward(model, hmm.make_observations(InterArrivalSeries(durations), "dt"))
    means = 1.0 / model.gammas
    return np.array([_beta(model, la[k - 1]) @ means for k in range(n, len(durations))])


def sehm_rolling(model: sehm.SehmModel, counts, t_list, n: int) -> np.ndarray:
    """Predictions from origins t_k + 1, k = n..m-1, excitation from the full daily history."""
    counts = np.asarray(counts)
    se = sehm.excitation(model.alpha, model.omega, counts)
    t = np.asarray(t_list)[n - 1: len(t_list) - 1]
    lam = model.baseline(t + 1) + se[t]
    return 1.0 / -np.expm1(-lam)


def baseline_rolling(durations, n: int) -> np.ndarray:
    d = np.asarray(durations, dtype=float)
    cum = np.cumsum(d)
    k = np.arange(n, d.size)
    return cum[k - 1] / k


@dataclass(frozen=True)
class PredictionRun:
    estimator: str
    n: int
    predictions: np.ndarray
    actuals: np.ndarray
    smape: float
    aic: float | None = None
    log_likelihood: float | None = None
    model: dict | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {"estimator": self.estimator, "n": self.n, "smape": self.smape, "aic": self.aic,
                "log_likelihood": self.log_likelihood, "model": self.model,
                "predictions": self.predictions.tolist(), "actuals": self.actuals.tolist()}


def fit_hmm_dt(series: EventSeries, n: int, tol=1e-8, max_iter=500, d=2,
               n_starts=1, seed=0) -> tuple[hmm.HmmModel, float]:
    """Fit the gap HMM on dT_1..n; returns (model, log P(dT_1..n))."""
    ia = interarrivals(series)
    train = InterArrivalSeries(ia.durations[:n])
    day_n = int(ia.t_list[n - 1])
    init = hmm.default_init(EventSeries(series.start_day, series.counts[:day_n]), "geom", "dt", 1, d)
    model, _ = hmm.fit(hmm.make_observations(train, "dt"), init, tol, max_iter, n_starts, seed)
    return model, hmm.log_likelihood(model, hmm.make_observations(train, "dt"))


def fit_sehm_prefix(series: EventSeries, n: int, n_starts=8, seed=0) -> tuple[sehm.SehmModel, float]:
    """Fit the SEHM on days 1..t_n; returns (model, occurrence log-likelihood of those days)."""
    ia = interarrivals(series)
    counts = series.counts[: int(ia.t_list[n - 1])]
    f = sehm.fit(counts, n_starts=n_starts, seed=seed)
    return f.model, sehm.occurrence_log_likelihood(f.model, counts)


# occurrence-level parameter counts used for the AIC comparison on dT_1..n
SEHM_OCCURRENCE_PARAMS = 3


def evaluate_horizon(series: EventSeries, n: int, estimators: Sequence[str] = ESTIMATORS,
                     tol=1e-8, max_iter=500, n_starts=1, sehm_starts=8, seed=0) -> list[PredictionRun]:
    ia = interarrivals(series)
    m = len(ia)
    if not 1 <= n < m:
        raise PredictionError(f"training horizon {n} must leave at least one gap to predict (m = {m})")
    actual = ia.durations[n:].astype(float)
    runs = []
    for est in estimators:
        est = est.lower()
        if est == "baseline":
            pred = baseline_rolling(ia.durations, n)
            runs.append(PredictionRun("baseline", n, pred, actual, smape(actual, pred)))
        elif est == "hmm":
            model, ll = fit_hmm_dt(series, n, tol, max_iter, 2, n_starts, seed)
            pred = hmm_rolling(model, ia.durations, n)
            runs.append(PredictionRun("hmm", n, pred, actual, smape(actual, pred),
                                      2 * model.n_params - 2 * ll, ll, model.to_dict()))
        elif est == "sehm":
            model, ll = fit_sehm_prefix(series, n, sehm_starts, seed)
            pred = sehm_rolling(model, series.counts, ia.t_list, n)
            runs.append(PredictionRun("sehm", n, pred, actual, smape(actual, pred),
                                      2 * SEHM_OCCURRENCE_PARAMS - 2 * ll, ll, model.to_dict()))
        else:
            raise PredictionError(f"unknown estimator {est!r}")
    return runs


def rolling_eval(series: EventSeries, estimators: Sequence[str] = ESTIMATORS,
                 train_horizons: Sequence[int] = (100,), **kw) -> list[PredictionRun]:
    per = pmap(lambda n: evaluate_horizon(series, int(n), estimators, **kw), train_horizons)
    return [r for runs in per for r in runs]


def comparison_table(runs: Sequence[PredictionRun]) -> list[dict]:
    """One row per horizon: AIC and SMAPE per estimator (None where not run)."""
    rows = {}
    for r in runs:
        row = rows.setdefault(r.n, {"n": r.n})
        row[f"aic_{r.estimator}"] = r.aic
        row[f"smape_{r.estimator}"] = r.smape
    return [rows[n] for n in sorted(rows)]
