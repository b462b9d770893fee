"""Self-exciting hurdle model (SEHM) for daily counts.

    P(M_i = 0 | H)  = exp(-(B_i + SE_i))
    P(M_i = r | H)  = r^-s / zeta(s) * (1 - exp(-(B_i + SE_i))),   r >= 1
    SE_i            = sum_{j < i, M_j > 0} alpha * exp(-omega * (i - j))

with a constant baseline ``B_i = b`` (optionally ``b + c*i``).  The
likelihood factorizes into an occurrence part in (b, alpha, omega[, c]) and a
zeta part in ``s``; the two are maximized separately.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from . import emissions as em
from ._parallel import pmap
from .series import EventSeries

DEFAULT_BOUNDS = {"b": (1e-6, 20.0), "alpha": (0.0, 20.0), "omega": (1e-3, 10.0), "c": (-1e-2, 1e-2)}


class SehmError(ValueError):
    pass


@dataclass(frozen=True)
class SehmModel:
    b: float
    alpha: float
    omega: float
    s: float
    c: float = 0.0

    def __post_init__(self):
        if not (self.b > 0 and self.alpha >= 0 and self.omega > 0 and self.s > 1):
            raise SehmError(f"invalid SEHM parameters {self}")

    @property
    def n_params(self) -> int:
        return 4 + (self.c != 0.0)

    def baseline(self, i):
        """B_i for 1-based day index i."""
        return self.b + self.c * np.asarray(i, dtype=float)

    def to_dict(self) -> dict:
        return {"type": "SehmModel", "b": self.b, "alpha": self.alpha, "omega": self.omega,
                "s": self.s, "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "SehmModel":
        return cls(d["b"], d["alpha"], d["omega"], d["s"], d.get("c", 0.0))


def excitation(alpha: float, omega: float, counts) -> np.ndarray:
    """SE_i for every day i = 1..N (day i sees only days before it).  Length N + 1:
    the last entry is the excitation on the day after the series ends."""
    ind = (np.asarray(counts) > 0).astype(float)
    decay = np.exp(-omega)
    x = np.concatenate([ind, [0.0]])
    return signal.lfilter([0.0, alpha * decay], [1.0, -decay], x)


def excitation_naive(alpha: float, omega: float, counts, i: int) -> float:
    counts = np.asarray(counts)
    j = np.flatnonzero(counts[: i - 1] > 0) + 1
    return float(np.sum(alpha * np.exp(-omega * (i - j))))


def intensity(model: SehmModel, history) -> tuple[float, em.EmissionModel]:
    """Attack probability for the day after ``history`` and its full count distribution."""
    history = np.asarray(history)
    i = history.size + 1
    se = excitation(model.alpha, model.omega, history)[-1]
    lam = float(model.baseline(i) + se)
    p = float(-np.expm1(-lam))
    return p, em.EmissionModel("hzeta", (p, model.s))


def excitation_ratio(model: SehmModel, history, i: int | None = None) -> float:
    """P(attack) with excitation over P(attack) without it, on day ``i`` (default: next day)."""
    history = np.asarray(history)
    if i is None:
        i = history.size + 1
    se = excitation(model.alpha, model.omega, history[: i - 1])[-1]
    return ratio_from(float(model.baseline(i)), se)


def ratio_from(b: float, se: float) -> float:
    return float(1.0 + np.exp(-b) / -np.expm1(-b) * -np.expm1(-se))


def predict_next(model: SehmModel, history) -> float:
    """Expected days until the next active day, excitation frozen at the prediction origin."""
    p, _ = intensity(model, history)
    return 1.0 / p


def _occurrence_ll(b, alpha, omega, c, ind, days):
    se = excitation(alpha, omega, ind)[:-1]
    lam = b + c * days + se
    if (lam <= 0).any():
        return -np.inf
    with np.errstate(divide="ignore"):
        act = np.log(-np.expm1(-lam[ind]))
    return float(act.sum() - lam[~ind].sum())


def occurrence_log_likelihood(model: SehmModel, counts) -> float:
    """log P(activity indicators) ignoring attack magnitudes."""
    counts = np.asarray(counts)
    ind = counts > 0
    return _occurrence_ll(model.b, model.alpha, model.omega, model.c, ind, np.arange(1, counts.size + 1))


def magnitude_log_likelihood(s: float, counts) -> float:
    pos = np.asarray(counts)
    pos = pos[pos > 0]
    return float(-s * np.log(pos).sum() - pos.size * np.log(em.zeta(s)))


def log_likelihood(model: SehmModel, counts) -> float:
    return occurrence_log_likelihood(model, counts) + magnitude_log_likelihood(model.s, counts)


def log_likelihood_naive(model: SehmModel, counts) -> float:
    """Day-by-day sum of log P(M_i | history), excitation recomputed from scratch."""
    counts = np.asarray(counts)
    total = 0.0
    for i in range(1, counts.size + 1):
        lam = model.baseline(i) + excitation_naive(model.alpha, model.omega, counts, i)
        r = counts[i - 1]
        if r == 0:
            total += -lam
        else:
            total += np.log(-np.expm1(-lam)) - model.s * np.log(r) - np.log(em.zeta(model.s))
    return float(total)


@dataclass(frozen=True)
class SehmFit:
    model: SehmModel
    log_likelihood: float
    aic: float
    converged: bool
    pinned: tuple = ()
    start_log_likelihoods: tuple = ()

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "log_likelihood": self.log_likelihood, "aic": self.aic,
                "converged": self.converged, "pinned": list(self.pinned)}


def fit(series, init: SehmModel | None = None, bounds: dict | None = None, tol: float = 1e-9,
        n_starts: int = 8, seed: int = 0, fix_alpha: float | None = None,
        trend: bool = False) -> SehmFit:
    """Maximum likelihood by bounded L-BFGS-B from ``n_starts`` seeded starting points.

    ``fix_alpha=0`` gives the homogeneous hurdle-zeta model.
    """
    counts = series.counts if isinstance(series, EventSeries) else np.asarray(series)
    ind = counts > 0
    if ind.all() or not ind.any():
        raise SehmError("SEHM needs at least one active and one inactive day")
    days = np.arange(1, counts.size + 1, dtype=float)
    bnd = dict(DEFAULT_BOUNDS)
    bnd.update(bounds or {})
    names = ["b", "omega"] + (["alpha"] if fix_alpha is None else []) + (["c"] if trend else [])

    def unpack(theta):
        p = dict(zip(names, theta))
        return p["b"], p.get("alpha", fix_alpha), p["omega"], p.get("c", 0.0)

    def negll(theta):
        v = _occurrence_ll(*unpack(theta), ind, days)
        return -v if np.isfinite(v) else 1e300

    rng = np.random.default_rng(seed)
    frac = ind.mean()
    b0 = -np.log1p(-min(frac, 0.999))
    starts = []
    if init is not None:
        starts.append({"b": init.b, "alpha": init.alpha, "omega": init.omega, "c": init.c})
    starts.append({"b": 0.5 * b0, "alpha": 0.5, "omega": 0.5, "c": 0.0})
    while len(starts) < max(n_starts, 1):
        starts.append({"b": b0 * rng.uniform(0.05, 1.0), "alpha": rng.uniform(0.0, 2.0),
                       "omega": np.exp(rng.uniform(np.log(0.01), np.log(2.0))), "c": 0.0})
    starts = starts[: max(n_starts, 1)]
    box = [bnd[n] for n in names]

    def run(start):
        x0 = np.clip([start[n] for n in names], [lo for lo, _ in box], [hi for _, hi in box])
        res = optimize.minimize(negll, x0, method="L-BFGS-B", bounds=box,
                                options={"ftol": tol, "gtol": 1e-8, "maxiter": 2000})
        return x0, res

    runs = pmap(run, starts)
    start_lls = tuple(-negll(x0) for x0, _ in runs)
    best = min(range(len(runs)), key=lambda k: (runs[k][1].fun, k))
    res = runs[best][1]
    b, alpha, omega, c = unpack(res.x)
    s_fit = em.fit_ml("hzeta", counts)
    s = s_fit.model.params[1]
    model = SehmModel(float(b), float(alpha), float(omega), float(s), float(c))
    ll = -float(res.fun) + magnitude_log_likelihood(s, counts)
    k = 4 + int(trend) - int(fix_alpha is not None)
    pinned = tuple(n for n, v in zip(names, res.x) if np.isclose(v, bnd[n][0]) or np.isclose(v, bnd[n][1]))
    if s_fit.boundary:
        pinned += ("s",)
    return SehmFit(model, ll, 2 * k - 2 * ll, bool(res.success), pinned, start_lls)


def simulate(model: SehmModel, n_days: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(n_days)
    mags = rng.zipf(model.s, n_days)
    counts = np.zeros(n_days, dtype=np.int64)
    decay = np.exp(-model.omega)
    se = 0.0
    for i in range(n_days):
        lam = model.b + model.c * (i + 1) + se
        active = u[i] < -np.expm1(-lam)
        if active:
            counts[i] = mags[i]
        se = decay * (se + model.alpha * active)
    return counts
