"""Per-day count distributions and the window-level densities they induce.

Six families with support on the nonnegative integers:

==================  ============  =============================================
family              params        P(M = k)
==================  ============  =============================================
``poisson``         (lam,)        e^-lam lam^k / k!
``szeta``           (s,)          (k+1)^-s / zeta(s)
``geom``            (gamma,)      (1-gamma) gamma^k
``polya``           (r, y)        C(k+r-1, k) (1-y)^r y^k
``hzeta``           (gamma, s)    1-gamma at 0; gamma k^-s / zeta(s) for k >= 1
``hgeom``           (gamma, mu)   1-gamma at 0; gamma (1-mu) mu^(k-1) for k >= 1
==================  ============  =============================================

For the geometric and hurdle families ``gamma`` is exactly P(M > 0), the daily
activity probability of a state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, special

FAMILIES = ("poisson", "szeta", "geom", "polya", "hzeta", "hgeom")
FAMILY_NAMES = {
    "poisson": "Poisson",
    "szeta": "Shifted zeta",
    "geom": "Geometric",
    "polya": "Polya",
    "hzeta": "Hurdle-based zeta",
    "hgeom": "Hurdle-based geometric",
}
_ALIASES = {
    "geometric": "geom", "shiftedzeta": "szeta", "shifted_zeta": "szeta",
    "hurdlezeta": "hzeta", "hurdle_zeta": "hzeta", "hurdlegeometric": "hgeom",
    "hurdle_geometric": "hgeom", "negbin": "polya",
}
N_PARAMS = {"poisson": 1, "szeta": 1, "geom": 1, "polya": 2, "hzeta": 2, "hgeom": 2}
PARAM_NAMES = {
    "poisson": ("lam",), "szeta": ("s",), "geom": ("gamma",),
    "polya": ("r", "y"), "hzeta": ("gamma", "s"), "hgeom": ("gamma", "mu"),
}

S_BOUNDS = (1.0001, 50.0)
R_BOUNDS = (1e-3, 1e6)


class EmissionError(ValueError):
    pass


def canonical_family(family: str) -> str:
    f = str(family).lower()
    f = _ALIASES.get(f, f)
    if f not in FAMILIES:
        raise EmissionError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return f


def zeta(s):
    """Riemann zeta for s > 1."""
    return special.zeta(s, 1.0)


@dataclass(frozen=True)
class EmissionModel:
    family: str
    params: tuple

    def __post_init__(self):
        fam = canonical_family(self.family)
        object.__setattr__(self, "family", fam)
        params = tuple(float(p) for p in np.atleast_1d(self.params))
        object.__setattr__(self, "params", params)
        if len(params) != N_PARAMS[fam]:
            raise EmissionError(f"{fam} takes {N_PARAMS[fam]} parameters, got {len(params)}")
        _check_domain(fam, params)

    @property
    def n_params(self) -> int:
        return N_PARAMS[self.family]

    @property
    def activity(self) -> float:
        """P(M > 0)."""
        return activity_prob(self)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(zip(PARAM_NAMES[self.family], self.params))}

    @classmethod
    def from_dict(cls, d: dict) -> "EmissionModel":
        fam = canonical_family(d["family"])
        p = d["params"]
        if isinstance(p, Mapping):
            p = [p[n] for n in PARAM_NAMES[fam]]
        return cls(fam, tuple(p))


def _check_domain(fam, p):
    ok = {
        "poisson": lambda: p[0] >= 0,
        "szeta": lambda: p[0] > 1,
        "geom": lambda: 0 <= p[0] < 1,
        "polya": lambda: p[0] > 0 and 0 <= p[1] < 1,
        "hzeta": lambda: 0 <= p[0] <= 1 and p[1] > 1,
        "hgeom": lambda: 0 <= p[0] <= 1 and 0 <= p[1] < 1,
    }[fam]()
    if not ok or not all(np.isfinite(p)):
        raise EmissionError(f"parameters {p} outside the {fam} domain")


def geometric(gamma):
    return EmissionModel("geom", (gamma,))


def hurdle_geometric(gamma, mu):
    return EmissionModel("hgeom", (gamma, mu))


# pmf ------------------------------------------------------------------------

def logpmf(model: EmissionModel, k):
    k = np.asarray(k, dtype=float)
    fam, p = model.family, model.params
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam == "poisson":
            out = special.xlogy(k, p[0]) - p[0] - special.gammaln(k + 1)
        elif fam == "szeta":
            out = -p[0] * np.log(k + 1) - np.log(zeta(p[0]))
        elif fam == "geom":
            out = np.log1p(-p[0]) + special.xlogy(k, p[0])
        elif fam == "polya":
            r, y = p
            out = (special.gammaln(k + r) - special.gammaln(r) - special.gammaln(k + 1)
                   + r * np.log1p(-y) + special.xlogy(k, y))
        elif fam == "hzeta":
            g, s = p
            pos = np.log(g) - s * np.log(np.maximum(k, 1)) - np.log(zeta(s))
            out = np.where(k == 0, np.log1p(-g), pos)
        else:
            g, mu = p
            pos = np.log(g) + np.log1p(-mu) + special.xlogy(k - 1, mu)
            out = np.where(k == 0, np.log1p(-g), pos)
    out = np.where((k < 0) | (k != np.floor(k)), -np.inf, out)
    return out[()] if out.ndim == 0 else out


def pmf(model: EmissionModel, k):
    return np.exp(logpmf(model, k))


def tail_mass(model: EmissionModel, k: int) -> float:
    """P(M >= k), computed in closed form (Hurwitz zeta for the zeta families)."""
    k = int(k)
    if k <= 0:
        return 1.0
    fam, p = model.family, model.params
    if fam == "poisson":
        return float(special.gammainc(k, p[0])) if p[0] > 0 else 0.0
    if fam == "geom":
        return float(p[0] ** k)
    if fam == "hgeom":
        return float(p[0] * p[1] ** (k - 1))
    if fam == "szeta":
        return float(special.zeta(p[0], k + 1) / zeta(p[0]))
    if fam == "hzeta":
        return float(p[0] * special.zeta(p[1], k) / zeta(p[1]))
    r, y = p
    if y == 0:
        return 0.0
    # P(NB >= k) = I_y(k, r)
    return float(special.betainc(k, r, y))


def activity_prob(model: EmissionModel) -> float:
    return float(1.0 - pmf(model, 0))


def truncation_point(model: EmissionModel, tail: float = 1e-10, kmax: int = 10**7) -> int:
    """Smallest K with P(M > K) < tail, capped at ``kmax``."""
    lo, hi = 0, 1
    while hi < kmax and tail_mass(model, hi + 1) >= tail:
        lo, hi = hi, hi * 2
    hi = min(hi, kmax)
    while lo < hi:
        mid = (lo + hi) // 2
        if tail_mass(model, mid + 1) < tail:
            hi = mid
        else:
            lo = mid + 1
    return hi


def mean(model: EmissionModel) -> float:
    fam, p = model.family, model.params
    if fam == "poisson":
        return p[0]
    if fam == "geom":
        return p[0] / (1 - p[0])
    if fam == "hgeom":
        return p[0] / (1 - p[1])
    if fam == "polya":
        return p[0] * p[1] / (1 - p[1])
    if fam == "szeta":
        return float(zeta(p[0] - 1) / zeta(p[0]) - 1) if p[0] > 2 else np.inf
    return float(p[0] * zeta(p[1] - 1) / zeta(p[1])) if p[1] > 2 else np.inf


def with_activity(model: EmissionModel, gamma: float) -> EmissionModel:
    """Same family and shape, rescaled so that P(M > 0) = gamma."""
    gamma = float(np.clip(gamma, 1e-10, 1 - 1e-10))
    fam, p = model.family, model.params
    if fam == "geom":
        return EmissionModel(fam, (gamma,))
    if fam in ("hgeom", "hzeta"):
        return EmissionModel(fam, (gamma, p[1]))
    if fam == "poisson":
        return EmissionModel(fam, (-np.log1p(-gamma),))
    if fam == "polya":
        r = p[0]
        return EmissionModel(fam, (r, float(-np.expm1(np.log1p(-gamma) / r))))
    # shifted zeta: P(0) = 1/zeta(s) is decreasing in activity, s in S_BOUNDS
    lo, hi = S_BOUNDS
    target = 1.0 / (1.0 - gamma)
    if target >= zeta(lo):
        return EmissionModel(fam, (lo,))
    if target <= zeta(hi):
        return EmissionModel(fam, (hi,))
    s = optimize.brentq(lambda s: zeta(s) - target, lo, hi, xtol=1e-12)
    return EmissionModel(fam, (s,))


def sample(model: EmissionModel, rng: np.random.Generator, size=None):
    fam, p = model.family, model.params
    if fam == "poisson":
        return rng.poisson(p[0], size)
    if fam == "geom":
        return rng.geometric(1 - p[0], size) - 1
    if fam == "polya":
        if p[1] == 0:
            return np.zeros(size, dtype=np.int64) if size is not None else 0
        return rng.negative_binomial(p[0], 1 - p[1], size)
    if fam == "szeta":
        return rng.zipf(p[0], size) - 1
    active = rng.random(size) < p[0]
    if fam == "hgeom":
        pos = rng.geometric(1 - p[1], size)
    else:
        pos = rng.zipf(p[1], size)
    return np.where(active, pos, 0)


# ML fitting -----------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    model: EmissionModel
    log_likelihood: float
    aic: float
    n_params: int
    boundary: bool = False
    n_obs: float = 0.0
    histogram: dict = field(default=None, compare=False)

    def to_dict(self) -> dict:
        d = {
            "model": self.model.to_dict(),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "n_params": self.n_params,
            "boundary": self.boundary,
            "n_obs": self.n_obs,
        }
        if self.histogram is not None:
            d["histogram"] = self.histogram
        return d


def log_likelihood(model: EmissionModel, data, weights=None) -> float:
    values, w = _aggregate(data, weights)
    lp = logpmf(model, values)
    mask = w > 0
    return float(np.sum(w[mask] * lp[mask]))


def _aggregate(data, weights):
    data = np.asarray(data)
    if data.size == 0:
        raise EmissionError("cannot fit an empty sample")
    if (data < 0).any() or (data != np.floor(data)).any():
        raise EmissionError("counts must be nonnegative integers")
    if weights is None:
        values, w = np.unique(data, return_counts=True)
        return values.astype(float), w.astype(float)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != data.shape or (weights < 0).any():
        raise EmissionError("weights must be nonnegative and match the data")
    values, inv = np.unique(data, return_inverse=True)
    return values.astype(float), np.bincount(inv.ravel(), weights.ravel(), minlength=values.size)


def _zeta_exponent(sum_w, sum_wlog):
    """argmax_s  -s*sum_wlog - sum_w*log zeta(s) on S_BOUNDS."""
    if sum_w <= 0 or sum_wlog <= 0:
        return S_BOUNDS[1], True
    lo, hi = S_BOUNDS

    def score(s):
        # derivative of the objective: -sum_wlog - sum_w * zeta'(s)/zeta(s)
        h = 1e-6 * s
        dlog = (np.log(zeta(s + h)) - np.log(zeta(s - h))) / (2 * h)
        return -sum_wlog - sum_w * dlog

    if score(lo) <= 0:
        return lo, True
    if score(hi) >= 0:
        return hi, True
    return optimize.brentq(score, lo, hi, xtol=1e-12), False


def fit_ml(family: str, data, weights=None, start: EmissionModel | None = None) -> FitResult:
    """(Weighted) maximum likelihood over the family's parameter domain.

    Closed forms for Poisson, geometric and hurdle-geometric; a 1-D root/line
    search for the zeta exponent and for the Polya shape ``r``.  ``boundary``
    is set when the optimum sits on the edge of the allowed domain, e.g. an
    all-zero sample.
    """
    fam = canonical_family(family)
    v, w = _aggregate(data, weights)
    W = w.sum()
    if W <= 0:
        raise EmissionError("total weight must be positive")
    m = float(np.dot(w, v) / W)
    pos = v > 0
    Wp = float(w[pos].sum())
    boundary = False

    if fam == "poisson":
        model = EmissionModel(fam, (m,))
        boundary = m == 0
    elif fam == "geom":
        model = EmissionModel(fam, (m / (1 + m),))
        boundary = m == 0
    elif fam == "szeta":
        s, boundary = _zeta_exponent(W, float(np.dot(w, np.log(v + 1))))
        model = EmissionModel(fam, (s,))
    elif fam == "hgeom":
        g = Wp / W
        if Wp > 0:
            mp = float(np.dot(w[pos], v[pos]) / Wp)
            mu = (mp - 1) / mp
        else:
            mu = 0.0
        model = EmissionModel(fam, (g, mu))
        boundary = Wp == 0 or g == 1 or mu == 0
    elif fam == "hzeta":
        g = Wp / W
        s, b = _zeta_exponent(Wp, float(np.dot(w[pos], np.log(v[pos]))) if Wp > 0 else 0.0)
        model = EmissionModel(fam, (g, s))
        boundary = b or g in (0.0, 1.0)
    else:
        model, boundary = _fit_polya(v, w, m, W)

    ll = log_likelihood(model, v, w)
    if start is not None and start.family == fam:
        # numerical searches should never lose to the caller's starting point
        ll0 = log_likelihood(start, v, w)
        if ll0 > ll:
            model, ll = start, ll0
    k = N_PARAMS[fam]
    return FitResult(model, ll, 2 * k - 2 * ll, k, bool(boundary), float(W))


def _fit_polya(v, w, m, W):
    if m == 0:
        return EmissionModel("polya", (1.0, 0.0)), True

    def negll(logr):
        r = np.exp(logr)
        y = m / (r + m)
        ll = (np.dot(w, special.gammaln(v + r) - special.gammaln(r) - special.gammaln(v + 1))
              + W * r * np.log1p(-y) + W * m * np.log(y))
        return -ll

    lo, hi = np.log(R_BOUNDS[0]), np.log(R_BOUNDS[1])
    # coarse grid first so the bounded search starts in the right basin
    grid = np.linspace(lo, hi, 61)
    vals = np.array([negll(g) for g in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(negll, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-10})
    logr = res.x if res.fun <= vals[i] else grid[i]
    r = float(np.exp(logr))
    boundary = logr <= lo + 1e-6 or logr >= hi - 1e-6
    return EmissionModel("polya", (r, m / (r + m))), boundary


def largest_remainder(expected: np.ndarray, total: int) -> np.ndarray:
    """Round ``expected`` to integers that sum to ``total``."""
    floor = np.floor(expected).astype(int)
    short = int(total) - int(floor.sum())
    if short > 0:
        order = np.argsort(-(expected - floor), kind="stable")
        floor[order[:short]] += 1
    return floor


def expected_histogram(model: EmissionModel, n_days: int, kmax: int = 4) -> dict:
    """Expected day counts for k = 0..kmax and for k > kmax."""
    probs = pmf(model, np.arange(kmax + 1))
    probs = np.append(probs, tail_mass(model, kmax + 1))
    expected = n_days * probs / probs.sum()
    rounded = largest_remainder(expected, n_days)
    labels = [str(k) for k in range(kmax + 1)] + [f">{kmax}"]
    return {"labels": labels, "expected": expected.tolist(), "rounded": rounded.tolist()}


def observed_histogram(data, kmax: int = 4) -> list[int]:
    data = np.asarray(data)
    return [int((data == k).sum()) for k in range(kmax + 1)] + [int((data > kmax).sum())]


def aic_table(data_by_state: Mapping, families: Sequence[str] = FAMILIES,
              kmax: int = 4) -> dict:
    """Fit every family to every state's daily counts; returns {state: [FitResult]}."""
    out = {}
    for state, data in data_by_state.items():
        data = np.asarray(data)
        rows = []
        for fam in families:
            fit = fit_ml(fam, data)
            hist = expected_histogram(fit.model, data.size, kmax)
            hist["observed"] = observed_histogram(data, kmax)
            rows.append(FitResult(fit.model, fit.log_likelihood, fit.aic, fit.n_params,
                                  fit.boundary, fit.n_obs, hist))
        out[state] = rows
    return out


# window densities -----------------------------------------------------------

def _logbinom(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def _log_comb_r1(r, k):
    """log C(r-1, r-k) with C(-1, 0) = 1 at r = k = 0; -inf where r < k or (k = 0 < r)."""
    r = np.asarray(r, dtype=float)
    k = np.asarray(k, dtype=float)
    with np.errstate(invalid="ignore"):
        val = special.gammaln(np.maximum(r, 1)) - special.gammaln(np.maximum(r - k + 1, 1)) \
            - special.gammaln(np.maximum(k, 1))
    val = np.where((r == 0) & (k == 0), 0.0, val)
    return np.where((r < k) | ((k == 0) & (r > 0)), -np.inf, val)


def log_window_x(gamma, delta, k):
    """log Binomial(delta, gamma) pmf at k."""
    k = np.asarray(k, dtype=float)
    delta = np.asarray(delta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _logbinom(delta, k) + special.xlogy(k, gamma) + special.xlogy(delta - k, 1 - gamma)
    return np.where((k < 0) | (k > delta), -np.inf, out)


def window_pmf_x(gamma: float, delta: int, k: int) -> float:
    return float(np.exp(log_window_x(gamma, delta, k)))


def poisson_bound(gamma: float, delta: int, k: int) -> float:
    """Upper bound on |Binomial(delta, gamma) - Poisson(delta*gamma)| at k."""
    lam = delta * gamma
    b = -np.expm1(-lam)
    if k > 0:
        b = min(b, lam / k)
    return float(b * gamma)


def log_window_y_geometric(gamma, delta, r):
    r = np.asarray(r, dtype=float)
    delta = np.asarray(delta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (delta * np.log1p(-gamma) + special.xlogy(r, gamma)
               + special.gammaln(delta + r) - special.gammaln(r + 1) - special.gammaln(delta))
    return np.where(r < 0, -np.inf, out)


def window_pmf_y_geometric(gamma: float, delta: int, r: int) -> float:
    return float(np.exp(log_window_y_geometric(gamma, delta, r)))


def log_window_joint(model: EmissionModel, delta, k, r):
    k = np.asarray(k, dtype=float)
    r = np.asarray(r, dtype=float)
    delta = np.asarray(delta, dtype=float)
    comb = _logbinom(delta, k) + _log_comb_r1(r, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        if model.family == "geom":
            g = model.params[0]
            out = comb + delta * np.log1p(-g) + special.xlogy(r, g)
        elif model.family == "hgeom":
            g, mu = model.params
            out = (comb + special.xlogy(delta - k, 1 - g) + special.xlogy(k, g)
                   + special.xlogy(k, 1 - mu) + special.xlogy(r - k, mu))
        else:
            raise EmissionError(f"joint window density needs geom or hgeom, not {model.family}")
    out = np.where((k < 0) | (k > delta) | (r < k), -np.inf, out)
    return np.where(np.isnan(out), -np.inf, out)


def window_pmf_joint(model: EmissionModel, delta: int, k: int, r: int) -> float:
    return float(np.exp(log_window_joint(model, delta, k, r)))


def log_window_y(model: EmissionModel, delta, r):
    """log P(Y = r) for a window of ``delta`` days."""
    if model.family == "geom":
        return log_window_y_geometric(model.params[0], delta, r)
    if model.family != "hgeom":
        raise EmissionError(f"window Y density needs geom or hgeom, not {model.family}")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    delta = np.broadcast_to(np.asarray(delta, dtype=float), r.shape)
    kgrid = np.arange(int(delta.max()) + 1, dtype=float)
    terms = log_window_joint(model, delta[:, None], kgrid[None, :], r[:, None])
    return special.logsumexp(terms, axis=1)
