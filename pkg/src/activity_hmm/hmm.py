"""Hidden Markov model over per-window (or per-event) observations.

The latent state is constant over each ``delta``-day window.  State 0 is
*Inactive* and state 1 *Active*; after fitting, states are ordered by their
daily activity probability P(M > 0).

Observation kinds:

``x``      active days per window, Binomial(len, gamma_state)
``y``      attacks per window (geometric or hurdle-geometric days)
``xy``     the joint (X, Y) density
``daily``  the window's daily counts, i.i.d. from any of the six families
``dt``     inter-arrival gaps, geometric on {1, 2, ...} with success gamma_state
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize, special

from . import _kernels
from . import emissions as em
from .series import EventSeries, InterArrivalSeries, WindowSeries, interarrivals, windowize

log = logging.getLogger(__name__)

OBS_KINDS = ("x", "y", "xy", "daily", "dt")
_OBS_ALIASES = {"m-daily": "daily", "m": "daily", "deltat": "dt", "delta_t": "dt"}
GAMMA_CLIP = (1e-10, 1 - 1e-10)


class HmmError(ValueError):
    pass


def canonical_obs(kind: str) -> str:
    k = str(kind).lower()
    k = _OBS_ALIASES.get(k, k)
    if k not in OBS_KINDS:
        raise HmmError(f"unknown observation kind {kind!r}; expected one of {OBS_KINDS}")
    return k


def two_state(p0: float, q0: float) -> np.ndarray:
    """Transition matrix [[1-p0, p0], [q0, 1-q0]]."""
    return np.array([[1 - p0, p0], [q0, 1 - q0]], dtype=float)


def stationary(P: np.ndarray) -> np.ndarray:
    d = P.shape[0]
    A = np.vstack([P.T - np.eye(d), np.ones(d)])
    b = np.zeros(d + 1)
    b[-1] = 1
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


@dataclass(frozen=True)
class HmmModel:
    transition: np.ndarray
    emissions: tuple
    initial: np.ndarray
    obs_kind: str = "xy"
    delta: int = 15

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        pi = np.array(self.initial, dtype=float)
        d = P.shape[0]
        if P.shape != (d, d) or len(self.emissions) != d or pi.shape != (d,):
            raise HmmError("transition, emissions and initial disagree on the state count")
        if (P < 0).any() or (P > 1).any() or not np.allclose(P.sum(axis=1), 1, atol=1e-12, rtol=0):
            raise HmmError("transition matrix must be row-stochastic")
        if (pi < 0).any() or abs(pi.sum() - 1) > 1e-9:
            raise HmmError("initial distribution must sum to one")
        P.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial", pi)
        object.__setattr__(self, "emissions", tuple(self.emissions))
        object.__setattr__(self, "obs_kind", canonical_obs(self.obs_kind))
        if self.obs_kind in ("y", "xy") and any(e.family not in ("geom", "hgeom") for e in self.emissions):
            raise HmmError("y and xy observations need geometric or hurdle-geometric emissions")
        if self.obs_kind == "dt" and any(e.family != "geom" for e in self.emissions):
            raise HmmError("dt observations use geometric waiting times")

    @property
    def d(self) -> int:
        return self.transition.shape[0]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([e.activity for e in self.emissions])

    @property
    def n_params(self) -> int:
        """Free parameters: off-diagonal transitions plus identifiable emission parameters."""
        per_state = 1 if self.obs_kind in ("x", "dt") else self.emissions[0].n_params
        return self.d * (self.d - 1) + self.d * per_state

    def to_dict(self) -> dict:
        return {
            "type": "HmmModel",
            "d": self.d,
            "obs_kind": self.obs_kind,
            "delta": self.delta,
            "transition": self.transition.tolist(),
            "initial": self.initial.tolist(),
            "emissions": [e.to_dict() for e in self.emissions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HmmModel":
        return cls(np.array(d["transition"]), tuple(em.EmissionModel.from_dict(e) for e in d["emissions"]),
                   np.array(d["initial"]), d["obs_kind"], d["delta"])


# observations ---------------------------------------------------------------

@dataclass(frozen=True)
class Observations:
    """Aligned per-step arrays for one observation kind.

    ``x``, ``y``, ``lengths`` are per window; ``daily`` holds the raw daily
    counts and ``starts`` the index of each window's first day.  For ``dt``
    only ``dt`` is used.
    """

    kind: str
    x: np.ndarray = None
    y: np.ndarray = None
    lengths: np.ndarray = None
    daily: np.ndarray = None
    starts: np.ndarray = None
    dt: np.ndarray = None

    def __len__(self) -> int:
        return int(self.dt.size if self.kind == "dt" else self.x.size)


def make_observations(data, kind: str, delta: int | None = None,
                      include_partial: bool = False) -> Observations:
    """Build observations from an EventSeries, WindowSeries or InterArrivalSeries.

    The ragged final window is dropped unless ``include_partial``.
    """
    kind = canonical_obs(kind)
    if kind == "dt":
        if isinstance(data, EventSeries):
            data = interarrivals(data)
        if not isinstance(data, InterArrivalSeries):
            raise HmmError("dt observations need an event series or inter-arrival series")
        return Observations("dt", dt=data.durations.astype(float))
    daily = None
    if isinstance(data, EventSeries):
        if delta is None:
            raise HmmError("window length required")
        daily = data.counts
        data = windowize(data, delta)
    if not isinstance(data, WindowSeries):
        raise HmmError(f"cannot build {kind} observations from {type(data).__name__}")
    if kind == "daily" and daily is None:
        raise HmmError("daily observations need the underlying event series")
    ws = data if include_partial else data.full()
    if len(ws) == 0:
        raise HmmError("no complete window; series shorter than delta")
    starts = np.arange(len(ws)) * ws.delta
    if daily is not None:
        daily = daily[: int(ws.lengths.sum())]
    return Observations(kind, ws.x.astype(float), ws.y.astype(float), ws.lengths.astype(float),
                        daily, starts)


def _as_obs(model: HmmModel, obs) -> Observations:
    if isinstance(obs, Observations):
        if obs.kind != model.obs_kind:
            raise HmmError(f"model expects {model.obs_kind} observations, got {obs.kind}")
        return obs
    return make_observations(obs, model.obs_kind, model.delta)


def log_emissions(model: HmmModel, obs: Observations) -> np.ndarray:
    """(K, d) matrix of log P(observation_n | state)."""
    obs = _as_obs(model, obs)
    cols = []
    for e in model.emissions:
        g = e.activity
        if obs.kind == "x":
            cols.append(em.log_window_x(g, obs.lengths, obs.x))
        elif obs.kind == "y":
            cols.append(em.log_window_y(e, obs.lengths, obs.y))
        elif obs.kind == "xy":
            cols.append(em.log_window_joint(e, obs.lengths, obs.x, obs.y))
        elif obs.kind == "daily":
            vals, inv = np.unique(obs.daily, return_inverse=True)
            per_day = em.logpmf(e, vals)[inv]
            cols.append(np.add.reduceat(per_day, obs.starts))
        else:
            with np.errstate(divide="ignore"):
                cols.append(np.log(g) + special.xlogy(obs.dt - 1, 1 - g))
    return np.column_stack(cols)


# inference ------------------------------------------------------------------

@dataclass(frozen=True)
class ForwardBackward:
    log_likelihood: float
    posteriors: np.ndarray        # (K, d)
    expected_transitions: np.ndarray  # (d, d), summed over steps
    log_alpha: np.ndarray         # (K, d)


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def forward(model: HmmModel, obs, logB: np.ndarray | None = None) -> np.ndarray:
    """log alpha_n(j) = log P(obs_1..n, state_n = j)."""
    if logB is None:
        logB = log_emissions(model, obs)
    K, d = logB.shape
    if K == 0:
        raise HmmError("empty observation sequence")
    la, bad = _kernels.forward(_log(model.initial), model.transition, np.ascontiguousarray(logB))
    if bad >= 0:
        raise HmmError(f"observation {bad} has zero likelihood under every state path")
    if not np.isfinite(la[-1].max()):
        raise HmmError("observations have zero likelihood under the model")
    return la


def forward_backward(model: HmmModel, obs) -> ForwardBackward:
    obs = _as_obs(model, obs)
    logB = log_emissions(model, obs)
    la = forward(model, obs, logB)
    K, d = logB.shape
    A = model.transition
    lb = _kernels.backward(A, np.ascontiguousarray(logB))
    ll = float(special.logsumexp(la[-1]))
    post = np.exp(la + lb - ll)
    post /= post.sum(axis=1, keepdims=True)
    if K > 1:
        with np.errstate(divide="ignore"):
            lxi = la[:-1, :, None] + _log(A)[None] + (logB[1:] + lb[1:])[:, None, :] - ll
        xi = np.exp(lxi).sum(axis=0)
    else:
        xi = np.zeros((d, d))
    return ForwardBackward(ll, post, xi, la)


def log_likelihood(model: HmmModel, obs) -> float:
    return float(special.logsumexp(forward(model, _as_obs(model, obs))[-1]))


@dataclass(frozen=True)
class StatePath:
    states: np.ndarray
    posteriors: np.ndarray
    log_likelihood: float
    log_prob: float

    def __len__(self) -> int:
        return int(self.states.size)


def viterbi(model: HmmModel, obs) -> StatePath:
    """Most probable state sequence; ties go to the lower state index."""
    obs = _as_obs(model, obs)
    logB = log_emissions(model, obs)
    K, d = logB.shape
    states, best = _kernels.viterbi(_log(model.initial), _log(model.transition), np.ascontiguousarray(logB))
    if not np.isfinite(best):
        raise HmmError("observations have zero likelihood under the model")
    fb = forward_backward(model, obs)
    return StatePath(states, fb.posteriors, fb.log_likelihood, float(best))


# learning -------------------------------------------------------------------

def _clip_gamma(g):
    return float(np.clip(g, *GAMMA_CLIP))


def _update_emission(e: em.EmissionModel, obs: Observations, w: np.ndarray) -> em.EmissionModel:
    W = w.sum()
    if W <= 0:
        return e
    kind = obs.kind
    if kind == "x":
        return em.with_activity(e, _clip_gamma(np.dot(w, obs.x) / np.dot(w, obs.lengths)))
    if kind == "dt":
        return em.geometric(_clip_gamma(W / np.dot(w, obs.dt)))
    if kind == "daily":
        wd = np.repeat(w, np.diff(np.append(obs.starts, obs.daily.size)))
        return _clip_model(em.fit_ml(e.family, obs.daily, wd, start=e).model)
    wy = np.dot(w, obs.y)
    if e.family == "geom":
        return em.geometric(_clip_gamma(wy / (wy + np.dot(w, obs.lengths))))
    wx = np.dot(w, obs.x)
    if kind == "xy":
        mu = (wy - wx) / wy if wy > 0 else 0.0
        return em.hurdle_geometric(_clip_gamma(wx / np.dot(w, obs.lengths)), min(_clip_gamma(mu), GAMMA_CLIP[1]))
    return _update_hgeom_y(e, obs, w)


def _clip_model(e: em.EmissionModel) -> em.EmissionModel:
    if e.family in ("geom",):
        return em.geometric(_clip_gamma(e.params[0]))
    if e.family in ("hgeom", "hzeta"):
        p = list(e.params)
        p[0] = _clip_gamma(p[0])
        if e.family == "hgeom":
            p[1] = min(p[1], GAMMA_CLIP[1])
        return em.EmissionModel(e.family, tuple(p))
    return e


def _update_hgeom_y(e, obs, w):
    # no closed form for the marginal Y density; numerical M-step, never worse than e
    def negq(theta):
        g, mu = special.expit(theta)
        m = em.hurdle_geometric(_clip_gamma(g), min(mu, GAMMA_CLIP[1]))
        return -float(np.dot(w, em.log_window_y(m, obs.lengths, obs.y)))

    x0 = special.logit(np.clip(e.params, 1e-9, 1 - 1e-9))
    f0 = negq(x0)
    res = optimize.minimize(negq, x0, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 400})
    if not res.fun < f0:
        return e
    g, mu = special.expit(res.x)
    return em.hurdle_geometric(_clip_gamma(g), min(mu, GAMMA_CLIP[1]))


def canonicalize(model: HmmModel) -> HmmModel:
    """Order states by increasing daily activity probability."""
    order = np.argsort(model.gammas, kind="stable")
    if np.array_equal(order, np.arange(model.d)):
        return model
    P = model.transition[np.ix_(order, order)]
    return replace(model, transition=P, emissions=tuple(model.emissions[i] for i in order),
                   initial=model.initial[order])


@dataclass(frozen=True)
class FitTrace:
    log_likelihoods: list
    converged: bool
    collapsed: bool
    iterations: int

    def to_dict(self) -> dict:
        return {"log_likelihoods": list(self.log_likelihoods), "converged": self.converged,
                "collapsed": self.collapsed, "iterations": self.iterations}


def em_step(model: HmmModel, obs: Observations) -> tuple[HmmModel, ForwardBackward]:
    fb = forward_backward(model, obs)
    xi = fb.expected_transitions
    P = np.array(model.transition)
    rows = xi.sum(axis=1)
    for i in range(model.d):
        if rows[i] > 0:
            P[i] = xi[i] / rows[i]
    P /= P.sum(axis=1, keepdims=True)
    emissions = tuple(_update_emission(e, obs, fb.posteriors[:, j]) for j, e in enumerate(model.emissions))
    pi = fb.posteriors[0] / fb.posteriors[0].sum()
    return replace(model, transition=P, emissions=emissions, initial=pi), fb


def baum_welch(init: HmmModel, obs, tol: float = 1e-8, max_iter: int = 500) -> tuple[HmmModel, FitTrace]:
    """EM until the relative log-likelihood gain drops below ``tol``.

    The returned model is canonicalized (Inactive state first).
    """
    if tol <= 0:
        raise HmmError("tol must be positive")
    obs = _as_obs(init, obs)
    model = init
    lls = []
    converged = collapsed = False
    for it in range(max_iter):
        new, fb = em_step(model, obs)
        lls.append(fb.log_likelihood)
        if fb.posteriors.sum(axis=0).min() < 1e-6:
            collapsed = True
        if len(lls) > 1 and (lls[-1] - lls[-2]) <= tol * abs(lls[-2]):
            converged = True
            break
        model = new
    else:
        log.warning("Baum-Welch stopped after %d iterations without converging", max_iter)
    # `model` is the iterate whose likelihood is lls[-1]
    return canonicalize(model), FitTrace(lls, converged, collapsed, len(lls))


def default_init(series: EventSeries, family: str = "geom", obs_kind: str = "xy",
                 delta: int = 15, d: int = 2) -> HmmModel:
    """Deterministic starting point: activity rates 0.5x and 2x the pooled rate 1/mean(dT)."""
    family = em.canonical_family(family)
    obs_kind = canonical_obs(obs_kind)
    if obs_kind == "dt":
        family = "geom"
    counts = series.counts
    if (counts > 0).any():
        gbar = 1.0 / interarrivals(series).durations.mean()
        base = em.fit_ml(family, counts).model
    else:
        gbar = GAMMA_CLIP[0]
        base = _family_default(family)
    if base.family in ("hgeom", "hzeta") and base.params[0] == 0:
        base = _family_default(family)
    factors = np.geomspace(0.5, 2.0, d) if d > 1 else np.ones(1)
    gammas = [_clip_gamma(min(f * gbar, 1 - 1e-6)) for f in factors]
    if d == 2:
        P = two_state(0.1, 0.1)
    else:
        P = np.full((d, d), 0.1 / (d - 1)) + np.eye(d) * (0.9 - 0.1 / (d - 1))
    return HmmModel(P, tuple(em.with_activity(base, g) for g in gammas), stationary(P), obs_kind, delta)


def _family_default(family):
    return {
        "poisson": em.EmissionModel("poisson", (0.1,)),
        "szeta": em.EmissionModel("szeta", (3.0,)),
        "geom": em.geometric(0.1),
        "polya": em.EmissionModel("polya", (1.0, 0.1)),
        "hzeta": em.EmissionModel("hzeta", (0.1, 3.0)),
        "hgeom": em.hurdle_geometric(0.1, 0.1),
    }[family]


def perturbed(model: HmmModel, rng: np.random.Generator, scale: float = 0.5) -> HmmModel:
    """Random restart around ``model``: activity rates scaled by log-normal factors."""
    new = tuple(em.with_activity(e, _clip_gamma(min(e.activity * np.exp(scale * rng.standard_normal()), 0.99)))
                for e in model.emissions)
    return replace(model, emissions=new)


def fit(series_or_obs, init: HmmModel, tol: float = 1e-8, max_iter: int = 500,
        n_starts: int = 1, seed: int = 0) -> tuple[HmmModel, FitTrace]:
    """Baum-Welch from ``init`` plus ``n_starts - 1`` seeded random restarts; best likelihood wins."""
    from ._parallel import pmap

    obs = series_or_obs if isinstance(series_or_obs, Observations) else \
        make_observations(series_or_obs, init.obs_kind, init.delta)
    starts = [init]
    rng = np.random.default_rng(seed)
    starts += [perturbed(init, rng) for _ in range(n_starts - 1)]
    results = pmap(lambda m: baum_welch(m, obs, tol, max_iter), starts)
    best = max(range(len(results)), key=lambda i: (results[i][1].log_likelihoods[-1], -i))
    return results[best]


# classification -------------------------------------------------------------

def fractional_activity(n_spurt: int, delta: int, n_days: int) -> float:
    return n_spurt * delta / n_days


def rate_estimate(ia: InterArrivalSeries) -> float:
    """Daily activity rate as the reciprocal of the mean inter-arrival gap."""
    if len(ia) == 0:
        raise HmmError("no inter-arrival durations")
    return float(1.0 / np.mean(ia.durations))


def daily_states(states: Sequence[int], delta: int, n_days: int) -> np.ndarray:
    """Broadcast window labels to member days; days past the last window take its label."""
    states = np.asarray(states)
    out = np.repeat(states, delta)[:n_days]
    if out.size < n_days:
        out = np.concatenate([out, np.full(n_days - out.size, states[-1])])
    return out


def event_daily_states(states: Sequence[int], ia: InterArrivalSeries, n_days: int) -> np.ndarray:
    """Day-level labels for a dt-mode path: days in (t_{k-1}, t_k] take event k's state."""
    states = np.asarray(states)
    out = np.repeat(states, ia.durations)
    if out.size < n_days:
        out = np.concatenate([out, np.full(n_days - out.size, states[-1])])
    return out[:n_days]


@dataclass(frozen=True)
class Classification:
    model: HmmModel
    path: StatePath
    trace: FitTrace
    summary: dict
    days: np.ndarray = field(repr=False)


def classify(series: EventSeries, delta: int = 15, family: str = "geom", obs_kind: str = "xy",
             d: int = 2, tol: float = 1e-8, max_iter: int = 500, init: HmmModel | None = None,
             n_starts: int = 1, seed: int = 0) -> Classification:
    """windowize -> Baum-Welch -> Viterbi.

    Training uses complete windows only; the ragged final window is still
    decoded so that every day receives a label.
    """
    obs_kind = canonical_obs(obs_kind)
    if obs_kind == "dt":
        delta = 1
    warnings = []
    if init is None:
        init = default_init(series, family, obs_kind, delta, d)
    if series.active_days == 0:
        warnings.append("degenerate data: no activity days; single Inactive state used")
        e = em.with_activity(init.emissions[0], GAMMA_CLIP[0])
        P = two_state(0.1, 0.1) if d == 2 else init.transition
        model = HmmModel(P, tuple([e] * d), stationary(P), obs_kind, delta)
        trace = FitTrace([], True, True, 0)
    else:
        model, trace = fit(make_observations(series, obs_kind, delta), init, tol, max_iter, n_starts, seed)
        if not trace.converged:
            warnings.append("Baum-Welch did not converge")
        if trace.collapsed:
            warnings.append("a state's posterior mass collapsed below 1e-6")
    if obs_kind == "dt":
        if series.active_days == 0:
            path = StatePath(np.zeros(0, dtype=np.int64), np.zeros((0, d)), 0.0, 0.0)
            days = np.zeros(series.n_days, dtype=np.int64)
        else:
            ia = interarrivals(series)
            path = viterbi(model, make_observations(ia, "dt"))
            days = event_daily_states(path.states, ia, series.n_days)
        n_train = len(path)
        n_spurt = int((path.states == d - 1).sum())
        f = float((days == d - 1).sum() / series.n_days)
    else:
        path = viterbi(model, make_observations(series, obs_kind, delta, include_partial=True))
        n_train = series.n_days // delta
        n_spurt = int((path.states[:n_train] == d - 1).sum())
        f = fractional_activity(n_spurt, delta, series.n_days)
        days = daily_states(path.states, delta, series.n_days)
    summary = {
        "delta": delta,
        "family": model.emissions[0].family,
        "obs_kind": obs_kind,
        "n_days": series.n_days,
        "params": [e.to_dict()["params"] for e in model.emissions],
        "transition": model.transition.tolist(),
        "n_windows": n_train,
        "n_spurt": n_spurt,
        "f": f,
        "log_likelihood": trace.log_likelihoods[-1] if trace.log_likelihoods else None,
        "iterations": trace.iterations,
        "converged": trace.converged,
        "warnings": warnings,
    }
    return Classification(model, path, trace, summary, days)
