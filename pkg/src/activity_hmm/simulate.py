"""Synthetic activity profiles from a windowed HMM or an SEHM."""
from __future__ import annotations

import datetime as dt

import numpy as np

from . import emissions as em
from . import sehm
from .hmm import HmmModel, stationary, two_state
from .series import EventSeries

DEFAULT_START = dt.date(2000, 1, 1)


def hmm_states(model: HmmModel, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    P = np.cumsum(model.transition, axis=1)
    u = rng.random(n_steps)
    states = np.empty(n_steps, dtype=np.int64)
    s = int(np.searchsorted(np.cumsum(model.initial), u[0], side="right"))
    states[0] = min(s, model.d - 1)
    for n in range(1, n_steps):
        s = int(np.searchsorted(P[s], u[n], side="right"))
        s = min(s, model.d - 1)
        states[n] = s
    return states


def simulate_hmm(model: HmmModel, n_days: int, rng: np.random.Generator,
                 start_day: dt.date = DEFAULT_START) -> tuple[EventSeries, np.ndarray]:
    """Daily counts with the state held fixed over each ``model.delta``-day window.

    Returns the series and the per-window state sequence.
    """
    n_windows = -(-n_days // model.delta)
    states = hmm_states(model, n_windows, rng)
    day_states = np.repeat(states, model.delta)[:n_days]
    counts = np.zeros(n_days, dtype=np.int64)
    for j, e in enumerate(model.emissions):
        idx = np.flatnonzero(day_states == j)
        counts[idx] = em.sample(e, rng, idx.size)
    return EventSeries(start_day, counts), states


def two_state_model(gamma0=0.09, gamma1=0.36, p0=0.1, q0=0.1, delta=15, family="geom",
                    mu=(0.1, 0.3), obs_kind="xy") -> HmmModel:
    """Convenience constructor for the usual Inactive/Active generator."""
    family = em.canonical_family(family)
    if family == "hgeom":
        emis = (em.hurdle_geometric(gamma0, mu[0]), em.hurdle_geometric(gamma1, mu[1]))
    else:
        emis = (em.geometric(gamma0), em.geometric(gamma1))
    P = two_state(p0, q0)
    return HmmModel(P, emis, stationary(P), obs_kind, delta)


def simulate_sehm(model: sehm.SehmModel, n_days: int, rng: np.random.Generator,
                  start_day: dt.date = DEFAULT_START) -> EventSeries:
    return EventSeries(start_day, sehm.simulate(model, n_days, rng))
