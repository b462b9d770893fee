"""Sensitivity of the state classification to added (previously missing) events."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hmm
from .series import EventRecord, EventSeries, merge_missing


class RobustnessError(ValueError):
    pass


def frac_missing(base: EventSeries, augmented: EventSeries) -> float:
    """(total augmented - total base) / total base."""
    if augmented.n_days != base.n_days or augmented.start_day != base.start_day:
        raise RobustnessError("series must cover the same span")
    if (augmented.counts < base.counts).any():
        raise RobustnessError("augmented series falls below the base series")
    if base.total == 0:
        raise RobustnessError("base series has no events")
    return (augmented.total - base.total) / base.total


def frac_state_changes(path_base, path_new) -> float:
    """Fraction of days whose label differs."""
    a = np.asarray(path_base)
    b = np.asarray(path_new)
    if a.shape != b.shape:
        raise RobustnessError("daily paths differ in length")
    return float(np.abs(a - b).sum() / a.size)


@dataclass(frozen=True)
class RobustnessCurve:
    steps: tuple  # (frac_missing, frac_state_changes) per step

    def rows(self) -> list[dict]:
        return [{"step": j + 1, "frac_missing": fm, "frac_changes": fc} for j, (fm, fc) in enumerate(self.steps)]


def robustness_sweep(base: EventSeries, extra: list[EventRecord], steps: int | None = None,
                     delta: int = 15, family: str = "geom", obs_kind: str = "xy",
                     tol: float = 1e-8, max_iter: int = 500) -> RobustnessCurve:
    """Reclassify after each cumulative augmentation step.

    Every run starts Baum-Welch from the baseline series' default initialization.
    """
    init = hmm.default_init(base, family, obs_kind, delta)
    ref = hmm.classify(base, delta, family, obs_kind, init=init, tol=tol, max_iter=max_iter)
    if not extra:
        return RobustnessCurve(((0.0, 0.0),))
    out = []
    for aug in merge_missing(base, extra, steps):
        new = hmm.classify(aug, delta, family, obs_kind, init=init, tol=tol, max_iter=max_iter)
        out.append((frac_missing(base, aug), frac_state_changes(ref.days, new.days)))
    return RobustnessCurve(tuple(out))


def random_extra(base: EventSeries, fraction: float, rng: np.random.Generator) -> list[EventRecord]:
    """round(fraction * total) single-attack records on uniformly random days of the span."""
    n = int(round(fraction * base.total))
    days = np.sort(rng.integers(1, base.n_days + 1, n))
    return [EventRecord(base.date_of(d), 1) for d in days]
