"""Regime-switching models for dated event-count series.

Submodules
----------
series      ingestion, windowing, inter-arrival durations, missing-data merge
emissions   daily count families, window densities, maximum-likelihood fits
hmm         windowed hidden Markov model: Baum-Welch, Viterbi, classification
sehm        self-exciting hurdle model
ppstats     Ripley's K, bootstrap bands, exponential-spacings KS test
predict     one-step-ahead gap prediction and SMAPE/AIC comparison
robustness  sensitivity of the classification to added events
simulate    synthetic generators
"""
__version__ = "0.1.0"

from .series import EventRecord, EventSeries, ingest, interarrivals, load_series, windowize  # noqa: F401
from .emissions import EmissionModel, fit_ml  # noqa: F401
from .hmm import HmmModel, classify  # noqa: F401
from .sehm import SehmModel  # noqa: F401
