import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activity_hmm import emissions as em
from activity_hmm import predict, sehm
from activity_hmm.sehm import SehmModel
from activity_hmm.series import EventSeries, interarrivals

TRUTH = SehmModel(0.1, 0.5, 0.2, 2.5)


@pytest.fixture(scope="module")
def recovery_fits():
    fits = []
    for seed in range(20):
        counts = sehm.simulate(TRUTH, 20000, np.random.default_rng([33, seed]))
        fits.append(sehm.fit(counts, seed=seed).model)
    return fits


def _rel(fits, name):
    true = getattr(TRUTH, name)
    return np.array([abs(getattr(f, name) - true) / true for f in fits])


def test_validation():
    with pytest.raises(sehm.SehmError):
        SehmModel(0.0, 0.5, 0.2, 2.5)
    with pytest.raises(sehm.SehmError):
        SehmModel(0.1, 0.5, 0.2, 1.0)
    assert SehmModel.from_dict(TRUTH.to_dict()) == TRUTH


def test_empty_history():
    p, dist = sehm.intensity(TRUTH, [])
    assert 1 - p == pytest.approx(np.exp(-0.1))
    assert em.pmf(dist, 0) == pytest.approx(np.exp(-0.1))


def test_homogeneous_when_alpha_zero():
    m = SehmModel(0.3, 0.0, 0.2, 2.5)
    for h in ([], [1, 0, 5], [3] * 20):
        assert 1 - sehm.intensity(m, h)[0] == pytest.approx(np.exp(-0.3))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 4), max_size=40), st.floats(0.01, 2), st.floats(0.0, 3), st.floats(0.01, 3),
       st.floats(1.1, 6))
def test_day_law_sums_to_one(history, b, alpha, omega, s):
    _, dist = sehm.intensity(SehmModel(b, alpha, omega, s), history)
    K = em.truncation_point(dist, 1e-12, kmax=10 ** 6)
    total = em.pmf(dist, np.arange(K + 1)).sum() + em.tail_mass(dist, K + 1)
    assert total == pytest.approx(1.0, abs=1e-9)
    r = np.arange(1, 50)
    assert (np.diff(em.pmf(dist, r)) < 0).all()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=60), st.floats(0.01, 2), st.floats(0.0, 3),
       st.floats(0.01, 3), st.floats(1.1, 6))
def test_incremental_matches_naive(counts, b, alpha, omega, s):
    m = SehmModel(b, alpha, omega, s)
    se = sehm.excitation(alpha, omega, counts)
    for i in range(1, len(counts) + 2):
        assert se[i - 1] == pytest.approx(sehm.excitation_naive(alpha, omega, counts + [0], i), abs=1e-12)
    assert sehm.log_likelihood(m, counts) == pytest.approx(sehm.log_likelihood_naive(m, counts), rel=1e-12)


def test_excitation_ratio():
    assert sehm.ratio_from(0.4, 0.0) == 1.0
    b = 0.4
    assert sehm.ratio_from(b, 1e6) == pytest.approx(1 + np.exp(-b) / (1 - np.exp(-b)))
    bs, ses = np.meshgrid(np.geomspace(1e-3, 10, 40), np.geomspace(1e-6, 50, 40))
    r = np.vectorize(sehm.ratio_from)(bs, ses)
    assert (r > 1).all()
    assert sehm.excitation_ratio(TRUTH, [0, 0, 0]) == 1.0
    assert sehm.excitation_ratio(TRUTH, [1, 0, 0]) > 1.0


def test_predict_next_limits():
    assert sehm.predict_next(SehmModel(40.0, 0.5, 0.2, 2.5), [1, 0]) == pytest.approx(1.0)
    g = 0.2
    m = SehmModel(-np.log(1 - g), 0.0, 0.2, 2.5)
    assert sehm.predict_next(m, [0, 1, 0, 3]) == pytest.approx(1 / g)


def test_predict_next_beats_baseline_on_sehm_stream():
    counts = sehm.simulate(TRUTH, 20000, np.random.default_rng(4))
    ia = interarrivals(EventSeries("2000-01-01", counts))
    n = 200
    actual = ia.durations[n:]
    s_sehm = predict.smape(actual, predict.sehm_rolling(TRUTH, counts, ia.t_list, n))
    s_base = predict.smape(actual, predict.baseline_rolling(ia.durations, n))
    assert s_sehm < s_base
    # the rolling predictor and the one-shot predictor agree
    k = n + 5
    day = int(ia.t_list[k - 1])
    assert predict.sehm_rolling(TRUTH, counts, ia.t_list, n)[5] == pytest.approx(
        sehm.predict_next(TRUTH, counts[:day]))


def test_fit_alpha_zero_is_homogeneous_ml():
    counts = sehm.simulate(SehmModel(0.3, 0.0, 1.0, 2.0), 5000, np.random.default_rng(2))
    f = sehm.fit(counts, fix_alpha=0.0)
    assert np.exp(-f.model.b) == pytest.approx((counts == 0).mean(), rel=1e-5)
    assert f.aic == pytest.approx(2 * 3 - 2 * f.log_likelihood)


def test_fit_contract():
    counts = sehm.simulate(TRUTH, 5000, np.random.default_rng(5))
    f = sehm.fit(counts, n_starts=6, seed=1)
    occ = sehm.occurrence_log_likelihood(f.model, counts)
    assert all(occ >= s - 1e-9 for s in f.start_log_likelihoods)
    assert f.aic == pytest.approx(8 - 2 * f.log_likelihood)
    assert f.log_likelihood == pytest.approx(sehm.log_likelihood(f.model, counts))
    assert sehm.fit(counts, n_starts=6, seed=1) == f
    with pytest.raises(sehm.SehmError):
        sehm.fit(np.zeros(10, dtype=int))


def test_fit_with_trend():
    counts = sehm.simulate(SehmModel(0.05, 0.5, 0.2, 2.5, c=2e-5), 8000, np.random.default_rng(6))
    f = sehm.fit(counts, trend=True)
    assert f.model.n_params == 5
    assert f.log_likelihood >= sehm.fit(counts).log_likelihood - 1e-6


def test_recovery_of_excitation_size_and_tail(recovery_fits):
    for name in ("alpha", "s"):
        assert (_rel(recovery_fits, name) <= 0.2).all(), name


def test_fit_is_at_least_as_likely_as_truth(recovery_fits):
    for seed, f in enumerate(recovery_fits):
        counts = sehm.simulate(TRUTH, 20000, np.random.default_rng([33, seed]))
        assert sehm.log_likelihood(f, counts) >= sehm.log_likelihood(TRUTH, counts) - 1e-6


@pytest.mark.xfail(strict=True, reason="b (and occasionally omega) weakly identified at 20000 days; see ledger")
def test_recovery_all_parameters_all_seeds(recovery_fits):
    for name in ("b", "alpha", "omega", "s"):
        assert (_rel(recovery_fits, name) <= 0.2).all(), name


def test_simulate_alpha_zero_has_no_autocorrelation():
    counts = sehm.simulate(SehmModel(0.2, 0.0, 0.5, 2.5), 200_000, np.random.default_rng(8))
    ind = (counts > 0).astype(float) - (counts > 0).mean()
    for lag in (1, 2, 5):
        rho = np.dot(ind[:-lag], ind[lag:]) / np.dot(ind, ind)
        assert abs(rho) < 4 / np.sqrt(ind.size)
