import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from activity_hmm import ppstats
from activity_hmm.series import EventSeries, InterArrivalSeries, interarrivals


def _csr(n, span, rng):
    days = np.sort(rng.choice(span, n, replace=False) + 1)
    c = np.zeros(span, dtype=int)
    c[days - 1] = 1
    return EventSeries("2000-01-01", c)


def test_naive_two_points():
    k = ppstats.ripley_naive([1, 2], 2, [1])
    assert k.k_hat[0] == pytest.approx(1.0)
    assert ppstats.ripley_naive([1, 5, 12], 20, [2]).k_hat[0] == 0.0


def test_naive_saturates():
    t = np.array([3, 7, 8, 15, 20])
    k = ppstats.ripley_naive(t, 30, [17, 40])
    lam = 5 / 30
    np.testing.assert_allclose(k.k_hat, [5 * 4 / (lam * 5)] * 2)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(1, 300), min_size=2, max_size=60, unique=True))
def test_naive_matches_pair_count(points):
    t = np.sort(points)
    h = np.arange(1, 40, dtype=float)
    k = ppstats.ripley_naive(t, 300, h)
    d = np.abs(t[:, None] - t[None, :])
    brute = np.array([((d <= hh).sum() - t.size) for hh in h]) * 300 / t.size ** 2
    np.testing.assert_allclose(k.k_hat, brute, rtol=1e-12)
    assert (np.diff(k.k_hat) >= 0).all() and (k.k_hat >= 0).all()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 200), min_size=2, max_size=40, unique=True), st.floats(0.05, 1.0))
def test_corrected_matches_double_sum(points, p):
    t = np.sort(points).astype(float)
    h = np.arange(1, 30, dtype=float)
    got = ppstats.ripley_corrected(t, 200, h, p).k_hat
    brute = np.zeros(h.size)
    for i in range(t.size):
        for j in range(t.size):
            if i != j:
                R = abs(t[i] - t[j])
                w = ppstats.edge_weight(t[i], R, t[0], t[-1])
                brute += (R <= h) / (p * p * w)
    np.testing.assert_allclose(got, brute / 200, rtol=1e-12)


def test_edge_weight_cases():
    assert ppstats.edge_weight(100, 10, 1, 100) == pytest.approx(0.5)
    assert ppstats.edge_weight(1, 10, 1, 100) == pytest.approx(0.5)
    assert ppstats.edge_weight(50, 10, 1, 100) == 1.0
    assert ppstats.edge_weight(50, 80, 1, 100) == pytest.approx(99 / 160)


def test_corrected_interior_matches_naive():
    # every pair is interior when h is small and points sit away from the edges
    t = np.array([1, 50, 52, 55, 100], dtype=float)
    h = np.array([5.0])
    lam = 5 / 100
    corr = ppstats.ripley_corrected(t, 100, h, 1.0).k_hat
    naive = ppstats.ripley_naive(t, 100, h).k_hat
    np.testing.assert_allclose(corr, naive * lam * 5 / 100)


def test_csr_mean_curve():
    rng = np.random.default_rng(0)
    h = np.arange(5, 51, dtype=float)
    curves = [ppstats.ripley_corrected(interarrivals(_csr(500, 5000, rng)), 5000, h, 0.1).k_hat
              for _ in range(40)]
    mean = np.mean(curves, axis=0)
    assert (np.abs(mean - 2 * h) <= 0.2 * h).all()


def test_bootstrap_degenerate_levels():
    ia = interarrivals(_csr(100, 1000, np.random.default_rng(1)))
    h = np.arange(1, 20, dtype=float)
    build = lambda t, span: ppstats.ripley_naive(t, span, h)  # noqa: E731
    one = ppstats.bootstrap_band(build, ia, 1000, resamples=1, seed=2)
    np.testing.assert_allclose(one.ci_lo, one.ci_hi)
    med = ppstats.bootstrap_band(build, ia, 1000, resamples=51, level=0.0, seed=2)
    np.testing.assert_allclose(med.ci_lo, med.ci_hi)
    none = ppstats.bootstrap_band(build, ia, 1000, resamples=0)
    assert none.ci_lo is None and none.rows()[0]["ci_lo"] is None


def test_bootstrap_is_seeded():
    ia = interarrivals(_csr(100, 1000, np.random.default_rng(1)))
    h = np.arange(1, 20, dtype=float)
    build = lambda t, span: ppstats.ripley_naive(t, span, h)  # noqa: E731
    a = ppstats.bootstrap_band(build, ia, 1000, resamples=50, seed=5)
    b = ppstats.bootstrap_band(build, ia, 1000, resamples=50, seed=5)
    np.testing.assert_array_equal(a.ci_lo, b.ci_lo)


def test_subseries():
    s = EventSeries("2000-01-01", [1, 2, 0, 0, 3, 0, 4, 0])
    states = np.array([1, 1, 0, 0, 1, 0, 1, 1])
    sub = ppstats.subseries(s, states, 1, seed=3)
    assert sub.series.total == 1 + 2 + 3 + 4
    assert sub.days_in_state == 5
    assert sub.series.n_days >= 5
    assert sub == ppstats.subseries(s, states, 1, seed=3)
    all_active = ppstats.subseries(s, np.ones(8, dtype=int), 1)
    assert all_active.series == s and all_active.gaps == ()
    with pytest.raises(ppstats.DiagnosticError):
        ppstats.subseries(s, np.zeros(8, dtype=int), 1)


def test_state_rates():
    s = EventSeries("2000-01-01", [1, 0, 0, 0, 1, 1])
    p = ppstats.state_rates(s, np.array([0, 0, 0, 0, 1, 1]))
    np.testing.assert_allclose(p, [0.25, 1.0, 1.0])


def test_ks_published_values():
    assert ppstats.ks_pvalue(234, 0.0597) == pytest.approx(0.377, abs=0.005)
    assert ppstats.ks_pvalue(192, 0.0492) == pytest.approx(0.789, abs=0.005)


def test_ks_transform():
    z = ppstats.spacings_transform([1, 1, 2])
    np.testing.assert_allclose(z, [0.25, 0.5])
    r = ppstats.ks_exponential([1, 1, 2])
    assert r.n == 2


def test_ks_size():
    rng = np.random.default_rng(3)
    rate = np.mean([ppstats.ks_exponential(rng.exponential(1.0, 500)).reject for _ in range(2000)])
    assert 0.03 <= rate <= 0.07


def test_ks_cap_and_errors():
    r = ppstats.ks_exponential([1, 2, 3, 50, 4], cap=10)
    assert r.n == 3
    with pytest.raises(ppstats.DiagnosticError):
        ppstats.ks_exponential([1])
    with pytest.raises(ppstats.DiagnosticError):
        ppstats.ks_exponential([0, 1, 2])


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 2000), st.floats(0.0, 1.0), st.floats(0.001, 0.5))
def test_pvalue_critical_consistency(n, stat, alpha):
    crit = ppstats.ks_critical(n, alpha)
    p = ppstats.ks_pvalue(n, stat)
    assert 0.0 <= p <= 1.0
    if abs(stat - crit) > 1e-9:
        assert (stat > crit) == (p < alpha)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=50))
def test_spacings_inside_unit_interval(y):
    z = ppstats.spacings_transform(y)
    assert ((z > 0) & (z < 1)).all()
    assert 0 <= ppstats.ks_uniform_statistic(z) <= 1


def test_qq():
    pp = (np.arange(1, 101) - 0.5) / 100
    exact = stats.expon.ppf(pp, scale=2.0)
    q = ppstats.qq_data(exact, "exponential", 0.5)
    np.testing.assert_allclose(q[:, 0], q[:, 1])
    flat = ppstats.qq_data(np.full(10, 3.0), "exponential")
    assert (flat[:, 1] == 3).all()
    # a single 10^4 sample has ~4.5% relative noise at the 5% quantile, so average the curve
    rng = np.random.default_rng(0)
    q = np.mean([ppstats.qq_data(rng.exponential(1 / 0.0857, 10_000), "exponential", 0.0857)
                 for _ in range(20)], axis=0)
    mid = slice(500, 9500)
    assert np.max(np.abs(q[mid, 1] / q[mid, 0] - 1)) < 0.05
    pq = ppstats.qq_data([0, 1, 1, 2, 3], "poisson")
    assert pq.shape == (5, 2)
    with pytest.raises(ppstats.DiagnosticError):
        ppstats.qq_data([1.0], "gamma")
