import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from subgeom import pathsim as ps, ratefn as rf, stats
from subgeom.errors import DomainError, PrecisionError, RangeError


def test_survival_counts():
    est = stats.empirical_survival([1, 2, 3, 4, 5], [2, 4])
    assert est.survival.tolist() == [0.8, 0.4]
    assert est.counts.tolist() == [4, 2] and est.n == 5


def test_survival_empty_thresholds():
    est = stats.empirical_survival([1.0, 2.0], [])
    assert len(est) == 0


def _censored_batch(values, T_max):
    spec = ps.StoppingSpec("return_to_set", radius=1.0, T_max=T_max)
    v = np.asarray(values, dtype=float)
    return ps.StoppingBatch(v, v >= T_max, None, np.ones_like(v), spec, 0)


def test_survival_censored():
    b = _censored_batch([1.0, 3.0, 10.0, 10.0], 10.0)
    est = stats.empirical_survival(b, [1.0, 5.0, 10.0])
    assert est.survival.tolist() == [1.0, 0.5, 0.5]
    with pytest.raises(RangeError):
        stats.empirical_survival(b, [5.0, 20.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=60))
def test_survival_is_monotone(xs):
    est = stats.empirical_survival(xs, np.linspace(0, 100, 11))
    assert np.all(np.diff(est.survival) <= 0)
    assert np.all(est.ci_half_width >= 0)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.5])
def test_loglog_slope_of_power(k):
    x = np.geomspace(1, 1e3, 20)
    fit = stats.loglog_slope((x, 0.1 * x ** -k))
    assert fit.slope == pytest.approx(-k, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_loglog_slope_guards():
    x = np.geomspace(1, 10, 6)
    with pytest.raises(PrecisionError):
        stats.loglog_slope((x[:3], x[:3] ** -1))
    with pytest.raises(RangeError):
        stats.loglog_slope((x, np.array([1, 0.5, 0.2, 0.1, 0.0, 0.0])))
    flat = stats.loglog_slope((x, np.full(6, 0.3)))
    assert flat.slope == 0.0 and flat.r_squared == 1.0


def test_fit_range_restricts():
    x = np.geomspace(1, 100, 30)
    y = np.where(x < 10, x ** -1.0, 10.0 * x ** -2.0)
    assert stats.loglog_slope((x, y), (10, 100)).slope == pytest.approx(-2.0, abs=1e-12)


def test_stretched_slope():
    x = np.linspace(1, 50, 20)
    fit = stats.stretched_slope((x, np.exp(-3 * x ** 0.5)), 0.5)
    assert fit.slope == pytest.approx(-3.0, abs=1e-12)
    with pytest.raises(DomainError):
        stats.stretched_slope((x, x), 0.0)


def test_tv_identical_and_disjoint():
    x = np.random.default_rng(0).normal(size=5000)
    assert stats.tv_distance_1d(x, x.copy()) == 0.0
    assert stats.tv_distance_1d(x, x + 100.0) == pytest.approx(2.0)


def test_tv_two_gaussians():
    rng = np.random.default_rng(1)
    a, b = rng.normal(0, 1, 200_000), rng.normal(1, 1, 200_000)
    want = 2 * (2 * sps.norm.cdf(0.5) - 1)  # 0.766
    assert stats.tv_distance_1d(a, b) == pytest.approx(want, abs=0.02)


def test_tv_against_exact_law():
    x = np.random.default_rng(2).normal(size=100_000)
    assert stats.tv_distance_1d(x, sps.norm) < 0.05
    assert stats.tv_distance_1d(x, sps.norm(3, 1)) == pytest.approx(2 * (2 * sps.norm.cdf(1.5) - 1),
                                                                    abs=0.05)


def test_tv_density_callable_renormalizes():
    x = np.random.default_rng(3).normal(size=20_000)
    with pytest.warns(UserWarning, match="renormalized"):
        d = stats.tv_distance_1d(x, lambda u: 2 * sps.norm.pdf(u))
    assert d < 0.1


def test_tv_needs_samples():
    with pytest.raises(PrecisionError):
        stats.tv_distance_1d(np.zeros(10), sps.norm)


def test_tv_weighted_is_larger():
    rng = np.random.default_rng(4)
    a, b = rng.normal(0, 1, 50_000), rng.normal(0.5, 1, 50_000)
    plain = stats.tv_distance_1d(a, b)
    weighted = stats.tv_distance_1d(a, b, f_weight=lambda u: 1 + np.abs(u))
    assert weighted > plain


def test_tv_bins_capped():
    x = np.random.default_rng(5).normal(size=1000)
    assert len(stats.fd_bin_edges(x, max_bins=7)) == 8


def _curve(values):
    grid = np.array([1.0, 2.0, 4.0, 8.0])
    return grid, stats.BoundCurve(grid, np.asarray(values, float), "test-bound")


def test_compare_equal_passes():
    grid, b = _curve([1.0, 0.5, 0.25, 0.125])
    rep = stats.compare_to_bound(grid, b.values, b)
    assert rep.passed and rep.parameters["fitted_constant"] == 1.0


def test_compare_scaled_passes():
    grid, b = _curve([1.0, 0.5, 0.25, 0.125])
    assert stats.compare_to_bound(grid, 2 * b.values, b).passed


def test_compare_dip_fails():
    grid, b = _curve([1.0, 0.5, 0.25, 0.125])
    m = b.values.copy()
    m[2] /= 2
    rep = stats.compare_to_bound(grid, m, b)
    assert not rep.passed and rep.details["failing_points"] == [4.0]
    # a wide enough interval rescues it
    assert stats.compare_to_bound(grid, m, b, ci=[0, 0, 0.2, 0]).passed


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e6))
def test_compare_rescale_invariant(c):
    grid, b = _curve([1.0, 0.6, 0.3, 0.2])
    m = np.array([0.9, 0.55, 0.33, 0.25])
    assert stats.compare_to_bound(grid, m, b).verdict == \
        stats.compare_to_bound(grid, c * m, b).verdict


def test_bound_curve_interpolation_range():
    grid, b = _curve([1.0, 0.5, 0.25, 0.125])
    assert b.at(2.0 ** 1.5) == pytest.approx(2.0 ** -1.5)
    with pytest.raises(RangeError):
        b.at(16.0)
    with pytest.raises(DomainError):
        stats.BoundCurve(grid, np.ones(4), "")


def test_maximal_constant_below_r():
    t = np.linspace(0, 5, 501)
    rep = stats.check_maximal_inequality(t, np.full((100, len(t)), 0.3), 0.5, 5.0)
    assert rep.passed and rep.measured == [0.0] and rep.bound[0] == pytest.approx(0.6)


def test_maximal_constant_above_r():
    t = np.linspace(0, 5, 501)
    rep = stats.check_maximal_inequality(t, np.full((100, len(t)), 0.6), 0.5, 5.0)
    assert rep.passed and rep.measured == [1.0] and rep.bound[0] == pytest.approx(1.2)


def test_maximal_detects_violation():
    # paths jump from 0.1 to 0.9 with no drift allowance: LHS 1 > RHS 0.2
    t = np.linspace(0, 1, 11)
    X = np.full((50, 11), 0.9)
    X[:, 0] = 0.1
    assert not stats.check_maximal_inequality(t, X, 0.5, 1.0).passed
    # the integral stops at the crossing, so only one step of f counts: (0.1 + 0.5) / 0.5
    f = lambda s, x: np.full_like(x, 5.0)
    assert stats.check_maximal_inequality(t, X, 0.5, 1.0, f).passed


def test_maximal_rejects_out_of_range():
    with pytest.raises(DomainError):
        stats.check_maximal_inequality([0, 1], [[0.5, 1.5]], 0.5, 1.0)


def test_increment_check_constant_paths():
    M = np.ones((200, 10))
    assert stats.increment_check(M, "super").passed and stats.increment_check(M, "sub").passed


def test_increment_check_coin_martingale():
    rng = np.random.default_rng(6)
    M = np.cumsum(rng.choice([-1.0, 1.0], size=(20_000, 20)), axis=1)
    assert stats.increment_check(M, "super").passed and stats.increment_check(M, "sub").passed
    assert not stats.increment_check(M + np.arange(20), "super").passed


def test_drift_check_needs_paths():
    tr = rf.LyapunovTriple(lambda x: 1 + np.asarray(x) ** 2, rf.power(2.0, 1.0, (0.0, 1.0)),
                           rf.power(2.0))
    with pytest.raises(PrecisionError):
        stats.check_drift_along_paths(np.arange(5.0), np.ones((10, 5)), tr, "super")


def _sq_triple():
    return rf.LyapunovTriple(lambda x: 1 + np.asarray(x) ** 2, rf.power(2.0, 1.0, (0.0, 1.0)),
                             rf.power(2.0))


@pytest.mark.parametrize("h, slope", [(rf.constant(1.0), -2.0), (rf.power(1.0), -1.0)])
def test_excursion_curve_exponents(h, slope):
    th = np.geomspace(2, 100, 8)
    c = stats.excursion_bound_curve(_sq_triple(), rf.BoundParams(0.25, 0.5), h, th)
    assert stats.loglog_slope((th, c.values)).slope == pytest.approx(slope, abs=1e-9)


def test_excursion_curve_below_range():
    with pytest.raises(RangeError):
        stats.excursion_bound_curve(_sq_triple(), rf.BoundParams(0.25, 0.5), rf.constant(1.0),
                                    [0.1, 1.0, 2.0, 3.0])


def test_wilson_coverage():
    rng = np.random.default_rng(7)
    p, n = 0.3, 200
    hits = rng.binomial(n, p, 4000) / n
    cover = np.mean(np.abs(hits - p) <= stats.wilson_half_width(hits, n))
    assert 0.93 <= cover <= 0.97


def test_stat_report_json():
    rep = stats.StatReport("x", {"a": np.float64(1.5)}, [1], [np.nan], [2.0], [0.1], "pass",
                           {"flag": np.bool_(True)})
    d = json.loads(rep.to_json())
    assert d["measured"] == [None] and d["details"]["flag"] is True


def test_bootstrap_interval_brackets_slope():
    rng = np.random.default_rng(8)
    times = [1.0, 2.0, 4.0, 8.0, 16.0]
    # shifted normals whose TV decays roughly like 1/t
    samples = [rng.normal(0.0, 1.0, 20_000) + 1.0 / t for t in times]
    lo, hi = stats.tv_slope_bootstrap(times, samples, sps.norm, n_boot=40, seed=1)
    assert lo < hi and lo > -2.0 and hi < 0.0
    assert math.isfinite(lo)
