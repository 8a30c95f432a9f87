import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from seqtune.data import load_fixture
from seqtune.dist_fit import (
    FAMILIES,
    SHIFTS,
    DistFitError,
    admissible,
    cvm_criterion,
    default_families,
    dist_study,
    family_cdf,
    family_loglik,
    fit_mle,
    shift_search,
    summarize_study,
    write_study_csv,
)


def test_lognormal_two_points():
    r = fit_mle([1.0, math.e**2, 1.0, math.e**2], "lognormal")
    assert r.params[0] == pytest.approx(1.0, abs=1e-12)
    assert r.params[1] ** 2 == pytest.approx(1.0, abs=1e-12)


def test_lognormal_exact_two_point_sample_needs_three():
    with pytest.raises(DistFitError):
        fit_mle([1.0, math.e**2], "lognormal")


def test_normal_closed_form():
    x = np.array([0.3, 1.7, -2.0, 4.25, 0.5])
    r = fit_mle(x, "normal")
    assert r.params[0] == pytest.approx(x.mean(), abs=1e-12)
    assert r.params[1] ** 2 == pytest.approx(np.sum((x - x.mean()) ** 2) / 5, abs=1e-12)
    assert r.loglik == pytest.approx(stats.norm.logpdf(x, *r.params).sum(), rel=1e-12)


def test_normal_constant_sample_rejected():
    with pytest.raises(DistFitError):
        fit_mle([2.0] * 10, "normal")


def test_gamma_on_exponential_draws():
    x = np.random.default_rng(0).exponential(1.0, 5000)
    r = fit_mle(x, "gamma")
    assert abs(r.params[0] - 1.0) < 0.05
    ref_shape, _, ref_scale = stats.gamma.fit(x, floc=0)
    assert r.params[0] == pytest.approx(ref_shape, rel=1e-4)
    assert 1 / r.params[1] == pytest.approx(ref_scale, rel=1e-4)


def test_weibull_matches_scipy_fit():
    x = stats.weibull_min.rvs(1.7, scale=2.0, size=2000, random_state=1)
    r = fit_mle(x, "weibull")
    k, _, lam = stats.weibull_min.fit(x, floc=0)
    assert r.params[0] == pytest.approx(k, rel=1e-4)
    assert r.params[1] == pytest.approx(lam, rel=1e-4)


def test_inverse_families_fit_reciprocals():
    x = 1.0 / np.random.default_rng(2).gamma(3.0, 0.5, 1500)
    inv = fit_mle(x, "invgamma")
    base = fit_mle(1.0 / x, "gamma")
    np.testing.assert_allclose(inv.params, base.params, rtol=1e-6)
    # densities differ by the Jacobian of x -> 1/x
    assert inv.loglik == pytest.approx(base.loglik - 2 * np.log(x).sum(), rel=1e-9)


def test_loggamma_and_beta_support():
    assert not admissible("loggamma", [0.5, 2.0], 0.0)
    assert admissible("loggamma", [0.5, 2.0], 0.6)
    assert not admissible("beta", [0.0, 0.5], 0.0)
    assert admissible("beta", [0.0, 0.5], 0.1)
    assert not admissible("beta", [0.0, 0.5], 0.5)
    with pytest.raises(DistFitError):
        fit_mle([0.0, 0.1, 0.2], "lognormal")


def test_loglik_matches_scipy_density():
    rng = np.random.default_rng(3)
    x = rng.uniform(1.2, 3.0, 40)
    for fam in ("gamma", "weibull", "lognormal", "invgamma", "invweibull"):
        r = fit_mle(x, fam)
        assert r.loglik == pytest.approx(family_loglik(fam, r.params, x), rel=1e-10)
    r = fit_mle(x, "invweibull")
    k, lam = r.params
    ref = stats.invweibull.logpdf(x, k, scale=1 / lam).sum()
    assert r.loglik == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("family", [f for f in FAMILIES if f != "beta"])
def test_loglik_not_worse_than_start(family):
    x = np.random.default_rng(4).lognormal(0.5, 0.4, 300) + 1.0
    r = fit_mle(x, family)
    assert r.loglik >= r.start_loglik - 1e-9


def test_beta_fit_and_start():
    x = np.random.default_rng(5).beta(2.0, 5.0, 800)
    r = fit_mle(x, "beta")
    a, b, _, _ = stats.beta.fit(x, floc=0, fscale=1)
    np.testing.assert_allclose(r.params, (a, b), rtol=1e-3)
    assert r.loglik >= r.start_loglik


def test_cvm_examples():
    assert cvm_criterion([3.0], lambda x: np.full_like(x, 0.5)) == pytest.approx(1 / 12)
    n = 7
    x = np.arange(n, dtype=float)
    perfect = lambda v: (2 * (v + 1) - 1) / (2 * n)
    assert cvm_criterion(x, perfect) == pytest.approx(1 / (12 * n), abs=1e-15)


def test_cvm_matches_scipy_statistic():
    x = np.random.default_rng(6).normal(size=200)
    ours = cvm_criterion(x, stats.norm.cdf)
    assert ours == pytest.approx(stats.cramervonmises(x, "norm").statistic, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 200))
def test_cvm_lower_bound(seed, n):
    x = np.random.default_rng(seed).normal(size=n)
    assert cvm_criterion(x, stats.norm.cdf) >= 1 / (12 * n) - 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0.01, 100), b=st.floats(-50, 50))
def test_cvm_affine_invariance(seed, a, b):
    x = np.random.default_rng(seed).normal(size=50)
    t1 = cvm_criterion(x, stats.norm.cdf)
    t2 = cvm_criterion(a * x + b, lambda v: stats.norm.cdf((v - b) / a))
    assert t2 == pytest.approx(t1, rel=1e-9, abs=1e-12)


def test_shift_search_skips_zero_for_log_family():
    x = np.concatenate([[0.0], np.random.default_rng(7).uniform(0.05, 0.4, 60)])
    r = shift_search(x, "lognormal")
    assert r.shift > 0


def test_shift_search_is_argmin():
    x = np.random.default_rng(8).lognormal(2.0, 0.5, 200)
    best = shift_search(x, "gamma")
    for c in (0.0,) + SHIFTS:
        assert best.cvm <= fit_mle(x, "gamma", c).cvm + 1e-15


def test_shift_search_beta_keeps_values_below_one():
    x = np.concatenate([[0.0, 0.0], np.random.default_rng(9).uniform(0.0, 0.6, 80)])
    r = shift_search(x, "beta")
    assert r.shift > 0 and np.max(x) + r.shift < 1
    assert r.shift in (0.001, 0.01, 0.1, 0.15, 0.25)


def test_shift_search_no_admissible_shift():
    with pytest.raises(DistFitError):
        shift_search([0.0, 0.5, 0.99, 0.7], "beta", shifts=(1.0, 1.5))


def test_figure_one_bands_single_seed():
    rng = np.random.default_rng(10)
    for sampler, lo, hi in ((lambda: rng.normal(size=1000), 0.0, 0.5),
                            (lambda: rng.uniform(size=1000), 0.5, 3.0),
                            (lambda: rng.exponential(size=1000), 4.0, np.inf)):
        t = fit_mle(sampler(), "normal").cvm
        assert lo <= t <= hi


def test_dist_study_shape_and_csv(tmp_path):
    ds = load_fixture("boston_small")
    rows = dist_study(ds, "elastic_net", n_configs=2, n_boot=50, seed=1)
    assert len(rows) == 2 * len(default_families("regression"))
    write_study_csv(rows, tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "config_id,family,c,loglik,cvm,param1,param2"
    ranks = summarize_study(rows)
    assert [r[2] for r in ranks] == list(range(1, len(ranks) + 1))


def test_dist_study_classification_includes_beta():
    rows = dist_study(load_fixture("pima_small"), "cart_tree", n_configs=1, n_boot=30, seed=2)
    assert {r.family for r in rows} == set(FAMILIES)
    assert all(np.isfinite(r.cvm) for r in rows)


def test_dist_study_minimum_boot():
    with pytest.raises(DistFitError):
        dist_study(load_fixture("boston_small"), "elastic_net", 1, 10, 0)


def test_regression_ranking_weibull_types_worse():
    rows = dist_study(load_fixture("boston_small"), "elastic_net", n_configs=4, n_boot=200, seed=3)
    med = {fam: m for fam, m, _ in summarize_study(rows)}
    assert med["weibull"] > med["lognormal"]
    assert med["normal"] > med["lognormal"]


def test_family_cdf_unknown():
    with pytest.raises(DistFitError):
        family_cdf("cauchy", (0, 1), [0.0])
