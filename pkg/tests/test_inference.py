import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_moments, dense_interval, dense_mixture, log_marginal_by_quadrature
from shrinkmeta import _backend
from shrinkmeta.errors import DegeneratePosteriorError, IntervalNotConverged
from shrinkmeta.inference import (
    GridConfig,
    ShrinkagePosterior,
    conditional_mu_posterior,
    log_marginal_likelihood,
    shrinkage_cdf,
    shrinkage_interval,
    shrinkage_moments,
    shrinkage_posterior,
    tau_posterior_grid,
)
from shrinkmeta.model import Dataset, HeterogeneityPrior

HN05 = HeterogeneityPrior(0.5)
POINT = HeterogeneityPrior(1e-8)


def ds(y, s):
    return Dataset.from_arrays(y, s)


# -- conditional moments ------------------------------------------------------

def test_conditional_mu_examples():
    assert conditional_mu_posterior(ds([0, 0], [1, 1]), 0.0) == (0.0, 0.5)
    assert conditional_mu_posterior(ds([1, 3], [1, 1]), 0.0) == (2.0, 0.5)
    mu_hat, v_mu = conditional_mu_posterior(ds([0, 2], [1, 1]), 1.0)
    assert mu_hat == pytest.approx(1.0) and v_mu == pytest.approx(1.0)


def test_conditional_mu_needs_two_studies_and_nonnegative_tau():
    with pytest.raises(ValueError):
        conditional_mu_posterior(ds([0, 2], [1, 1]), -1.0)


def test_log_marginal_difference_example():
    d = ds([0, 0], [1, 1])
    diff = log_marginal_likelihood(d, 0.0) - log_marginal_likelihood(d, 1.0)
    assert diff == pytest.approx(0.5 * math.log(0.5) + math.log(2.0), abs=1e-12)
    assert diff == pytest.approx(0.346574, abs=1e-6)


@pytest.mark.parametrize("y, s", [([0, 0], [1, 1]), ([0.3, -1.2], [0.4, 0.1]), ([1, 2, -0.5], [0.3, 0.5, 0.8])])
def test_log_marginal_against_quadrature(y, s):
    d = ds(y, s)
    taus = [0.0, 0.2, 1.0, 3.0]
    ours = [log_marginal_likelihood(d, t) for t in taus]
    ref = [log_marginal_by_quadrature(y, s, t) for t in taus]
    for j in range(1, len(taus)):
        assert ours[j] - ours[0] == pytest.approx(ref[j] - ref[0], abs=1e-7)


def test_log_marginal_symmetries():
    a = ds([0.4, 1.9], [0.3, 0.7])
    b = ds([1.9, 0.4], [0.7, 0.3])
    c = ds([0.4 + 5.5, 1.9 + 5.5], [0.3, 0.7])
    for t in (0.0, 0.3, 2.0):
        assert log_marginal_likelihood(a, t) == pytest.approx(log_marginal_likelihood(b, t), abs=1e-13)
        assert log_marginal_likelihood(a, t) == pytest.approx(log_marginal_likelihood(c, t), abs=1e-12)


def test_shrinkage_moments_examples():
    d = ds([0, 2], [1, 1])
    m0 = shrinkage_moments(d, 0.0, 0)
    assert (m0.b, m0.m, m0.v) == (1.0, 1.0, 0.5)
    m1 = shrinkage_moments(d, 1.0, 0)
    assert m1.b == pytest.approx(0.5) and m1.m == pytest.approx(0.5) and m1.v == pytest.approx(0.75)
    big = shrinkage_moments(d, 1e6, 0)
    assert abs(big.m) < 1e-6 and big.v == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("y, s, tau", [([0, 2], [1, 1], 1.0), ([0.5, -0.2], [0.4, 0.1], 0.3),
                                       ([1.0, 0.0, 2.0], [0.5, 0.3, 0.2], 0.7)])
def test_shrinkage_moments_against_brute_force(y, s, tau):
    mom = shrinkage_moments(ds(y, s), tau, 0)
    mean, var = brute_force_moments(y, s, tau)
    assert mom.m == pytest.approx(mean, abs=1e-6)
    assert mom.v == pytest.approx(var, rel=1e-5)


def test_complete_pooling_limit_equals_mu_posterior():
    d = ds([0.7, -0.1, 0.4], [0.2, 0.5, 0.3])
    mu_hat, v_mu = conditional_mu_posterior(d, 0.0)
    for i in range(3):
        mom = shrinkage_moments(d, 0.0, i)
        assert mom.b == 1.0
        assert mom.m == pytest.approx(mu_hat, abs=1e-15)
        assert mom.v == pytest.approx(v_mu, rel=1e-15)


finite = st.floats(-3, 3)
ses = st.floats(0.05, 1.5)


@given(finite, finite, ses, ses, st.floats(0, 5), st.floats(0, 5))
def test_moment_invariants(y1, y2, s1, s2, ta, tb):
    d = ds([y1, y2], [s1, s2])
    lo_t, hi_t = sorted((ta, tb))
    a, b = shrinkage_moments(d, lo_t, 0), shrinkage_moments(d, hi_t, 0)
    for mom in (a, b):
        assert 0.0 <= mom.b <= 1.0
        lo_m, hi_m = sorted((y1, mom.mu_hat))
        assert lo_m - 1e-12 <= mom.m <= hi_m + 1e-12
        assert mom.v >= mom.b ** 2 * mom.v_mu * (1 - 1e-12) > 0
        assert abs(mom.m - y1) <= mom.b * abs(mom.mu_hat - y1) + 1e-12
    if hi_t - lo_t > 1e-6:
        assert b.b < a.b


# -- tau grid -----------------------------------------------------------------

def test_grid_normalized():
    g = tau_posterior_grid(ds([0, 2], [0.4, 0.1]), HN05)
    assert abs(g.weights.sum() - 1.0) < 1e-12
    assert g.nodes[0] == 0.0 and np.all(np.diff(g.nodes) > 0) and np.all(g.weights >= 0)
    assert len(g.nodes) == GridConfig().n_init


def test_grid_point_prior_mass_at_zero():
    g = tau_posterior_grid(ds([0, 2], [0.4, 0.1]), POINT)
    assert g.mass_below(1e-6) > 0.999


def test_grid_mean_matches_denser_grid():
    d = ds([0, 2], [1, 1])
    coarse = tau_posterior_grid(d, HN05).mean()
    dense = tau_posterior_grid(d, HN05, n=10 * (GridConfig().n_init - 1) + 1).mean()
    assert coarse == pytest.approx(dense, abs=1e-6)


def test_grid_quantiles_are_ordered():
    g = tau_posterior_grid(ds([0, 2], [0.4, 0.1]), HN05)
    q = [g.quantile(p) for p in (0.025, 0.5, 0.975)]
    assert 0 <= q[0] < q[1] < q[2] <= g.nodes[-1]
    assert g.cdf(q[1]) == pytest.approx(0.5, abs=1e-9)


def test_grid_default_tau_max():
    cfg = GridConfig()
    assert cfg.upper_tau(ds([0, 0], [0.1, 0.1]), HN05) == pytest.approx(HN05.quantile(1 - 1e-6))
    assert cfg.upper_tau(ds([0, 0], [0.4, 0.1]), HN05) == pytest.approx(4.0)


def test_degenerate_grid_raises():
    with pytest.raises(DegeneratePosteriorError, match="degenerate"):
        tau_posterior_grid(ds([0, 1], [1, 1]), HN05, GridConfig(tau_max=math.inf))


# -- mixture CDF --------------------------------------------------------------

def _post(w, m, v):
    return ShrinkagePosterior(0, np.array(w, float), np.array(m, float), np.array(v, float))


def test_mixture_cdf_examples():
    assert shrinkage_cdf(0.0, _post([1.0], [0.0], [1.0])) == 0.5
    assert shrinkage_cdf(0.0, _post([0.5, 0.5], [-1.0, 1.0], [1.0, 1.0])) == pytest.approx(0.5, abs=1e-15)
    post = shrinkage_posterior(ds([0, 2], [0.4, 0.1]), HN05, 0)
    assert abs(post.weights.sum() - 1) < 1e-12 and np.all(post.variances > 0)
    assert shrinkage_cdf(-1e10, post) < 1e-12
    assert shrinkage_cdf(1e10, post) > 1 - 1e-12


def test_mixture_cdf_monotone():
    post = shrinkage_posterior(ds([0, 2], [0.4, 0.1]), HN05, 0)
    rng = np.random.default_rng(0)
    pairs = np.sort(rng.uniform(-3, 3, size=(10_000, 2)), axis=1)
    for a, b in pairs:
        assert shrinkage_cdf(a, post) <= shrinkage_cdf(b, post) + 1e-14


# -- intervals ----------------------------------------------------------------

def test_point_prior_gives_complete_pooling_interval():
    r = shrinkage_interval(ds([0, 0], [1, 1]), POINT, 0, 0.95)
    half = 1.959963984540054 * math.sqrt(0.5)
    assert r.interval_lo == pytest.approx(-half, abs=1e-6)
    assert r.interval_hi == pytest.approx(half, abs=1e-6)
    assert r.interval_hi == pytest.approx(1.385904, abs=1e-6)


def test_location_shift():
    base = shrinkage_interval(ds([0, 2], [0.4, 0.1]), HN05, 0)
    moved = shrinkage_interval(ds([7.3, 9.3], [0.4, 0.1]), HN05, 0)
    assert moved.interval_lo == pytest.approx(base.interval_lo + 7.3, abs=1e-8)
    assert moved.interval_hi == pytest.approx(base.interval_hi + 7.3, abs=1e-8)


def test_matches_dense_grid_oracle():
    r = shrinkage_interval(ds([0, 2], [0.4, 0.1]), HN05, 0)
    lo, hi = dense_interval([0, 2], [0.4, 0.1], 0.5)
    assert r.interval_lo == pytest.approx(lo, abs=1e-5)
    assert r.interval_hi == pytest.approx(hi, abs=1e-5)
    _, w, m, sd = dense_mixture([0, 2], [0.4, 0.1], 0.5)
    assert r.mean == pytest.approx(float(np.dot(w, m)), abs=1e-5)
    ref_var = float(np.dot(w, sd ** 2 + (m - np.dot(w, m)) ** 2))
    assert r.sd == pytest.approx(math.sqrt(ref_var), abs=1e-5)


def test_second_study_against_oracle():
    r = shrinkage_interval(ds([0, 2], [0.4, 0.1]), HN05, 1)
    lo, hi = dense_interval([0, 2], [0.4, 0.1], 0.5, study=1)
    assert (r.interval_lo, r.interval_hi) == pytest.approx((lo, hi), abs=1e-5)


def test_summary_ordering_and_nesting():
    d = ds([0.3, -0.8], [0.5, 0.2])
    r95 = shrinkage_interval(d, HN05, 0, 0.95)
    r50 = shrinkage_interval(d, HN05, 0, 0.50)
    assert r95.interval_lo < r95.median < r95.interval_hi
    assert r95.interval_lo < r50.interval_lo < r50.interval_hi < r95.interval_hi
    assert r50.median == pytest.approx(r95.median, abs=1e-7)


@pytest.mark.parametrize("c", [0.25, 0.5, 2.0, 3.7])
def test_scale_equivariance(c):
    y, s, scale = [0.3, -0.9], [0.45, 0.2], 0.5
    a = shrinkage_interval(ds(y, s), HeterogeneityPrior(scale), 0)
    b = shrinkage_interval(ds([c * v for v in y], [c * v for v in s]), HeterogeneityPrior(c * scale), 0)
    assert b.interval_lo == pytest.approx(c * a.interval_lo, rel=1e-8)
    assert b.interval_hi == pytest.approx(c * a.interval_hi, rel=1e-8)


def test_permutation_symmetry():
    y, s = [0.3, -0.9, 1.4], [0.45, 0.2, 0.6]
    perm = [2, 0, 1]
    d = Dataset.from_arrays(y, s, ids=["a", "b", "c"])
    dp = Dataset.from_arrays([y[j] for j in perm], [s[j] for j in perm], ids=["c", "a", "b"])
    for new_i, old_i in enumerate(perm):
        a = shrinkage_interval(d, HN05, old_i)
        b = shrinkage_interval(dp, HN05, new_i)
        assert (b.interval_lo, b.interval_hi, b.median) == pytest.approx(
            (a.interval_lo, a.interval_hi, a.median), abs=1e-9)


def test_identical_studies_identical_intervals():
    d = ds([1.0, 1.0], [0.5, 0.5])
    a, b = shrinkage_interval(d, HN05, 0), shrinkage_interval(d, HN05, 1)
    assert a == b
    assert a.median == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 1.0), st.floats(0.1, 1.0),
       st.floats(-20, 20))
def test_location_equivariance_property(y1, y2, s1, s2, shift):
    a = shrinkage_interval(ds([y1, y2], [s1, s2]), HN05, 0)
    b = shrinkage_interval(ds([y1 + shift, y2 + shift], [s1, s2]), HN05, 0)
    assert b.interval_lo == pytest.approx(a.interval_lo + shift, abs=1e-8)
    assert b.interval_hi == pytest.approx(a.interval_hi + shift, abs=1e-8)


def test_not_converged_raises():
    cfg = GridConfig(n_init=801, n_max=801)
    with pytest.raises(IntervalNotConverged, match="interval not converged"):
        shrinkage_interval(ds([0, 2], [0.4, 0.1]), HN05, 0, cfg=cfg)


def test_bad_level_and_index():
    d = ds([0, 2], [0.4, 0.1])
    with pytest.raises(ValueError):
        shrinkage_interval(d, HN05, 0, level=1.0)
    with pytest.raises(IndexError):
        shrinkage_interval(d, HN05, 2)


@pytest.mark.skipif("cython" not in _backend.available(), reason="compiled kernels not built")
@pytest.mark.parametrize("y, s, scale", [([0, 2], [0.4, 0.1], 0.5), ([0.1, -0.3], [0.2, 0.2], 1.0),
                                         ([2.5, -1.0, 0.4], [0.3, 0.9, 0.5], 0.5)])
def test_backends_agree(y, s, scale):
    prior = HeterogeneityPrior(scale)
    a = shrinkage_interval(ds(y, s), prior, 0, kernels=_backend.get("python"))
    b = shrinkage_interval(ds(y, s), prior, 0, kernels=_backend.get("cython"))
    assert a.n_grid == b.n_grid
    for field in ("interval_lo", "interval_hi", "median", "mean", "sd"):
        assert getattr(a, field) == pytest.approx(getattr(b, field), abs=2e-8)
    pa = tau_posterior_grid(ds(y, s), prior, kernels=_backend.get("python"))
    pb = tau_posterior_grid(ds(y, s), prior, kernels=_backend.get("cython"))
    np.testing.assert_allclose(pa.weights, pb.weights, rtol=1e-12, atol=1e-300)
