"""Reference computations that share no code path with the package.

* ``phi_series``: Phi(x) from its Taylor series in mpmath at 40 digits.
* ``quantile_by_bisection``: Phi^{-1} by plain bisection on a given CDF.
* ``dense_interval``: shrinkage interval for two studies on a 10^5-node tau
  grid, built from the two-study closed forms (y1 - y2 ~ N(0, v1 + v2);
  theta1 | y, tau by regressing e1 = y1 - theta1 on y1 - y2), scipy's ndtr
  and brentq.
* ``brute_force_moments``: theta1 | y, tau on a dense (theta1, mu) lattice.
"""
import mpmath
import numpy as np
from scipy import integrate, optimize, special, stats


def phi_series(x, dps=40):
    """Phi(x) = 1/2 + phi(x) * sum_n x^(2n+1) / (2n+1)!!, summed to ``dps`` digits."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        term = x
        total = x
        n = 0
        eps = mpmath.mpf(10) ** (-dps - 5)
        while abs(term) > eps * abs(total) or n < 5:
            n += 1
            term = term * x * x / (2 * n + 1)
            total += term
        pdf = mpmath.exp(-x * x / 2) / mpmath.sqrt(2 * mpmath.pi)
        return mpmath.mpf(0.5) + pdf * total


def quantile_by_bisection(cdf, p, lo=-40.0, hi=40.0, tol=1e-13):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def default_tau_max(s, scale):
    return max(stats.halfnorm.ppf(1 - 1e-6, scale=scale), 10 * max(s))


def dense_mixture(y, s, scale, n=100_000, tau_max=None, study=0):
    y1, y2 = y if study == 0 else (y[1], y[0])
    s1, s2 = s if study == 0 else (s[1], s[0])
    if tau_max is None:
        tau_max = default_tau_max(s, scale)
    taus = np.linspace(0.0, tau_max, n)
    v1 = s1 ** 2 + taus ** 2
    v2 = s2 ** 2 + taus ** 2
    logpost = stats.halfnorm.logpdf(taus, scale=scale) \
        + stats.norm.logpdf(y1 - y2, scale=np.sqrt(v1 + v2))
    dens = np.exp(logpost - logpost.max())
    w = dens * np.full(n, taus[1] - taus[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    w /= w.sum()
    means = y1 - s1 ** 2 * (y1 - y2) / (v1 + v2)
    sds = np.sqrt(s1 ** 2 - s1 ** 4 / (v1 + v2))
    return taus, w, means, sds


def dense_interval(y, s, scale, level=0.95, n=100_000, tau_max=None, study=0):
    _, w, m, sd = dense_mixture(y, s, scale, n, tau_max, study)

    def cdf(x):
        return float(np.dot(w, special.ndtr((x - m) / sd)))

    lo_b = m.min() - 12 * sd.max()
    hi_b = m.max() + 12 * sd.max()
    a = 0.5 * (1 - level)
    lo = optimize.brentq(lambda x: cdf(x) - a, lo_b, hi_b, xtol=1e-13, rtol=1e-15)
    hi = optimize.brentq(lambda x: cdf(x) - (1 - a), lo_b, hi_b, xtol=1e-13, rtol=1e-15)
    return lo, hi


def brute_force_moments(y, s, tau, theta_pts=4001, mu_pts=4001, width=12.0):
    """Mean and variance of theta1 | y, tau > 0, integrating mu (flat prior) numerically."""
    if tau <= 0:
        raise ValueError("needs tau > 0")
    y = np.asarray(y, float)
    s = np.asarray(s, float)
    v = s ** 2 + tau ** 2
    scale = width * np.sqrt(v.max())
    centre = y.mean()
    mu = np.linspace(centre - scale, centre + scale, mu_pts)
    theta = np.linspace(y[0] - width * s[0], y[0] + width * s[0], theta_pts)
    # log p(y1 | theta1) + log p(theta1 | mu) + sum_{i>1} log p(y_i | mu)
    T, M = np.meshgrid(theta, mu, indexing="ij")
    logj = stats.norm.logpdf(y[0], T, s[0]) + stats.norm.logpdf(T, M, tau)
    for yi, vi in zip(y[1:], v[1:]):
        logj = logj + stats.norm.logpdf(yi, M, np.sqrt(vi))
    joint = np.exp(logj - logj.max())
    marg = integrate.trapezoid(joint, mu, axis=1)
    marg /= integrate.trapezoid(marg, theta)
    mean = integrate.trapezoid(theta * marg, theta)
    var = integrate.trapezoid((theta - mean) ** 2 * marg, theta)
    return mean, var


def log_marginal_by_quadrature(y, s, tau, pts=200_001, width=40.0):
    """log of the integral over mu of prod_i N(y_i | mu, s_i^2 + tau^2), up to a constant."""
    y = np.asarray(y, float)
    v = np.asarray(s, float) ** 2 + tau ** 2
    mu = np.linspace(y.mean() - width * np.sqrt(v.max()), y.mean() + width * np.sqrt(v.max()), pts)
    logf = sum(stats.norm.logpdf(yi, mu, np.sqrt(vi)) for yi, vi in zip(y, v))
    mx = logf.max()
    return mx + np.log(integrate.trapezoid(np.exp(logf - mx), mu))
