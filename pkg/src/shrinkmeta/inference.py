"""Shrinkage posteriors for study means under the normal-normal hierarchical model.

Model: ``y_i | theta_i ~ N(theta_i, s_i^2)``, ``theta_i | mu, tau ~ N(mu, tau^2)``,
a flat prior on ``mu`` and a half-normal prior on ``tau``.  Given ``tau`` the
posterior of each ``theta_i`` is normal in closed form; ``tau`` itself is
integrated out on a uniform trapezoid grid, so the marginal posterior of
``theta_i`` is a finite mixture of normals.

Study indices are zero-based throughout.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels as _default_kernels
from .errors import DegeneratePosteriorError, IntervalNotConverged
from .model import Dataset, HeterogeneityPrior, half_normal_quantile

__all__ = [
    "GridConfig",
    "ConditionalMoments",
    "TauPosteriorGrid",
    "ShrinkagePosterior",
    "ShrinkageSummary",
    "conditional_mu_posterior",
    "log_marginal_likelihood",
    "shrinkage_moments",
    "tau_posterior_grid",
    "shrinkage_posterior",
    "shrinkage_cdf",
    "shrinkage_interval",
    "interval_endpoints",
    "DegeneratePosteriorError",
    "IntervalNotConverged",
]


@dataclass(frozen=True)
class GridConfig:
    """Quadrature settings for the tau grid.

    ``tau_max=None`` means ``max(HN quantile at 1 - tail_prob, se_multiple * max s_i)``.
    The grid starts with ``n_init`` nodes and is refined as ``n -> 2n - 1``
    (nested nodes) until both interval endpoints move by less than ``tol``.
    """

    n_init: int = 801
    n_max: int = 51201
    tol: float = 1e-6
    tau_max: float = None
    tail_prob: float = 1e-6
    se_multiple: float = 10.0

    def __post_init__(self):
        if self.n_init < 2 or self.n_max < self.n_init:
            raise ValueError("need 2 <= n_init <= n_max")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def upper_tau(self, data, prior):
        if self.tau_max is not None:
            return float(self.tau_max)
        return max(half_normal_quantile(1.0 - self.tail_prob, prior.scale),
                   self.se_multiple * max(data.std_errs))


@dataclass(frozen=True)
class ConditionalMoments:
    """Moments given tau for one study: overall mean, shrinkage factor, and theta_i."""

    mu_hat: float
    v_mu: float
    b: float
    m: float
    v: float


@dataclass(frozen=True, eq=False)
class TauPosteriorGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def mean(self):
        """Posterior mean of tau.

        ``tau * p(tau)`` has slope ``p(0)`` at the origin, which leaves an
        O(h^2) trapezoid error; the Euler-Maclaurin end term removes it.
        """
        h = self.nodes[1] - self.nodes[0]
        return float(np.dot(self.weights, self.nodes) + h * self.weights[0] / 6.0)

    def _cumulative(self):
        # trapezoid masses per segment, from nodal masses
        h = self.nodes[1] - self.nodes[0]
        dens = self.weights / h
        dens[0] *= 2.0
        dens[-1] *= 2.0
        seg = 0.5 * h * (dens[:-1] + dens[1:])
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        return cum / cum[-1]

    def cdf(self, tau):
        """Posterior CDF of tau, linear between nodes."""
        return float(np.interp(tau, self.nodes, self._cumulative()))

    def quantile(self, p):
        if not 0.0 <= p <= 1.0:
            raise ValueError("quantile domain")
        cum = self._cumulative()
        j = int(np.searchsorted(cum, p, side="left"))
        if j == 0:
            return float(self.nodes[0])
        if j >= len(cum):
            return float(self.nodes[-1])
        c0, c1 = cum[j - 1], cum[j]
        frac = 0.0 if c1 == c0 else (p - c0) / (c1 - c0)
        return float(self.nodes[j - 1] + frac * (self.nodes[j] - self.nodes[j - 1]))

    def mass_below(self, tau):
        return float(self.weights[self.nodes <= tau].sum())


@dataclass(frozen=True, eq=False)
class ShrinkagePosterior:
    """Normal mixture posterior of one study mean; components share the tau grid."""

    study_index: int
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    kernels: object = field(default=None, repr=False)

    @property
    def sds(self):
        return np.sqrt(self.variances)

    def _k(self):
        return self.kernels or _default_kernels

    def cdf(self, x):
        return shrinkage_cdf(x, self)

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError("quantile domain")
        return self._k().mixture_quantile(p, self.weights, self.means, self.sds)

    def mean(self):
        return float(np.dot(self.weights, self.means))

    def sd(self):
        mu = self.mean()
        return math.sqrt(float(np.dot(self.weights, self.variances + (self.means - mu) ** 2)))


@dataclass(frozen=True)
class ShrinkageSummary:
    mean: float
    sd: float
    median: float
    interval_lo: float
    interval_hi: float
    level: float
    n_grid: int = 0


def _arrays(data):
    if not isinstance(data, Dataset):
        raise TypeError("expected a Dataset")
    if len(data) < 2:
        raise ValueError("need at least two studies")
    return np.array(data.estimates, dtype=float), np.array(data.std_errs, dtype=float)


def _check_tau(tau):
    if not tau >= 0:
        raise ValueError("negative heterogeneity")


def conditional_mu_posterior(data, tau):
    """Mean and variance of the overall mean ``mu`` given ``tau`` (flat prior on ``mu``)."""
    _check_tau(tau)
    y, s = _arrays(data)
    v = s * s + tau * tau
    v_mu = 1.0 / float(np.sum(1.0 / v))
    mu_hat = v_mu * float(np.sum(y / v))
    return mu_hat, v_mu


def log_marginal_likelihood(data, tau):
    """``log p(y | tau)`` with ``mu`` integrated out, up to an additive constant."""
    _check_tau(tau)
    y, s = _arrays(data)
    mu_hat, v_mu = conditional_mu_posterior(data, tau)
    v = s * s + tau * tau
    return 0.5 * math.log(v_mu) - 0.5 * float(np.sum(np.log(v))) \
        - 0.5 * float(np.sum((y - mu_hat) ** 2 / v))


def shrinkage_moments(data, tau, i):
    _check_tau(tau)
    y, s = _arrays(data)
    if not 0 <= i < len(y):
        raise IndexError(f"study index {i} out of range")
    mu_hat, v_mu = conditional_mu_posterior(data, tau)
    s2, t2 = s[i] ** 2, tau * tau
    b = s2 / (s2 + t2)
    m = (1.0 - b) * y[i] + b * mu_hat
    v = s2 * t2 / (s2 + t2) + b * b * v_mu
    return ConditionalMoments(mu_hat, v_mu, float(b), float(m), float(v))


def _build(data, prior, i, cfg, n, kernels):
    y, s = _arrays(data)
    if not 0 <= i < len(y):
        raise IndexError(f"study index {i} out of range")
    if not isinstance(prior, HeterogeneityPrior):
        raise TypeError("expected a HeterogeneityPrior")
    kernels = kernels or _default_kernels
    return kernels.build_mixture(y, s, i, prior.scale, cfg.upper_tau(data, prior),
                                 n or cfg.n_init)


def tau_posterior_grid(data, prior, cfg=GridConfig(), n=None, kernels=None):
    """Normalized trapezoid masses of ``p(tau | y)`` on ``n`` uniform nodes over ``[0, tau_max]``."""
    nodes, w, _, _ = _build(data, prior, 0, cfg, n, kernels)
    return TauPosteriorGrid(nodes, w)


def shrinkage_posterior(data, prior, i, cfg=GridConfig(), n=None, kernels=None):
    _, w, m, sd = _build(data, prior, i, cfg, n, kernels)
    return ShrinkagePosterior(i, w, m, sd * sd, kernels)


def shrinkage_cdf(x, post):
    return post._k().mixture_cdf(float(x), post.weights, post.means, post.sds)


def interval_endpoints(data, prior, i, level=0.95, cfg=GridConfig(), kernels=None):
    """Converged equal-tailed endpoints ``(lo, hi, n_grid)`` without the other summaries."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    y, s = _arrays(data)
    if not 0 <= i < len(y):
        raise IndexError(f"study index {i} out of range")
    k = kernels or _default_kernels
    return k.refined_interval(y, s, i, prior.scale, cfg.upper_tau(data, prior),
                              0.5 * (1.0 - level), 0.5 * (1.0 + level),
                              cfg.n_init, cfg.n_max, cfg.tol)


def shrinkage_interval(data, prior, i, level=0.95, cfg=GridConfig(), kernels=None):
    """Equal-tailed shrinkage interval for study ``i`` with posterior summaries.

    The tau grid is doubled until both endpoints move by less than
    ``cfg.tol``; mean, sd and median come from the mixture on the final grid.

    Raises
    ------
    IntervalNotConverged
        If the endpoints have not settled by ``cfg.n_max`` nodes.
    """
    lo, hi, n = interval_endpoints(data, prior, i, level, cfg, kernels)
    post = shrinkage_posterior(data, prior, i, cfg, n, kernels)
    return ShrinkageSummary(
        mean=post.mean(),
        sd=post.sd(),
        median=post.quantile(0.5),
        interval_lo=lo,
        interval_hi=hi,
        level=level,
        n_grid=n,
    )
