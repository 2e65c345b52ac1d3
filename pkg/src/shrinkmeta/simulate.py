"""Monte Carlo coverage of shrinkage intervals for the first of two studies.

Each replication draws ``tau`` (fixed or from the prior), true means
``theta_i = tau * Z_i`` around ``mu = 0``, and estimates
``y_i = theta_i + s_i * Z_i'`` with ``s_i = c / sqrt(n_i)``.  The replication
stream depends only on ``(master_seed, r)``, so hit counts do not depend on
the number of workers or on scheduling.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import IntervalNotConverged
from .inference import GridConfig, interval_endpoints
from .model import Dataset, HeterogeneityPrior, SeRule, Study, sample_half_normal
from .rng import MASK64, RngStream, derive_seed

__all__ = [
    "TauSpec",
    "Scenario",
    "CoverageEstimate",
    "CellResult",
    "TABLE_ROW_ORDER",
    "TABLE_PRIOR_SCALES",
    "TABLE_TAUS",
    "draw_replication",
    "run_scenario",
    "run_table",
    "mc_interval",
    "resolve_workers",
]

log = logging.getLogger(__name__)

# row order of the published coverage table (n1, n2)
TABLE_ROW_ORDER = (
    (25, 400), (25, 100), (100, 400), (25, 25), (100, 100),
    (400, 400), (100, 25), (400, 100), (400, 25),
)
TABLE_PRIOR_SCALES = (0.5, 1.0)
TABLE_TAUS = (0.0, 0.1, 0.2, 0.5, 1.0, 2.0)

THREADS_ENV = "SHRINKMETA_THREADS"


@dataclass(frozen=True)
class TauSpec:
    """Either a fixed heterogeneity ``tau`` or ``from_prior`` (``tau=None``)."""

    tau: float = None

    def __post_init__(self):
        if self.tau is not None and not (self.tau >= 0 and math.isfinite(self.tau)):
            raise ValueError("fixed tau must be finite and >= 0")

    @classmethod
    def fixed(cls, tau):
        return cls(float(tau))

    @classmethod
    def from_prior(cls):
        return cls(None)

    @property
    def mode(self):
        return "from_prior" if self.tau is None else "fixed"

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if text in ("prior", "*", "from_prior"):
            return cls.from_prior()
        kind, sep, arg = text.partition(":")
        if sep and kind == "fixed":
            try:
                return cls.fixed(float(arg))
            except ValueError:
                pass
        raise ValueError(f"bad tau spec {text!r}; expected fixed:<value> or prior")

    def label(self):
        return "prior" if self.tau is None else f"fixed:{self.tau:g}"


@dataclass(frozen=True)
class Scenario:
    n1: int
    n2: int
    prior: HeterogeneityPrior
    tau_spec: TauSpec
    se_rule: SeRule = SeRule()
    level: float = 0.95
    reps: int = 10_000
    master_seed: int = 0
    grid: GridConfig = field(default=GridConfig(), compare=False)

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if isinstance(n, bool) or int(n) != n or n < 1:
                raise ValueError("sample sizes must be positive integers")
        if isinstance(self.reps, bool) or int(self.reps) != self.reps or self.reps < 1:
            raise ValueError("reps must be a positive integer")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")

    @property
    def std_errs(self):
        return self.se_rule(self.n1), self.se_rule(self.n2)

    def describe(self):
        return {
            "n1": self.n1,
            "n2": self.n2,
            "prior": self.prior.spec(),
            "prior_scale": self.prior.scale,
            "tau_spec": self.tau_spec.label(),
            "se_rule_c": self.se_rule.constant_c,
            "level": self.level,
            "reps": self.reps,
            "seed": self.master_seed,
        }


@dataclass(frozen=True)
class CoverageEstimate:
    hits: int
    reps: int

    @property
    def coverage(self):
        return self.hits / self.reps

    @property
    def mc_std_err(self):
        p = self.coverage
        return math.sqrt(p * (1.0 - p) / self.reps)

    @property
    def percent(self):
        return 100.0 * self.coverage


def mc_interval(est, z):
    """``coverage +/- z * mc_std_err`` clipped to [0, 1]."""
    if not z > 0:
        raise ValueError("z must be positive")
    half = z * est.mc_std_err
    return max(0.0, est.coverage - half), min(1.0, est.coverage + half)


def draw_replication(sc, r):
    """Simulate replication ``r``: returns ``(dataset, theta1, tau_used)``.

    Draw order is fixed: tau (prior mode only), Z1, Z2, Z1', Z2'.
    """
    if not 0 <= r < sc.reps:
        raise IndexError(f"replication {r} outside 0..{sc.reps - 1}")
    stream = RngStream.for_replication(sc.master_seed, r)
    if sc.tau_spec.tau is None:
        tau = sample_half_normal(stream, sc.prior.scale)
    else:
        tau = sc.tau_spec.tau
    z1, z2 = stream.normal(), stream.normal()
    e1, e2 = stream.normal(), stream.normal()
    s1, s2 = sc.std_errs
    theta1, theta2 = tau * z1, tau * z2
    data = Dataset((Study("1", theta1 + s1 * e1, s1), Study("2", theta2 + s2 * e2, s2)))
    return data, theta1, tau


def _count_hits(sc, indices, kernels):
    hits = 0
    for r in indices:
        data, theta1, _ = draw_replication(sc, r)
        try:
            lo, hi, _ = interval_endpoints(data, sc.prior, 0, sc.level, sc.grid, kernels)
        except (IntervalNotConverged, FloatingPointError) as exc:
            raise IntervalNotConverged(replication=r) from exc
        hits += lo <= theta1 <= hi
    return hits


def resolve_workers(requested=None):
    """Worker count: ``SHRINKMETA_THREADS`` if set, else ``requested``, else 1."""
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return n
    if requested is None:
        return 1
    if requested < 1:
        raise ValueError("workers must be a positive integer")
    return int(requested)


def run_scenario(sc, workers=1, kernels=None):
    """Estimate coverage of the study-1 interval over ``sc.reps`` replications.

    With ``workers > 1`` replications are split into contiguous chunks and
    run on a thread pool; the compiled kernels release the GIL.
    """
    if workers <= 1 or sc.reps < 2:
        return CoverageEstimate(_count_hits(sc, range(sc.reps), kernels), sc.reps)
    n_chunks = min(sc.reps, 4 * workers)
    bounds = [sc.reps * c // n_chunks for c in range(n_chunks + 1)]
    chunks = [range(bounds[c], bounds[c + 1]) for c in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        hits = sum(pool.map(lambda idx: _count_hits(sc, idx, kernels), chunks))
    return CoverageEstimate(hits, sc.reps)


@dataclass(frozen=True)
class CellResult:
    index: int
    scenario: Scenario
    estimate: CoverageEstimate = None
    error: str = None

    @property
    def ok(self):
        return self.error is None


def run_table(priors=TABLE_PRIOR_SCALES, n_pairs=TABLE_ROW_ORDER, taus=TABLE_TAUS,
              include_prior_draw=True, reps=10_000, seed=0, level=0.95,
              se_rule=SeRule(), workers=1, grid=GridConfig(), kernels=None,
              progress=None):
    """Evaluate the coverage grid, one cell per (row, prior, tau column).

    Cells are visited row by row in the order of ``n_pairs``; within a row
    the prior blocks follow ``priors`` and each block lists the fixed taus,
    then the prior-draw column.  Cell ``j`` uses master seed
    ``splitmix64(seed ^ j)``.  A failing cell is recorded and the run goes on.
    """
    priors = [p if isinstance(p, HeterogeneityPrior) else HeterogeneityPrior(float(p))
              for p in priors]
    specs = [TauSpec.fixed(t) for t in taus]
    if include_prior_draw:
        specs.append(TauSpec.from_prior())
    if not (priors and n_pairs and specs):
        raise ValueError("table axes must be non-empty")
    results = []
    index = 0
    for n1, n2 in n_pairs:
        for prior in priors:
            for spec in specs:
                sc = Scenario(n1, n2, prior, spec, se_rule, level, reps,
                              derive_seed(seed, index), grid)
                try:
                    est = run_scenario(sc, workers, kernels)
                    results.append(CellResult(index, sc, est))
                except (ArithmeticError, ValueError) as exc:
                    log.warning("cell %d (%s) failed: %s", index, sc.describe(), exc)
                    results.append(CellResult(index, sc, error=str(exc)))
                if progress is not None:
                    progress(results[-1])
                index += 1
    return results
