"""Studies, datasets, the half-normal heterogeneity prior and the SE rule."""
import csv
import math
from dataclasses import dataclass
from typing import Sequence

from .numerics import std_normal_cdf, std_normal_quantile

__all__ = [
    "Study",
    "Dataset",
    "HeterogeneityPrior",
    "SeRule",
    "DatasetParseError",
    "half_normal_pdf",
    "half_normal_cdf",
    "half_normal_quantile",
    "sample_half_normal",
    "se_from_sample_size",
    "parse_prior",
    "read_dataset_csv",
]

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class DatasetParseError(ValueError):
    """Malformed dataset CSV; the message names the offending line."""


@dataclass(frozen=True)
class Study:
    id: str
    estimate: float
    std_err: float

    def __post_init__(self):
        if not math.isfinite(self.estimate):
            raise ValueError(f"study {self.id!r}: estimate must be finite")
        if not (math.isfinite(self.std_err) and self.std_err > 0):
            raise ValueError(f"study {self.id!r}: std_err must be positive and finite")


@dataclass(frozen=True)
class Dataset:
    studies: tuple

    def __post_init__(self):
        object.__setattr__(self, "studies", tuple(self.studies))
        if len(self.studies) < 2:
            raise ValueError("need at least two studies")
        ids = [s.id for s in self.studies]
        if len(set(ids)) != len(ids):
            raise ValueError("study ids must be unique")

    @classmethod
    def from_arrays(cls, estimates: Sequence[float], std_errs: Sequence[float], ids=None):
        if len(estimates) != len(std_errs):
            raise ValueError("estimates and std_errs differ in length")
        if ids is None:
            ids = [str(i + 1) for i in range(len(estimates))]
        return cls(tuple(Study(str(i), float(y), float(s))
                         for i, y, s in zip(ids, estimates, std_errs)))

    def __len__(self):
        return len(self.studies)

    @property
    def estimates(self):
        return [s.estimate for s in self.studies]

    @property
    def std_errs(self):
        return [s.std_err for s in self.studies]


@dataclass(frozen=True)
class HeterogeneityPrior:
    """Prior on the between-study standard deviation tau.

    Only ``kind="half_normal"`` is implemented; HN(s) is the law of s*|Z|.
    """

    scale: float
    kind: str = "half_normal"

    def __post_init__(self):
        if self.kind != "half_normal":
            raise ValueError(f"unsupported prior kind {self.kind!r}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError("bad scale")

    def pdf(self, tau):
        return half_normal_pdf(tau, self.scale)

    def cdf(self, tau):
        return half_normal_cdf(tau, self.scale)

    def quantile(self, p):
        return half_normal_quantile(p, self.scale)

    def spec(self):
        return f"half-normal:{self.scale:g}"


@dataclass(frozen=True)
class SeRule:
    """Standard error as ``constant_c / sqrt(n)``."""

    constant_c: float = 4.0

    def __post_init__(self):
        if not (math.isfinite(self.constant_c) and self.constant_c > 0):
            raise ValueError("se-rule constant must be positive")

    def __call__(self, n):
        return se_from_sample_size(n, self)


def _check_scale(scale):
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError("bad scale")


def half_normal_pdf(tau, scale):
    _check_scale(scale)
    if tau < 0:
        raise ValueError("negative heterogeneity")
    if math.isinf(tau):
        return 0.0
    z = tau / scale
    return _SQRT_2_OVER_PI / scale * math.exp(-0.5 * z * z)


def half_normal_logpdf(tau, scale):
    _check_scale(scale)
    if tau < 0:
        raise ValueError("negative heterogeneity")
    z = tau / scale
    return math.log(_SQRT_2_OVER_PI / scale) - 0.5 * z * z


def half_normal_cdf(tau, scale):
    _check_scale(scale)
    if tau < 0:
        raise ValueError("negative heterogeneity")
    if math.isinf(tau):
        return 1.0
    # 1 - 2*Phi(-z) keeps accuracy near tau = 0 as well as in the tail
    return 1.0 - 2.0 * std_normal_cdf(-tau / scale)


def half_normal_quantile(p, scale):
    _check_scale(scale)
    if not 0.0 <= p < 1.0:
        raise ValueError("quantile domain")
    if p == 0.0:
        return 0.0
    # Phi^{-1}((1+p)/2) = -Phi^{-1}((1-p)/2); the latter avoids rounding 1+p
    return -scale * std_normal_quantile(0.5 * (1.0 - p))


def sample_half_normal(stream, scale):
    """Draw ``scale * |Z|`` using one standard normal from ``stream``."""
    _check_scale(scale)
    return scale * abs(stream.normal())


def se_from_sample_size(n, rule=SeRule()):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError("sample size must be a positive integer")
    return rule.constant_c / math.sqrt(n)


def parse_prior(text):
    """Parse a prior spec of the form ``half-normal:<scale>``."""
    kind, sep, arg = text.strip().partition(":")
    if not sep or kind.strip().lower() not in ("half-normal", "half_normal", "hn"):
        raise ValueError(f"unrecognised prior spec {text!r}; expected half-normal:<scale>")
    try:
        scale = float(arg)
    except ValueError:
        raise ValueError(f"bad scale in prior spec {text!r}") from None
    return HeterogeneityPrior(scale)


def read_dataset_csv(path):
    """Read a dataset with header ``id,estimate,std_err``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetParseError(f"{path}: line 1: empty file") from None
        header = [h.strip().lstrip("﻿") for h in header]
        if header != ["id", "estimate", "std_err"]:
            raise DatasetParseError(
                f"{path}: line 1: expected header 'id,estimate,std_err', got {','.join(header)!r}")
        studies = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DatasetParseError(f"{path}: line {line}: expected 3 fields, got {len(row)}")
            sid, est, se = (c.strip() for c in row)
            try:
                studies.append(Study(sid, float(est), float(se)))
            except ValueError as exc:
                raise DatasetParseError(f"{path}: line {line}: {exc}") from None
    try:
        return Dataset(tuple(studies))
    except ValueError as exc:
        raise DatasetParseError(f"{path}: {exc}") from None
