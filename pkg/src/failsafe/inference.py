"""Confidence intervals, the 5k+10 hypothesis test, and cutoff tables."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    FailSafeEstimate,
    MomentReport,
    moments_fixed_exact,
    moments_fixed_largek,
    moments_fixed_table,
    moments_random,
    rosenthal_nr,
)
from .distributions import std_normal_quantile
from .errors import DegenerateVarianceError, DomainError, InsufficientDataError
from .estimators import (
    ParameterTriple,
    ZSample,
    distributional_params,
    moments_estimate,
    skew_normal_mom_fit,
)
from .rng import RandomSource

FIXED_VARIANTS = ("largek", "exact", "table")
ASSUMPTIONS = ("std-normal", "half-normal", "skew-normal", "skew-normal-fit")


@dataclass(frozen=True)
class FixedDistribution:
    """Fixed study count; variance parameters from a named assumption."""

    assumption: str = "half-normal"
    delta: float | None = None
    variant: str = "largek"

    def __post_init__(self):
        if self.assumption not in ASSUMPTIONS:
            raise DomainError(f"unknown assumption {self.assumption!r}")
        if self.variant not in FIXED_VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")

    def describe(self) -> str:
        a = self.assumption
        if a == "skew-normal" and self.delta is not None:
            a = f"skew-normal({self.delta:g})"
        return f"fixed-dist:{a}:{self.variant}"


@dataclass(frozen=True)
class FixedMoment:
    """Fixed study count; variance parameters from sample moments."""

    variant: str = "largek"

    def __post_init__(self):
        if self.variant not in FIXED_VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")

    def describe(self) -> str:
        return f"fixed-mom:{self.variant}"


@dataclass(frozen=True)
class RandomDistribution:
    """Poisson study count; parameters from a named assumption."""

    assumption: str = "half-normal"
    delta: float | None = None

    def __post_init__(self):
        if self.assumption not in ASSUMPTIONS:
            raise DomainError(f"unknown assumption {self.assumption!r}")

    def describe(self) -> str:
        a = self.assumption
        if a == "skew-normal" and self.delta is not None:
            a = f"skew-normal({self.delta:g})"
        return f"random-dist:{a}"


@dataclass(frozen=True)
class RandomMoment:
    """Poisson study count; parameters from sample moments."""

    def describe(self) -> str:
        return "random-mom"


@dataclass(frozen=True)
class Bootstrap:
    """Nonparametric bootstrap of the estimator."""

    replicates: int = 1000
    src: RandomSource | None = None
    min_replicates: int = 100

    def __post_init__(self):
        if self.replicates < self.min_replicates:
            raise DomainError(
                f"bootstrap needs at least {self.min_replicates} replicates")

    def describe(self) -> str:
        return f"boot:{self.replicates}"


VarianceModel = FixedDistribution | FixedMoment | RandomDistribution | RandomMoment | Bootstrap


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    level: float
    method: str
    variance_used: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise DomainError("interval bounds out of order")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    critical: float
    reject: bool


def _resolve_params(model: VarianceModel, sample: ZSample | None,
                    k: int) -> ParameterTriple:
    if isinstance(model, (FixedDistribution, RandomDistribution)):
        if model.assumption == "skew-normal-fit":
            if sample is None:
                raise DomainError("skew-normal-fit needs the raw sample")
            return skew_normal_mom_fit(sample).triple
        return distributional_params(model.assumption, k, model.delta)
    if isinstance(model, (FixedMoment, RandomMoment)):
        if sample is None:
            raise DomainError("moment-based models need the raw sample")
        return moments_estimate(sample)
    raise DomainError(f"cannot resolve parameters for {model!r}")


def model_variance(model: VarianceModel, params: ParameterTriple, k: int,
                   alpha: float) -> MomentReport:
    """Moment report selected by the model's count regime and variant."""
    if isinstance(model, (FixedDistribution, FixedMoment)):
        fn = {"largek": moments_fixed_largek,
              "exact": moments_fixed_exact,
              "table": moments_fixed_table}[model.variant]
        return fn(params, k, alpha)
    if isinstance(model, (RandomDistribution, RandomMoment)):
        return moments_random(params, alpha)
    raise DomainError(f"{model!r} has no closed-form variance")


def ci_normal(estimate: FailSafeEstimate, sample: ZSample | None,
              model: VarianceModel, level: float = 0.95) -> Interval:
    """Normal-approximation interval centered at the point estimate.

    The variance formula keeps the fail-safe's own one-sided alpha; only the
    interval width uses the two-sided ``level`` quantile.  The lower endpoint
    is reported as computed and may be negative.
    """
    if isinstance(model, Bootstrap):
        raise DomainError("use ci_bootstrap for bootstrap intervals")
    if not 0.5 < level < 1.0:
        raise DomainError("level must lie in (0.5, 1)")
    params = _resolve_params(model, sample, estimate.k)
    report = model_variance(model, params, estimate.k, estimate.alpha)
    if report.variance < 0:
        raise DegenerateVarianceError(
            f"negative variance {report.variance:.6g} from {model.describe()}")
    q = std_normal_quantile(0.5 * (1.0 + level))
    half = q * math.sqrt(report.variance)
    return Interval(estimate.n_r - half, estimate.n_r + half, level,
                    model.describe(), report.variance)


def ci_from_point(n_r: float, k: int, alpha: float, model: VarianceModel,
                  level: float = 0.95) -> Interval:
    """Interval for a published (k, N_R) pair, without the raw z-scores.

    Only distribution-based models qualify; moment and bootstrap models need
    the original sample.
    """
    if not isinstance(model, (FixedDistribution, RandomDistribution)):
        raise DomainError("point-only intervals need a distribution-based model")
    if model.assumption == "skew-normal-fit":
        raise DomainError("skew-normal-fit needs the raw sample")
    est = FailSafeEstimate(
        n_r=n_r, k=k, sum_z=float("nan"), stouffer_z=float("nan"),
        alpha=alpha, z_alpha=std_normal_quantile(1.0 - alpha),
        below_threshold=False, rule_threshold=5.0 * k + 10.0,
        rule_exceeded=n_r > 5.0 * k + 10.0)
    return ci_normal(est, None, model, level)


def bootstrap_nr_draws(z: np.ndarray, replicates: int, z_alpha: float,
                       g: np.random.Generator) -> np.ndarray:
    """Fail-safe numbers of ``replicates`` resamples drawn with replacement."""
    k = len(z)
    idx = g.integers(0, k, size=(replicates, k))
    sums = z[idx].sum(axis=1)
    return np.maximum(sums * sums / (z_alpha * z_alpha) - k, 0.0)


def ci_bootstrap(sample: ZSample, replicates: int, src: RandomSource,
                 level: float = 0.95) -> tuple[Interval, float, float]:
    """Bootstrap interval plus the resample mean and standard error.

    The interval is centered at the observed estimate; boot_mean is reported
    alongside so a percentile variant can be built on the same draws.
    Deterministic under ``src``.
    """
    if sample.k < 2:
        raise InsufficientDataError("bootstrap needs at least 2 studies")
    if replicates < 100:
        raise DomainError("bootstrap needs at least 100 replicates")
    if not 0.5 < level < 1.0:
        raise DomainError("level must lie in (0.5, 1)")
    est = rosenthal_nr(sample)
    draws = bootstrap_nr_draws(np.asarray(sample.z), replicates, est.z_alpha,
                               src.generator())
    boot_mean = float(draws.mean())
    # identical resamples (constant data) must give width exactly zero
    boot_se = 0.0 if draws.min() == draws.max() else float(draws.std(ddof=1))
    q = std_normal_quantile(0.5 * (1.0 + level))
    iv = Interval(est.n_r - q * boot_se, est.n_r + q * boot_se, level,
                  f"boot:{replicates}", boot_se * boot_se)
    return iv, boot_mean, boot_se


def failsafe_test(estimate: FailSafeEstimate, variance: float,
                  alpha: float) -> TestResult:
    """One-sided test of whether the fail-safe number exceeds 5k+10."""
    if not variance > 0:
        raise DegenerateVarianceError("test needs a positive variance")
    statistic = (estimate.n_r - estimate.rule_threshold) / math.sqrt(variance)
    critical = std_normal_quantile(1.0 - alpha)
    return TestResult(statistic, critical, statistic > critical)


def parse_method(token: str, boot_replicates: int = 1000,
                 src: RandomSource | None = None) -> VarianceModel:
    """Inverse of ``VarianceModel.describe()``.

    Grammar: ``fixed-dist:ASSUMPTION[:VARIANT]``, ``fixed-mom[:VARIANT]``,
    ``random-dist:ASSUMPTION``, ``random-mom``, ``boot[:REPLICATES]`` where
    ASSUMPTION is std-normal, half-normal, skew-normal(DELTA), or
    skew-normal-fit.
    """
    parts = token.strip().split(":")
    head = parts[0]

    def _assumption(text: str) -> tuple[str, float | None]:
        if text.startswith("skew-normal(") and text.endswith(")"):
            try:
                return "skew-normal", float(text[len("skew-normal("):-1])
            except ValueError:
                raise DomainError(f"bad delta in {text!r}") from None
        return text, None

    if head == "fixed-dist":
        if len(parts) < 2:
            raise DomainError(f"{token!r}: fixed-dist needs an assumption")
        a, d = _assumption(parts[1])
        variant = parts[2] if len(parts) > 2 else "largek"
        return FixedDistribution(a, d, variant)
    if head == "fixed-mom":
        variant = parts[1] if len(parts) > 1 else "largek"
        return FixedMoment(variant)
    if head == "random-dist":
        if len(parts) < 2:
            raise DomainError(f"{token!r}: random-dist needs an assumption")
        a, d = _assumption(parts[1])
        return RandomDistribution(a, d)
    if head == "random-mom":
        return RandomMoment()
    if head == "boot":
        reps = int(parts[1]) if len(parts) > 1 else boot_replicates
        return Bootstrap(replicates=reps, src=src)
    raise DomainError(f"unknown method token {token!r}")


def cutoff_table(k_max: int, alpha: float = 0.05,
                 model: VarianceModel | None = None) -> list[tuple[int, int]]:
    """Smallest fail-safe numbers that clear the 5k+10 rule at confidence
    1 - alpha, for k = 1..k_max.

    cutoff(k) = round(5k + 10 + Z_a * sd(k)); the default model is the
    half-normal fixed-count variance in its table variant, which matches the
    reference table entry-for-entry.
    """
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    if model is None:
        model = FixedDistribution("half-normal", variant="table")
    if isinstance(model, (FixedMoment, RandomMoment, Bootstrap)):
        raise DomainError("cutoff table needs a distribution-based model")
    za = std_normal_quantile(1.0 - alpha)
    rows = []
    for k in range(1, k_max + 1):
        params = distributional_params(model.assumption, k, model.delta)
        report = model_variance(model, params, k, alpha)
        cut = int(math.floor(5.0 * k + 10.0 + za * math.sqrt(report.variance) + 0.5))
        rows.append((k, cut))
    return rows
