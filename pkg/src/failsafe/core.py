"""The fail-safe estimator, its sampling distribution, and its moments.

The estimator for k pooled studies is N = S^2/Z_a^2 - k with S the sum of the
per-study z-scores and Z_a the one-sided critical value.  Under a large-k
normal approximation for S, conditioning on N >= 0 makes S a lower-truncated
normal, which yields a closed-form density plus exact and asymptotic moment
formulas, for both fixed and Poisson-distributed study counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import (
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
)
from .errors import (
    BelowThresholdError,
    DegenerateVarianceError,
    DomainError,
    InsufficientDataError,
    NumericError,
)
from .estimators import ParameterTriple, ZSample

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FailSafeEstimate:
    """Point estimate of the fail-safe number for one meta-analysis.

    ``n_r`` is clamped at zero only when the raw value is negative; a sum of
    z-scores below the one-sided threshold (including large negative sums)
    sets ``below_threshold`` without further adjustment, since the estimator
    squares the sum.
    """

    n_r: float
    k: int
    sum_z: float
    stouffer_z: float
    alpha: float
    z_alpha: float
    below_threshold: bool
    rule_threshold: float   # 5k + 10
    rule_exceeded: bool


def rosenthal_nr(sample: ZSample) -> FailSafeEstimate:
    """Fail-safe number with the 5k+10 rule-of-thumb comparison."""
    k = sample.k
    if k < 1:
        raise InsufficientDataError("fail-safe number needs at least one study")
    z_alpha = _z_alpha(sample.alpha)
    s = sum(sample.z)
    raw = s * s / (z_alpha * z_alpha) - k
    n_r = raw if raw > 0.0 else 0.0
    below = s < z_alpha * math.sqrt(k)
    rule = 5.0 * k + 10.0
    return FailSafeEstimate(
        n_r=n_r, k=k, sum_z=s, stouffer_z=s / math.sqrt(k),
        alpha=sample.alpha, z_alpha=z_alpha, below_threshold=below,
        rule_threshold=rule, rule_exceeded=n_r > rule)


def invert_nr(n_r: float, k: int, alpha: float) -> float:
    """Sum of z-scores that reproduces a given fail-safe number."""
    if n_r < 0:
        raise DomainError("n_r must be nonnegative")
    return _z_alpha(alpha) * math.sqrt(n_r + k)


def iyengar_greenhouse_n(sample: ZSample) -> float:
    """Unpublished-study count when missing studies average the truncated
    normal mean M(alpha) = -phi(z_a)/Phi(z_a) instead of zero.

    Solves Z_a*sqrt(n+k) = sum(z) + n*M(alpha) by bisection; the left side
    grows like sqrt(n) while the right side falls linearly, so the root is
    unique and bracketed by [0, N_R + 1].
    """
    k = sample.k
    if k < 1:
        raise InsufficientDataError("needs at least one study")
    z_alpha = _z_alpha(sample.alpha)
    s = sum(sample.z)
    if s < z_alpha * math.sqrt(k):
        raise BelowThresholdError(
            "combined z below the significance threshold; no studies are "
            "needed to nullify the result")
    m_alpha = -std_normal_pdf(z_alpha) / std_normal_cdf(z_alpha)

    def g(n: float) -> float:
        return z_alpha * math.sqrt(n + k) - s - n * m_alpha

    hi = s * s / (z_alpha * z_alpha) - k + 1.0
    lo = 0.0
    if g(lo) > 0.0 or g(hi) < 0.0:
        raise NumericError("no sign change in root bracket", bracket=(lo, hi))
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# moments of the estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentReport:
    """Expectation and variance of the estimator under one model.

    ``lambda_star`` is the standardized distance of the truncation point,
    ``epsilon`` the truncation correction to the mean, and ``delta_star``
    the correction to the variance; the large-k and random-count formulas
    leave the fields they do not use as None.
    """

    expectation: float
    variance: float
    formula_tag: str
    lambda_star: float | None = None
    epsilon: float | None = None
    delta_star: float | None = None


def _z_alpha(alpha: float) -> float:
    za = std_normal_quantile(1.0 - alpha)
    if za <= 0.0:
        # alpha of exactly one half zeroes the critical value and with it
        # every denominator downstream
        raise DomainError(f"alpha={alpha!r} gives a nonpositive critical value")
    return za


def _lambda_star(mu: float, sigma: float, k: float, za: float) -> float:
    return (math.sqrt(k) * mu - za) / sigma


def _hazard(lam_star: float) -> float:
    # phi(l)/Phi(l); switch to the asymptotic tail ratio when Phi underflows
    c = std_normal_cdf(lam_star)
    if c > 0.0:
        return std_normal_pdf(lam_star) / c
    return -lam_star


def moments_fixed_largek(params: ParameterTriple, k: int, alpha: float) -> MomentReport:
    """Asymptotic moments, valid once the truncated mass is negligible."""
    if not params.sigma2 > 0:
        raise DegenerateVarianceError("sigma2 must be positive")
    za = _z_alpha(alpha)
    mu, s2 = params.mu, params.sigma2
    e = (k * k * mu * mu + k * s2) / za**2 - k
    v = 2.0 * k * k * s2 * (2.0 * k * mu * mu + s2) / za**4
    lam = _lambda_star(mu, math.sqrt(s2), k, za)
    return MomentReport(e, v, "fixed-largek", lambda_star=lam,
                        epsilon=0.0, delta_star=0.0)


def moments_fixed_exact(params: ParameterTriple, k: int, alpha: float) -> MomentReport:
    """Moments of the truncated sampling distribution for fixed k.

    The variance correction is the second cumulant-generating-function
    derivative of the truncated law:

        delta* = h * [k^2 s^3 (3 sqrt(k) mu + Z_a)
                      - (h + l*) k^2 s^2 (sqrt(k) mu + Z_a)^2] / Z_a^4,

    h = phi(l*)/Phi(l*).  Quadrature and Monte Carlo over the density agree
    with this form; printed variants of the correction circulate with other
    powers of k and do not integrate consistently.
    """
    if not params.sigma2 > 0:
        raise DegenerateVarianceError("sigma2 must be positive")
    za = _z_alpha(alpha)
    mu, s2 = params.mu, params.sigma2
    s = math.sqrt(s2)
    lam = _lambda_star(mu, s, k, za)
    h = _hazard(lam)
    sk = math.sqrt(k)
    eps = h * (k * s * (sk * mu + za) / za**2)
    e = (k * k * mu * mu + k * s2) / za**2 - k + eps
    dpp = k * k * s**3 * (3.0 * sk * mu + za) / za**4
    dp = k * s * (sk * mu + za) / za**2
    d_star = h * (dpp - (h + lam) * dp * dp)
    v = 2.0 * k * k * s2 * (2.0 * k * mu * mu + s2) / za**4 + d_star
    return MomentReport(e, v, "fixed-exact", lambda_star=lam,
                        epsilon=eps, delta_star=d_star)


def moments_fixed_table(params: ParameterTriple, k: int, alpha: float) -> MomentReport:
    """Fixed-k moments with the variance correction that reproduces the
    reference cutoff table.

        delta* = h * [k^{5/2} s^3 (5 sqrt(k) mu + Z_a)^2
                      - (h + l*) k^2 s^2 (sqrt(k) mu + Z_a)^2] / Z_a^4

    This correction is larger than the analytic one at small k and vanishes
    with it as k grows; use ``moments_fixed_exact`` for the distribution's
    own moments.
    """
    if not params.sigma2 > 0:
        raise DegenerateVarianceError("sigma2 must be positive")
    za = _z_alpha(alpha)
    mu, s2 = params.mu, params.sigma2
    s = math.sqrt(s2)
    lam = _lambda_star(mu, s, k, za)
    h = _hazard(lam)
    sk = math.sqrt(k)
    eps = h * (k * s * (sk * mu + za) / za**2)
    e = (k * k * mu * mu + k * s2) / za**2 - k + eps
    bracket = (k**2.5 * s**3 * (5.0 * sk * mu + za) ** 2
               - (h + lam) * k**2 * s2 * (sk * mu + za) ** 2)
    d_star = h * bracket / za**4
    v = 2.0 * k * k * s2 * (2.0 * k * mu * mu + s2) / za**4 + d_star
    return MomentReport(e, v, "fixed-table", lambda_star=lam,
                        epsilon=eps, delta_star=d_star)


def moments_random(params: ParameterTriple, alpha: float) -> MomentReport:
    """Moments when the study count is Poisson with rate ``params.lam``."""
    if not params.sigma2 > 0:
        raise DegenerateVarianceError("sigma2 must be positive")
    if not params.lam > 0:
        raise DomainError("lambda must be positive")
    za = _z_alpha(alpha)
    mu, s2, lam = params.mu, params.sigma2, params.lam
    m2, s4 = mu * mu, s2 * s2
    e = (lam * lam * m2 + lam * (m2 + s2)) / za**2 - lam
    v = ((4*lam**3 + 6*lam**2 + lam) * m2 * m2
         + (4*lam**3 + 16*lam**2 + 6*lam) * m2 * s2
         + (2*lam**2 + 3*lam) * s4) / za**4 \
        - 2.0 * ((2*lam**2 + lam) * m2 + lam * s2) / za**2 + lam
    return MomentReport(e, v, "random")


def true_nr(params: ParameterTriple, k_model: str, alpha: float,
            k: int | None = None) -> float:
    """Population value of the estimator, the target of coverage scoring."""
    if k_model == "fixed":
        if k is None:
            raise DomainError("fixed k_model needs k")
        return moments_fixed_largek(params, k, alpha).expectation
    if k_model == "random":
        return moments_random(params, alpha).expectation
    raise DomainError(f"unknown k_model {k_model!r}")


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def nr_pdf(n_r: float, params: ParameterTriple, k: int, alpha: float,
           variant: str = "exact") -> float:
    """Density of the fail-safe estimator at ``n_r`` for fixed k.

    The exact variant carries the 1/Phi(lambda*) truncation factor; the
    large-k variant omits it.  Zero below the support.
    """
    if variant not in ("exact", "largek"):
        raise DomainError(f"unknown variant {variant!r}")
    if not params.sigma2 > 0:
        raise DegenerateVarianceError("sigma2 must be positive")
    if n_r < 0.0:
        return 0.0
    za = _z_alpha(alpha)
    mu, s2 = params.mu, params.sigma2
    dens = za / (2.0 * math.sqrt(2.0 * math.pi * k * s2 * (n_r + k))) \
        * math.exp(-(za * math.sqrt(n_r + k) - k * mu) ** 2 / (2.0 * k * s2))
    if variant == "exact":
        dens /= std_normal_cdf(_lambda_star(mu, math.sqrt(s2), k, za))
    return dens


def nr_joint_pdf(n_r: float, k: int, params: ParameterTriple,
                 alpha: float) -> float:
    """Joint density of (estimator value, study count) under Poisson counts.

    Defined for k >= 1; the conditional density does not exist at k = 0.
    """
    if k < 1:
        raise DomainError("joint density needs k >= 1")
    lam = params.lam
    log_pmf = k * math.log(lam) - lam - math.lgamma(k + 1.0)
    return nr_pdf(n_r, params, k, alpha, "exact") * math.exp(log_pmf)
