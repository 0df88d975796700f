"""Fail-safe numbers for meta-analysis.

Point estimates of the number of unpublished null studies needed to nullify
a pooled significance test, confidence intervals for them under five
variance models, a one-sided test against the 5k+10 rule of thumb with its
cutoff table, and a Monte Carlo coverage study of the interval estimators.
"""

from .core import (
    FailSafeEstimate,
    MomentReport,
    invert_nr,
    iyengar_greenhouse_n,
    moments_fixed_exact,
    moments_fixed_largek,
    moments_fixed_table,
    moments_random,
    nr_joint_pdf,
    nr_pdf,
    rosenthal_nr,
    true_nr,
)
from .distributions import (
    FoldedNormal,
    HalfNormal,
    Normal,
    Poisson,
    SkewNormal,
    StandardNormal,
    TruncatedNormal,
    folded_normal_moments,
    normal_raw_moment,
    poisson_raw_moment,
    sample,
    skew_normal_moments,
    skew_normal_pdf,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
)
from .errors import (
    BelowThresholdError,
    DegenerateVarianceError,
    DomainError,
    FailsafeError,
    FitInfeasibleError,
    IngestError,
    InsufficientDataError,
    NumericError,
)
from .estimators import (
    ParameterTriple,
    SkewNormalFit,
    ZSample,
    distributional_params,
    moments_estimate,
    skew_normal_mom_fit,
)
from .inference import (
    Bootstrap,
    FixedDistribution,
    FixedMoment,
    Interval,
    RandomDistribution,
    RandomMoment,
    TestResult,
    ci_bootstrap,
    ci_from_point,
    ci_normal,
    cutoff_table,
    failsafe_test,
    parse_method,
)
from .io import AnalysisConfig, StudyRecord, analyze, format_report, ingest
from .rng import RandomSource, derive_seed
from .simulation import (
    CoverageCell,
    CoverageReport,
    CoverageScenario,
    coverage_csv,
    coverage_study_grid,
    figure_data_csv,
    run_grid,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
