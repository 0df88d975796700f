"""Exception types shared across the package."""


class FailsafeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FailsafeError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InsufficientDataError(FailsafeError, ValueError):
    """Too few studies for the requested computation."""


class DegenerateVarianceError(FailsafeError, ValueError):
    """A variance of zero makes the requested interval or test meaningless."""


class BelowThresholdError(FailsafeError, ValueError):
    """The combined z-score sits below the significance threshold, so the
    requested quantity is undefined."""


class NumericError(FailsafeError, RuntimeError):
    """A numerical routine failed to converge or lost its bracket."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message)
        self.bracket = bracket


class FitInfeasibleError(FailsafeError, ValueError):
    """The sample moments fall outside the envelope the skew-normal family
    can represent.  Carries the offending intermediate values."""

    def __init__(self, message: str, *, m1: float, m2: float, m3: float,
                 omega2: float | None = None, delta: float | None = None):
        super().__init__(message)
        self.m1 = m1
        self.m2 = m2
        self.m3 = m3
        self.omega2 = omega2
        self.delta = delta


class IngestError(FailsafeError, ValueError):
    """Malformed input data file.  ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
