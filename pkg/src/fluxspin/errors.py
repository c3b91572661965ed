"""Exception hierarchy shared by all fluxspin modules."""


class FluxSpinError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FluxSpinError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class NumericalError(FluxSpinError, ArithmeticError):
    """A numerical procedure failed to reach its requested accuracy.

    Attributes
    ----------
    estimate : float or None
        Best value obtained before giving up.
    error : float or None
        Error estimate reported by the underlying routine.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class UnsupportedVariantError(FluxSpinError, TypeError):
    """Operation is not defined for the given kernel variant."""


class RankDeficiencyError(FluxSpinError, ArithmeticError):
    """Jacobian of a least-squares problem is singular at the optimum.

    Attributes
    ----------
    directions : list of str
        Parameter names dominating the null space.
    """

    def __init__(self, message, directions):
        super().__init__(message)
        self.directions = list(directions)


class InfeasibleError(FluxSpinError, ValueError):
    """A root-finding problem has no solution on the physical branch."""


class TraceParseError(FluxSpinError, ValueError):
    """Malformed trace file; ``lineno`` points at the offending line."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class UnitError(FluxSpinError, ValueError):
    """A quantity carries a unit of the wrong dimension."""
