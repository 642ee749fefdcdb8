"""Exception hierarchy shared by all modules."""


class HarmonicVisibilityError(Exception):
    """Base class for every error raised by the package."""


class InputError(HarmonicVisibilityError, ValueError):
    """An argument violates an operation's precondition."""


class NoSignChangeError(InputError):
    """A root-finding bracket does not enclose a sign change."""


class QuadratureError(HarmonicVisibilityError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Attributes:
        estimate: best value obtained before giving up.
        error_bound: the quadrature's own error estimate for ``estimate``.
    """

    def __init__(self, message, estimate, error_bound):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class CriticalityError(HarmonicVisibilityError, ArithmeticError):
    """The intensity sits at the critical value; the integral cannot be certified."""


class NumericalConsistencyError(HarmonicVisibilityError, ArithmeticError):
    """Inputs are inconsistent beyond round-off (e.g. a point off the hyperboloid)."""


class CensoringError(HarmonicVisibilityError):
    """Too many Monte Carlo samples were right-censored for a goodness-of-fit test."""

    def __init__(self, message, suggested_r_max):
        super().__init__(f"{message}; increase r_max to at least {suggested_r_max:.6g}")
        self.suggested_r_max = suggested_r_max


class FastMarchingError(HarmonicVisibilityError, RuntimeError):
    """The fast-marching front was accepted out of order. Indicates a bug."""


class BoundViolationError(HarmonicVisibilityError, ArithmeticError):
    """A computed tube volume left its analytic sandwich beyond the grid tolerance."""


class PointCountError(HarmonicVisibilityError):
    """A simulated configuration would exceed the point budget."""
