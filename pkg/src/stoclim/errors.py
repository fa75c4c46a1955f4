"""Exception hierarchy shared by all stoclim modules.

The CLI maps these onto exit codes: :class:`ConfigError` gives 2,
:class:`AssertionFailure` gives 1 and every other :class:`StoclimError`
(numerical failures) gives 3.
"""


class StoclimError(Exception):
    """Base class for all library errors."""


class ValidationError(StoclimError, ValueError):
    """Input data violates a documented invariant."""


class QuadratureError(StoclimError):
    """Adaptive quadrature failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        Last error estimate produced before giving up.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


class ExtrapolationError(StoclimError):
    """Richardson extrapolation in the regulator did not settle."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EdgeError(StoclimError, ValueError):
    """A Bohr frequency sits on a spectral support endpoint."""


class PositivityError(StoclimError):
    """A propagated density matrix lost positivity."""


class FactorizationError(StoclimError):
    """A Gram matrix is too far from positive semidefinite to factor."""


class ConvergenceError(StoclimError):
    """A convergence scan was not monotone within its slack.

    Attributes
    ----------
    table : list
        The scan rows, kept for the failure report.
    """

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table or []


class AssertionFailure(StoclimError):
    """An embedded numerical identity check failed.

    Attributes
    ----------
    details : dict
        Structured description of the failing identity.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class ConfigError(StoclimError):
    """Scenario configuration is unreadable or invalid.

    Attributes
    ----------
    errors : list of (str, str)
        Every problem found, as ``(field_path, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{p}: {m}" for p, m in self.errors)
        super().__init__(f"invalid configuration: {lines}")
