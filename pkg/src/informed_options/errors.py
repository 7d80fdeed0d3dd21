"""Exception types shared across the package.

Everything raised on purpose derives from InformedOptionsError so callers can
catch one base class. The CLI maps subclasses onto exit codes; the service
maps them onto HTTP status codes.
"""


class InformedOptionsError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(InformedOptionsError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ParameterRegimeError(InformedOptionsError, ValueError):
    """Parameters yield an inadmissible model, e.g. a step probability
    outside (0, 1) or a drift ordering a formula cannot accept."""


class PositivityError(InformedOptionsError, ValueError):
    """A lattice node price would be zero or negative."""


class NoArbitrageError(InformedOptionsError, ValueError):
    """Gross up/down factors fail to straddle the riskless gross return."""


class DataError(InformedOptionsError, ValueError):
    """Malformed or unusable input data: files, chains, price histories."""


class CalibrationError(InformedOptionsError, RuntimeError):
    """A calibration stage could not produce a usable result."""


class UsageError(InformedOptionsError):
    """Bad command-line invocation."""
