"""Exception hierarchy shared by all modules.

The CLI maps :class:`ConfigError` to exit status 2 and
:class:`NumericalError` to exit status 3.
"""


class FracPointError(Exception):
    """Base class for all library errors."""


class ConfigError(FracPointError, ValueError):
    """Invalid parameters: unsupported (s, d) pair, bad grid, bad flags."""


class NumericalError(FracPointError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""
