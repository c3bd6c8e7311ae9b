"""Exception hierarchy shared by every module."""


class TweedieScoreError(Exception):
    """Base class for errors raised by this package."""


class DomainError(TweedieScoreError, ValueError):
    """A parameter or observation lies outside its valid domain."""


class ConfigError(TweedieScoreError, ValueError):
    """Invalid configuration (quadrature settings, CLI options, ...)."""


class UnsupportedOperation(TweedieScoreError, NotImplementedError):
    """The operation is not defined for the requested family or prior."""


class QuadratureError(TweedieScoreError, ArithmeticError):
    """Numerical integration failed (underflow, disagreement between forms)."""
