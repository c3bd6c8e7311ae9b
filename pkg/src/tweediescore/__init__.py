"""Score-driven filtering for exponential dispersion models, with quadrature checks of the
Tweedie posterior-mean identities."""

from . import conjugate, edm, identities, local_approx, quadrature, recursions, simulate, verification
from .edm import EdmSpec, Family, make_spec
from .errors import ConfigError, DomainError, QuadratureError, TweedieScoreError, UnsupportedOperation

__version__ = "0.1.0"

__all__ = [
    "conjugate", "edm", "identities", "local_approx", "quadrature", "recursions", "simulate",
    "verification", "EdmSpec", "Family", "make_spec", "TweedieScoreError", "DomainError",
    "ConfigError", "QuadratureError", "UnsupportedOperation",
]
