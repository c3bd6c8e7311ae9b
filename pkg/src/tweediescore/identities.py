"""
Static Tweedie identities for posterior means.

* Gaussian location: ``E[mu | y] = y + sigma2 * d/dy log f(y)``.
* Natural exponential family: ``E[theta | x] = d/dx log f(x) - d/dx log h(x)``.
* Expectation parameter: ``E[mu | x] = x + E[d/dtheta log pi(theta) | x]``,
  which for a conjugate prior reduces to ``(tau + x) / (n + 1)``.

The marginal score inputs are normally produced by
:func:`tweediescore.quadrature.marginal_score`; this module only does the
algebra, plus :class:`IdentityReport` bookkeeping used by the CLI.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import edm, quadrature
from .edm import EdmSpec
from .errors import DomainError, UnsupportedOperation
from .quadrature import ConjugatePrior, QuadratureConfig

__all__ = [
    "IdentityId",
    "IdentityReport",
    "tweedie_gaussian",
    "tweedie_gaussian_noise",
    "tweedie_nef_natural",
    "nef_expectation_posterior",
    "conjugate_posterior_mean",
]


class IdentityId(str, enum.Enum):
    GAUSSIAN_TWEEDIE = "GaussianTweedie"
    NEF_NATURAL = "NefNatural"
    NEF_EXPECTATION = "NefExpectation"
    PARAMETER_SPACE = "ParameterSpaceTweedie"


@dataclass(frozen=True)
class IdentityReport:
    identity_id: IdentityId
    lhs: float
    rhs: float
    tolerance: float
    label: str = ""

    @property
    def abs_gap(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.abs_gap <= self.tolerance

    def to_dict(self) -> dict:
        # key set is part of the report file format
        return {
            "identity_id": IdentityId(self.identity_id).value,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "abs_gap": float(self.abs_gap),
            "tolerance": float(self.tolerance),
            "pass": bool(self.passed),
        }


def _positive(name, v):
    if not (v > 0 and math.isfinite(v)):
        raise DomainError(f"{name} must be positive, got {v}")


def tweedie_gaussian(y: float, sigma2: float, marginal_score_at_y: float) -> float:
    """Posterior mean of the signal in ``y = mu + eps``, eps ~ N(0, sigma2)."""
    _positive("sigma2", sigma2)
    return y + sigma2 * marginal_score_at_y


def tweedie_gaussian_noise(sigma2: float, marginal_score_at_y: float) -> float:
    """Posterior mean of the noise, ``-sigma2 * d/dy log f(y)``."""
    _positive("sigma2", sigma2)
    return -sigma2 * marginal_score_at_y


def tweedie_nef_natural(spec: EdmSpec, y: float, marginal_score_at_y: float) -> float:
    """Posterior mean of the natural parameter from the marginal score.

    ``marginal_score_at_y`` is the derivative of log f with respect to the
    sufficient statistic (``y**2`` for the Gaussian variance family).
    """
    if spec.discrete:
        raise UnsupportedOperation("the derivative form needs a continuous observation")
    x = edm.check_observation(spec, y)
    return float(marginal_score_at_y - edm.base_measure_score(spec, x))


def conjugate_posterior_mean(tau: float, n: float, x: float) -> float:
    """(tau + x) / (n + 1)."""
    _positive("n", n)
    return (tau + x) / (n + 1.0)


def nef_expectation_posterior(
    prior,
    spec: EdmSpec,
    y: float,
    cfg: QuadratureConfig | None = None,
    method: str = "auto",
) -> float:
    """Posterior mean of mu via the expectation-parameter identity.

    With ``method='auto'`` a :class:`ConjugatePrior` uses the closed form and
    any other natural-space prior uses quadrature of the prior score.
    ``method='quadrature'`` forces the general route.
    """
    if method not in ("auto", "quadrature"):
        raise DomainError(f"method must be 'auto' or 'quadrature', got {method!r}")
    x = float(edm.check_observation(spec, y))
    if isinstance(prior, ConjugatePrior) and method == "auto":
        prior.validate(spec)
        return conjugate_posterior_mean(prior.tau, prior.n, x)
    if prior.space != "natural":
        # the integration-by-parts argument needs a density in theta
        raise UnsupportedOperation("the general form needs a prior on the natural parameter")
    correction = quadrature.posterior_expectation(
        spec, prior, y, lambda z: prior.score(spec, z), cfg
    )
    return x + correction
