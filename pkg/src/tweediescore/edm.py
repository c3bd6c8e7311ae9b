"""
Exponential dispersion model families and their score calculus.

Every family is written as a one-parameter natural exponential family in its
sufficient statistic ``x`` with the dispersion absorbed into the natural
parameter::

    p(x | theta) = h(x) exp{theta x - psi(theta)},   mu = psi'(theta),
    var(x | theta) = phi V(mu),   V(mu) = mu**p.

Families
--------
GaussianLocation
    x = y ~ N(mu, sigma2); phi = sigma2, p = 0, theta = mu / sigma2.
Poisson
    x = y ~ Poisson(mu); phi = 1, p = 1, theta = log(mu).
Gamma
    x = y ~ Gamma(shape 1/phi, mean mu); p = 2, theta = -1 / (phi mu).
GaussianVariance
    y ~ N(0, h). The sufficient statistic is x = y**2 ~ Gamma(shape 1/2, mean h),
    so phi = 2, p = 2, theta = -1 / (2 h).

Public functions take the raw observation ``y``; for ``GaussianVariance`` it is
squared internally. All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, UnsupportedOperation

__all__ = [
    "Family",
    "EdmSpec",
    "gaussian_location",
    "gaussian_variance",
    "poisson",
    "gamma",
    "make_spec",
    "sufficient_statistic",
    "variance_function",
    "cumulant",
    "mean_from_natural",
    "natural_from_mean",
    "score_mean",
    "fisher_mean",
    "inverse_fisher_mean",
    "scaled_score",
    "score_link",
    "fisher_link",
    "log_density",
    "log_base_measure",
    "base_measure_score",
    "check_observation",
]


class Family(str, enum.Enum):
    GAUSSIAN_LOCATION = "gaussian_location"
    GAUSSIAN_VARIANCE = "gaussian_variance"
    POISSON = "poisson"
    GAMMA = "gamma"


_TWEEDIE_INDEX = {
    Family.GAUSSIAN_LOCATION: 0.0,
    Family.POISSON: 1.0,
    Family.GAMMA: 2.0,
    Family.GAUSSIAN_VARIANCE: 2.0,
}

# dispersion is pinned by the family for these two
_FIXED_DISPERSION = {Family.POISSON: 1.0, Family.GAUSSIAN_VARIANCE: 2.0}

LINKS = ("identity", "log")


@dataclass(frozen=True)
class EdmSpec:
    """An exponential dispersion family with known dispersion.

    Parameters
    ----------
    family : Family
    dispersion : float
        phi > 0. Equals sigma2 for the Gaussian location family, 1 for
        Poisson and 2 for the Gaussian variance family.
    tweedie_index : float
        Power p of the variance function. Stored redundantly and
        cross-checked against ``family``.
    """

    family: Family
    dispersion: float = 1.0
    tweedie_index: float | None = None

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise DomainError(f"unknown family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        phi = float(self.dispersion)
        if not (math.isfinite(phi) and phi > 0):
            raise DomainError(f"dispersion must be positive, got {self.dispersion}")
        fixed = _FIXED_DISPERSION.get(family)
        if fixed is not None and phi != fixed:
            raise DomainError(f"{family.value} has fixed dispersion {fixed}, got {phi}")
        object.__setattr__(self, "dispersion", phi)
        p = _TWEEDIE_INDEX[family]
        if self.tweedie_index is None:
            object.__setattr__(self, "tweedie_index", p)
        elif float(self.tweedie_index) != p:
            raise DomainError(
                f"tweedie index {self.tweedie_index} does not match {family.value} (p={p})"
            )
        else:
            object.__setattr__(self, "tweedie_index", float(self.tweedie_index))

    @property
    def positive_mean(self) -> bool:
        """True when the mean domain is (0, inf)."""
        return self.family is not Family.GAUSSIAN_LOCATION

    @property
    def discrete(self) -> bool:
        return self.family is Family.POISSON

    @property
    def shape(self) -> float:
        """Gamma shape 1/phi (Gamma and GaussianVariance only)."""
        return 1.0 / self.dispersion

    @property
    def natural_domain(self) -> str:
        """'real' or 'negative': the open natural parameter space."""
        if self.family in (Family.GAMMA, Family.GAUSSIAN_VARIANCE):
            return "negative"
        return "real"

    @property
    def mean_domain(self) -> str:
        """'real' or 'positive': the open mean parameter space."""
        return "positive" if self.positive_mean else "real"


def gaussian_location(sigma2: float = 1.0) -> EdmSpec:
    return EdmSpec(Family.GAUSSIAN_LOCATION, sigma2)


def gaussian_variance() -> EdmSpec:
    return EdmSpec(Family.GAUSSIAN_VARIANCE, 2.0)


def poisson() -> EdmSpec:
    return EdmSpec(Family.POISSON, 1.0)


def gamma(dispersion: float = 1.0) -> EdmSpec:
    return EdmSpec(Family.GAMMA, dispersion)


def make_spec(family: str, dispersion: float | None = None) -> EdmSpec:
    """Build a spec from a family name, using the family default dispersion."""
    try:
        fam = Family(family.replace("-", "_"))
    except ValueError:
        raise DomainError(f"unknown family {family!r}") from None
    if dispersion is None:
        dispersion = _FIXED_DISPERSION.get(fam, 1.0)
    return EdmSpec(fam, dispersion)


# ----------------------------------------------------------------------------
# domain checks

def _as_float(a):
    return np.asarray(a, dtype=float)


def _check_mean(spec: EdmSpec, mu):
    mu = _as_float(mu)
    if not np.all(np.isfinite(mu)):
        raise DomainError("mean parameter must be finite")
    if spec.positive_mean and np.any(mu <= 0):
        raise DomainError(f"mean parameter must be positive for {spec.family.value}")
    return mu


def _check_natural(spec: EdmSpec, theta):
    theta = _as_float(theta)
    if not np.all(np.isfinite(theta)):
        raise DomainError("natural parameter must be finite")
    if spec.natural_domain == "negative" and np.any(theta >= 0):
        raise DomainError(f"natural parameter must be negative for {spec.family.value}")
    return theta


def sufficient_statistic(spec: EdmSpec, y):
    """Map a raw observation to the family's sufficient statistic."""
    y = _as_float(y)
    if spec.family is Family.GAUSSIAN_VARIANCE:
        return y * y
    return y


def _check_statistic(spec: EdmSpec, x, strict: bool = False):
    x = _as_float(x)
    if not np.all(np.isfinite(x)):
        raise DomainError("observation must be finite")
    fam = spec.family
    if fam is Family.POISSON:
        if np.any(x < 0) or np.any(x != np.floor(x)):
            raise DomainError("Poisson observations must be nonnegative integers")
    elif fam is Family.GAMMA:
        if np.any(x <= 0):
            raise DomainError("Gamma observations must be positive")
    elif fam is Family.GAUSSIAN_VARIANCE:
        # x = y**2 >= 0 always; the density of x needs x > 0
        if strict and np.any(x <= 0):
            raise DomainError("squared observation must be positive for the density")
    return x


def check_observation(spec: EdmSpec, y, strict: bool = False):
    """Validate raw observations and return the sufficient statistic."""
    return _check_statistic(spec, sufficient_statistic(spec, y), strict=strict)


# ----------------------------------------------------------------------------
# parameter maps

def variance_function(spec: EdmSpec, mu):
    """V(mu) = mu**p (with 0**0 = 1 for the Gaussian location family)."""
    mu = _check_mean(spec, mu)
    if spec.tweedie_index == 0.0:
        return np.ones_like(mu)
    if spec.tweedie_index == 1.0:
        return mu
    if spec.tweedie_index == 2.0:
        return mu * mu
    return mu ** spec.tweedie_index


def cumulant(spec: EdmSpec, theta):
    """psi(theta) in the absorbed-dispersion natural parameterization."""
    theta = _check_natural(spec, theta)
    fam = spec.family
    if fam is Family.GAUSSIAN_LOCATION:
        return 0.5 * spec.dispersion * theta * theta
    if fam is Family.POISSON:
        return np.exp(theta)
    return -spec.shape * np.log(-theta)


def mean_from_natural(spec: EdmSpec, theta):
    """mu = psi'(theta)."""
    theta = _check_natural(spec, theta)
    fam = spec.family
    if fam is Family.GAUSSIAN_LOCATION:
        return spec.dispersion * theta
    if fam is Family.POISSON:
        return np.exp(theta)
    return -spec.shape / theta


def natural_from_mean(spec: EdmSpec, mu):
    """Inverse of :func:`mean_from_natural`."""
    mu = _check_mean(spec, mu)
    fam = spec.family
    if fam is Family.GAUSSIAN_LOCATION:
        return mu / spec.dispersion
    if fam is Family.POISSON:
        return np.log(mu)
    return -spec.shape / mu


# ----------------------------------------------------------------------------
# score and information in the mean parameterization

def _score_stat(spec: EdmSpec, x, mu):
    return (x - mu) / (spec.dispersion * variance_function(spec, mu))


def score_mean(spec: EdmSpec, y, mu):
    """d/dmu log p(y | mu) = (x - mu) / (phi V(mu))."""
    mu = _check_mean(spec, mu)
    x = check_observation(spec, y)
    return _score_stat(spec, x, mu)


def fisher_mean(spec: EdmSpec, mu):
    """Fisher information for mu, 1 / (phi V(mu))."""
    return 1.0 / inverse_fisher_mean(spec, mu)


def inverse_fisher_mean(spec: EdmSpec, mu):
    """phi V(mu), computed directly rather than as 1 / fisher_mean."""
    return spec.dispersion * variance_function(spec, mu)


def scaled_score(spec: EdmSpec, y, mu, d: float = 1.0):
    """Score scaled by I(mu)**(-d).

    Equals ``(x - mu) / (phi**(1-d) mu**(p(1-d)))``: d=0 gives the raw score,
    d=1/2 a standardized forecast error and d=1 the innovation ``x - mu``.
    """
    return inverse_fisher_mean(spec, mu) ** d * score_mean(spec, y, mu)


def _check_link(link: str):
    if link not in LINKS:
        raise DomainError(f"link must be one of {LINKS}, got {link!r}")


def score_link(spec: EdmSpec, y, mu, link: str = "identity"):
    """Score with respect to the link-scale parameter eta = g(mu).

    Under the log link this is ``mu * (x - mu) / (phi V(mu))``.
    """
    _check_link(link)
    s = score_mean(spec, y, mu)
    if link == "log":
        mu = _as_float(mu)
        if np.any(mu <= 0):
            raise DomainError("log link needs a positive mean")
        return mu * s
    return s


def fisher_link(spec: EdmSpec, mu, link: str = "identity"):
    """Fisher information for eta = g(mu); under the log link mu**2 I(mu)."""
    _check_link(link)
    info = fisher_mean(spec, mu)
    if link == "log":
        mu = _as_float(mu)
        if np.any(mu <= 0):
            raise DomainError("log link needs a positive mean")
        return mu * mu * info
    return info


# ----------------------------------------------------------------------------
# densities

def log_base_measure(spec: EdmSpec, x):
    """log h(x) for the sufficient statistic x."""
    x = _as_float(x)
    fam = spec.family
    if fam is Family.GAUSSIAN_LOCATION:
        s2 = spec.dispersion
        return -0.5 * x * x / s2 - 0.5 * math.log(2 * math.pi * s2)
    if fam is Family.POISSON:
        return -gammaln(x + 1.0)
    k = spec.shape
    return (k - 1.0) * np.log(x) - gammaln(k)


def base_measure_score(spec: EdmSpec, x):
    """d/dx log h(x), closed form per continuous family."""
    x = _as_float(x)
    fam = spec.family
    if fam is Family.POISSON:
        raise UnsupportedOperation("base-measure score is undefined for discrete families")
    if fam is Family.GAUSSIAN_LOCATION:
        return -x / spec.dispersion
    if np.any(x <= 0):
        raise DomainError("base-measure score needs a positive statistic")
    return (spec.shape - 1.0) / x


def _logpdf_stat(spec: EdmSpec, x, mu):
    # x already validated; mu may be an array of grid points
    fam = spec.family
    if fam is Family.GAUSSIAN_LOCATION:
        s2 = spec.dispersion
        r = x - mu
        return -0.5 * r * r / s2 - 0.5 * math.log(2 * math.pi * s2)
    if fam is Family.POISSON:
        return x * np.log(mu) - mu - gammaln(x + 1.0)
    k = spec.shape
    return k * np.log(k / mu) + (k - 1.0) * np.log(x) - k * x / mu - gammaln(k)


def log_density(spec: EdmSpec, y, mu):
    """Exact log density (or mass) of the sufficient statistic at mean ``mu``.

    For ``GaussianVariance`` this is the Gamma(1/2, mean h) density of
    ``x = y**2``, which differs from the N(0, h) density of ``y`` by the
    parameter-free term ``-log|y|``.
    """
    mu = _check_mean(spec, mu)
    x = check_observation(spec, y, strict=True)
    return _logpdf_stat(spec, x, mu)
