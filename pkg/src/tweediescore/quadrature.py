"""
Brute-force integration over a scalar parameter.

These routines compute marginal densities, marginal scores and posterior means
by direct numerical integration, and serve as the independent reference that
the closed-form identities elsewhere in the package are checked against.

Two schemes are available:

``gauss_hermite``
    Exact for Gaussian(-mixture) priors on an unbounded parameter; each
    component gets its own rescaled Hermite rule.
``trapezoid``
    Composite trapezoid rule on an adaptively chosen interval. Parameters on a
    half-line are integrated in log-distance to the boundary, which keeps the
    integrand smooth (and hence the rule spectrally accurate) near the edge.

A Gaussian prior on a positive parameter is *not* renormalized over the
half-line: the likelihood is taken to be zero outside the domain, so the
marginal is ``int_0^inf p(x|mu) N(mu; a, P) dmu``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from . import edm
from .edm import EdmSpec, Family
from .errors import ConfigError, DomainError, QuadratureError, UnsupportedOperation

__all__ = [
    "QuadratureConfig",
    "GaussianPrior",
    "GaussianMixturePrior",
    "ConjugatePrior",
    "CustomPrior",
    "marginal_density",
    "log_marginal_density",
    "marginal_score",
    "posterior_mean_oracle",
    "posterior_expectation",
    "gauss_hermite_rule",
    "DEFAULT_GH_NODES",
    "DEFAULT_TRAPEZOID_NODES",
]

SCHEMES = ("gauss_hermite", "trapezoid")
DEFAULT_GH_NODES = 128
DEFAULT_TRAPEZOID_NODES = 4096

# log-integrand drop treated as negligible (e**-46 ~ 1e-20)
_NEGLIGIBLE = 46.0
_COARSE = 513
_MAX_EXPAND = 60


@dataclass(frozen=True)
class QuadratureConfig:
    """Integration settings.

    ``scheme=None`` picks Gauss-Hermite when the prior is Gaussian (or a
    Gaussian mixture) on an unbounded parameter and the trapezoid rule
    otherwise. ``node_count=None`` uses the scheme default (128 / 4096).
    """

    scheme: str | None = None
    node_count: int | None = None
    domain_halfwidth_sigmas: float = 12.0
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.scheme is not None and self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.node_count is not None and (int(self.node_count) != self.node_count or self.node_count < 16):
            raise ConfigError(f"node_count must be an integer >= 16, got {self.node_count}")
        if not (self.domain_halfwidth_sigmas > 0):
            raise ConfigError("domain_halfwidth_sigmas must be positive")
        if not (0 < self.fd_step <= 1e-2):
            raise ConfigError(f"fd_step must lie in (0, 1e-2], got {self.fd_step}")

    def nodes_for(self, scheme: str) -> int:
        if self.node_count is not None:
            return int(self.node_count)
        return DEFAULT_GH_NODES if scheme == "gauss_hermite" else DEFAULT_TRAPEZOID_NODES


_DEFAULT_CFG = QuadratureConfig()


# ----------------------------------------------------------------------------
# priors

def _check_space(space):
    if space not in ("mean", "natural"):
        raise ConfigError(f"prior space must be 'mean' or 'natural', got {space!r}")


@dataclass(frozen=True)
class GaussianPrior:
    """N(mean, variance) on the mean (default) or natural parameter."""

    mean: float
    variance: float
    space: str = "mean"

    def __post_init__(self):
        _check_space(self.space)
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise DomainError(f"prior variance must be positive, got {self.variance}")
        if not math.isfinite(self.mean):
            raise DomainError("prior mean must be finite")

    normalized = True

    def components(self):
        return [(1.0, self.mean, self.variance)]

    def logpdf(self, spec, z):
        v = self.variance
        return -0.5 * (z - self.mean) ** 2 / v - 0.5 * math.log(2 * math.pi * v)

    def score(self, spec, z):
        return -(z - self.mean) / self.variance

    def location(self, spec):
        return self.mean, math.sqrt(self.variance)


@dataclass(frozen=True)
class GaussianMixturePrior:
    """Finite mixture of Gaussians."""

    weights: Sequence[float]
    means: Sequence[float]
    variances: Sequence[float]
    space: str = "mean"

    def __post_init__(self):
        _check_space(self.space)
        w = np.asarray(self.weights, float)
        m = np.asarray(self.means, float)
        v = np.asarray(self.variances, float)
        if not (w.ndim == 1 and w.shape == m.shape == v.shape and w.size > 0):
            raise DomainError("mixture weights, means and variances must be equal-length vectors")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("mixture weights must be positive and sum to 1")
        if np.any(v <= 0):
            raise DomainError("mixture variances must be positive")
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "means", tuple(m.tolist()))
        object.__setattr__(self, "variances", tuple(v.tolist()))

    normalized = True

    def components(self):
        return list(zip(self.weights, self.means, self.variances))

    def _component_logs(self, z):
        z = np.asarray(z, float)[..., None]
        w, m, v = (np.asarray(a) for a in (self.weights, self.means, self.variances))
        return np.log(w) - 0.5 * (z - m) ** 2 / v - 0.5 * np.log(2 * np.pi * v)

    def logpdf(self, spec, z):
        return logsumexp(self._component_logs(z), axis=-1)

    def score(self, spec, z):
        logs = self._component_logs(z)
        resp = np.exp(logs - logsumexp(logs, axis=-1, keepdims=True))
        m, v = np.asarray(self.means), np.asarray(self.variances)
        return np.sum(resp * (-(np.asarray(z, float)[..., None] - m) / v), axis=-1)

    def location(self, spec):
        w, m, v = (np.asarray(a) for a in (self.weights, self.means, self.variances))
        mean = float(w @ m)
        var = float(w @ (v + (m - mean) ** 2))
        return mean, math.sqrt(var)


@dataclass(frozen=True)
class ConjugatePrior:
    """pi(theta) proportional to exp{tau theta - n psi(theta)}; lives in natural space.

    The implied prior mean of mu is tau / n.
    """

    tau: float
    n: float

    space = "natural"
    normalized = False

    def __post_init__(self):
        if not (self.n > 0 and math.isfinite(self.n)):
            raise DomainError(f"conjugate prior strength n must be positive, got {self.n}")
        if not math.isfinite(self.tau):
            raise DomainError("conjugate tau must be finite")

    def components(self):
        return None

    def prior_mean(self) -> float:
        return self.tau / self.n

    def validate(self, spec: EdmSpec):
        if spec.positive_mean and self.tau <= 0:
            raise DomainError(f"conjugate prior for {spec.family.value} needs tau > 0")

    def logpdf(self, spec, z):
        return self.tau * z - self.n * _psi(spec, z)

    def score(self, spec, z):
        return self.tau - self.n * _mu_of_theta(spec, z)

    def location(self, spec):
        self.validate(spec)
        mu = self.tau / self.n
        theta = float(edm.natural_from_mean(spec, mu))
        sd = 1.0 / math.sqrt(self.n * float(edm.inverse_fisher_mean(spec, mu)))
        return theta, sd


@dataclass(frozen=True)
class CustomPrior:
    """User-supplied (possibly unnormalized) log density.

    ``center`` and ``scale`` seed the adaptive integration interval. ``score``
    is the derivative of ``logpdf`` and is only needed by the general
    expectation-parameter identity; when omitted a central difference is used.
    """

    logpdf_fn: Callable[[np.ndarray], np.ndarray]
    center: float
    scale: float
    space: str = "mean"
    score_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    normalized = False

    def __post_init__(self):
        _check_space(self.space)
        if not (self.scale > 0):
            raise DomainError("custom prior scale must be positive")

    def components(self):
        return None

    def logpdf(self, spec, z):
        return np.asarray(self.logpdf_fn(z), float)

    def score(self, spec, z):
        if self.score_fn is not None:
            return np.asarray(self.score_fn(z), float)
        h = 1e-5 * max(1.0, abs(self.scale))
        return (self.logpdf(spec, z + h) - self.logpdf(spec, z - h)) / (2 * h)

    def location(self, spec):
        return float(self.center), float(self.scale)


Prior = GaussianPrior | GaussianMixturePrior | ConjugatePrior | CustomPrior


# ----------------------------------------------------------------------------
# unchecked parameter maps for grid evaluation

def _psi(spec, theta):
    fam = spec.family
    with np.errstate(all="ignore"):
        if fam is Family.GAUSSIAN_LOCATION:
            return 0.5 * spec.dispersion * theta * theta
        if fam is Family.POISSON:
            return np.exp(theta)
        return -spec.shape * np.log(-theta)


def _mu_of_theta(spec, theta):
    fam = spec.family
    with np.errstate(all="ignore"):
        if fam is Family.GAUSSIAN_LOCATION:
            return spec.dispersion * theta
        if fam is Family.POISSON:
            return np.exp(theta)
        return -spec.shape / theta


def _theta_of_mu(spec, mu):
    fam = spec.family
    with np.errstate(all="ignore"):
        if fam is Family.GAUSSIAN_LOCATION:
            return mu / spec.dispersion
        if fam is Family.POISSON:
            return np.log(mu)
        return -spec.shape / mu


def _domain(spec, space):
    return spec.mean_domain if space == "mean" else spec.natural_domain


def _loglik(spec, x, z, space):
    mu = z if space == "mean" else _mu_of_theta(spec, z)
    with np.errstate(all="ignore"):
        out = edm._logpdf_stat(spec, x, mu)
    out = np.asarray(out, float)
    return np.where(np.isnan(out), -np.inf, out)


# ----------------------------------------------------------------------------
# rules

@functools.lru_cache(maxsize=32)
def gauss_hermite_rule(n: int):
    """Nodes and weights for E[g(Z)], Z ~ N(0, 1)."""
    x, w = np.polynomial.hermite.hermgauss(n)
    x = x * math.sqrt(2.0)
    w = w / math.sqrt(math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _transform(domain):
    """Map t -> z and log|dz/dt| for the integration variable."""
    if domain == "real":
        return (lambda t: t), (lambda t: np.zeros_like(t))
    sign = 1.0 if domain == "positive" else -1.0
    return (lambda t: sign * np.exp(t)), (lambda t: t)


def _clean(v):
    v = np.asarray(v, float)
    return np.where(np.isnan(v), -np.inf, v)


def _support_interval(logf, lo, hi, step):
    """Grow [lo, hi] until logf is negligible at both ends, then trim to its support."""
    for _ in range(_MAX_EXPAND):
        t = np.linspace(lo, hi, _COARSE)
        v = _clean(logf(t))
        m = v.max()
        if not np.isfinite(m):
            lo, hi = lo - step, hi + step
            continue
        grow_lo = v[0] > m - _NEGLIGIBLE
        grow_hi = v[-1] > m - _NEGLIGIBLE
        if not (grow_lo or grow_hi):
            break
        if grow_lo:
            lo -= step
        if grow_hi:
            hi += step
    else:
        raise QuadratureError("could not bracket the integrand; mass is zero or does not decay")
    # trim, refining while the support is a small fraction of the window
    for _ in range(4):
        t = np.linspace(lo, hi, _COARSE)
        v = _clean(logf(t))
        keep = np.nonzero(v > v.max() - _NEGLIGIBLE)[0]
        i0, i1 = max(keep[0] - 1, 0), min(keep[-1] + 1, _COARSE - 1)
        if i1 - i0 > _COARSE // 4:
            return t[i0], t[i1]
        lo, hi = t[i0], t[i1]
    return lo, hi


def _trapezoid(logf, lo, hi, n):
    """Return (t, log weights + logf) on an n-point trapezoid grid."""
    t = np.linspace(lo, hi, n)
    h = t[1] - t[0]
    logw = np.full(n, math.log(h))
    logw[0] = logw[-1] = math.log(h / 2)
    return t, logw + _clean(logf(t))


def _weighted_grid(spec, prior, x, cfg, with_likelihood=True, func=None):
    """Nodes z and log weights such that sum exp(lw) g(z) ~ int g(z) pi(z) p(x|z) dz.

    Returns ``(z, lw, log_norm)`` where ``log_norm`` is the log of the prior's
    normalizing constant (0 for normalized priors). When ``func`` is given the
    interval is also wide enough for ``func(z)`` times the integrand.
    """
    space = prior.space
    domain = _domain(spec, space)
    comps = prior.components()
    scheme = cfg.scheme
    if scheme is None:
        scheme = "gauss_hermite" if comps is not None and domain == "real" else "trapezoid"
    if scheme == "gauss_hermite":
        if comps is None:
            raise ConfigError("Gauss-Hermite needs a Gaussian or Gaussian-mixture prior")
        if domain != "real":
            raise ConfigError("Gauss-Hermite needs an unbounded parameter; use the trapezoid scheme")
        nodes, weights = gauss_hermite_rule(cfg.nodes_for(scheme))
        zs, lws = [], []
        for w, m, v in comps:
            zs.append(m + math.sqrt(v) * nodes)
            lws.append(math.log(w) + np.log(weights))
        z = np.concatenate(zs)
        lw = np.concatenate(lws)
        if with_likelihood:
            lw = lw + _loglik(spec, x, z, space)
        return z, lw, 0.0

    if isinstance(prior, ConjugatePrior):
        prior.validate(spec)
    to_z, log_jac = _transform(domain)
    c, s = prior.location(spec)
    if domain == "real":
        tc, ts = c, s
    else:
        dist = c if domain == "positive" else -c
        if dist <= 0:
            raise DomainError(f"prior center {c} lies outside the {domain} parameter domain")
        tc, ts = math.log(dist), min(s / dist, 3.0)
    W = cfg.domain_halfwidth_sigmas
    n = cfg.nodes_for(scheme)

    def log_prior_t(t):
        z = to_z(t)
        with np.errstate(all="ignore"):
            return prior.logpdf(spec, z) + log_jac(t)

    def log_post_t(t):
        return log_prior_t(t) + _loglik(spec, x, to_z(t), space)

    f = log_post_t if with_likelihood else log_prior_t
    def bracket(t):
        # with a posterior expectation, |g| * integrand must also be inside the interval
        v = f(t)
        if func is None:
            return v
        with np.errstate(all="ignore"):
            lg = np.log(np.abs(np.asarray(func(to_z(t)), float)))
        v = _clean(v)
        return np.logaddexp(v, v + _clean(lg))
    lo, hi = _support_interval(bracket, tc - W * ts, tc + W * ts, 0.5 * W * ts)
    t, lw = _trapezoid(f, lo, hi, n)
    log_norm = 0.0
    if not prior.normalized:
        plo, phi = _support_interval(log_prior_t, tc - W * ts, tc + W * ts, 0.5 * W * ts)
        _, plw = _trapezoid(log_prior_t, plo, phi, n)
        log_norm = float(logsumexp(plw))
    return to_z(t), lw, log_norm


def _stat(spec, y):
    return edm.check_observation(spec, y)


def _log_marginal_stat(spec, prior, x, cfg):
    _, lw, log_norm = _weighted_grid(spec, prior, x, cfg)
    lf = float(logsumexp(lw)) - log_norm
    if not np.isfinite(lf):
        raise QuadratureError(f"marginal density underflows at x={x}")
    return lf


# ----------------------------------------------------------------------------
# public operations

def log_marginal_density(spec: EdmSpec, prior: Prior, y: float, cfg: QuadratureConfig | None = None) -> float:
    """log f(y) = log int p(y | z) pi(z) dz.

    For the Gaussian variance family this is the density of x = y**2.
    """
    cfg = cfg or _DEFAULT_CFG
    x = float(_stat(spec, y))
    return _log_marginal_stat(spec, prior, x, cfg)


def marginal_density(spec: EdmSpec, prior: Prior, y: float, cfg: QuadratureConfig | None = None) -> float:
    """Marginal (prior predictive) density of the observation.

    Raises
    ------
    QuadratureError
        If the integrand mass is numerically zero.
    """
    val = math.exp(log_marginal_density(spec, prior, y, cfg))
    if val == 0.0:
        raise QuadratureError(f"marginal density underflows at y={y}")
    return val


def marginal_score(spec: EdmSpec, prior: Prior, y: float, cfg: QuadratureConfig | None = None) -> float:
    """Central-difference derivative of log f with respect to the sufficient statistic.

    The statistic is ``y`` itself except for the Gaussian variance family,
    where the derivative is taken with respect to ``x = y**2``. Discrete
    families have no derivative in the observation.
    """
    cfg = cfg or _DEFAULT_CFG
    if spec.discrete:
        raise UnsupportedOperation("marginal score in the observation is not defined for discrete families")
    x = float(_stat(spec, y))
    h = cfg.fd_step
    if spec.positive_mean and x - h <= 0:
        raise DomainError(f"statistic {x} too close to the support boundary for fd step {h}")
    up = _log_marginal_stat(spec, prior, x + h, cfg)
    dn = _log_marginal_stat(spec, prior, x - h, cfg)
    return (up - dn) / (2 * h)


def posterior_expectation(spec: EdmSpec, prior: Prior, y: float, func, cfg: QuadratureConfig | None = None) -> float:
    """E[func(z) | y] where z is the prior's own parameter (mean or natural)."""
    cfg = cfg or _DEFAULT_CFG
    x = float(_stat(spec, y))
    z, lw, _ = _weighted_grid(spec, prior, x, cfg, func=func)
    lf = logsumexp(lw)
    if not np.isfinite(lf):
        raise QuadratureError(f"posterior normalizer underflows at y={y}")
    p = np.exp(lw - lf)
    with np.errstate(all="ignore"):
        g = np.asarray(func(z), float)
    mask = p > 0
    return float(np.sum(p[mask] * g[mask]))


def posterior_mean_oracle(
    spec: EdmSpec,
    prior: Prior,
    y: float,
    cfg: QuadratureConfig | None = None,
    target: str = "mu",
) -> float:
    """Posterior mean of the mean (``target='mu'``) or natural parameter (``'theta'``)."""
    if target not in ("mu", "theta"):
        raise ConfigError(f"target must be 'mu' or 'theta', got {target!r}")
    if prior.space == "mean":
        g = (lambda z: z) if target == "mu" else (lambda z: _theta_of_mu(spec, z))
    else:
        g = (lambda z: _mu_of_theta(spec, z)) if target == "mu" else (lambda z: z)
    return posterior_expectation(spec, prior, y, g, cfg)
