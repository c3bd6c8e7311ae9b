"""
Observation-driven score recursions.

    theta_{t+1} = omega + beta * theta_t + alpha * S_t * s_t,   S_t = I_t**(-d)

``theta`` lives on the link scale (``mu`` for the identity link, ``log mu`` for
the log link) and the score and information are taken with respect to it.
With ``d = 1`` and the identity link the scaled score is the innovation
``x_t - mu_t``, so the Gaussian variance recursion is GARCH(1,1) with
``alpha_G = alpha`` and ``beta_G = beta - alpha``.

The likelihood is the prediction-error decomposition ``sum_t log p(x_t | mu_t)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import edm
from .edm import EdmSpec
from .errors import DomainError

__all__ = [
    "RecursionParams",
    "FilterTrace",
    "FitResult",
    "POSITIVITY_FLOOR",
    "SCALING_PRESETS",
    "recursion_step",
    "run_recursion",
    "garch_map",
    "garch_unmap",
    "garch_recursion",
    "scaled_score_variance",
    "fit_params",
]

logger = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-10
SCALING_PRESETS = {"fisher": 1.0, "sqrt-fisher": 0.5, "none": 0.0}


@dataclass(frozen=True)
class RecursionParams:
    """Coefficients of the score recursion.

    ``theta1`` is the first predictive parameter on the link scale; ``None``
    means ``omega / (1 - beta)`` when ``|beta| < 1`` and otherwise the value
    implied by the first observation.

    ``alpha`` is not tied to a discount factor. With ``omega=0, beta=1, d=1``
    it plays the part of the posterior learning rate ``1 - delta``; reading it
    as the predictive scale ``(1 - delta) / delta`` is equally valid.
    """

    omega: float
    beta: float
    alpha: float
    d: float = 1.0
    link: str = "identity"
    theta1: float | None = None

    def __post_init__(self):
        if self.link not in edm.LINKS:
            raise DomainError(f"link must be one of {edm.LINKS}, got {self.link!r}")
        for name in ("omega", "beta", "alpha", "d"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.beta, self.alpha])

    @property
    def stationary(self) -> bool:
        """|beta| < 1; for the variance model this is alpha_G + beta_G < 1."""
        return abs(self.beta) < 1.0


def _check_region(spec: EdmSpec, params: RecursionParams):
    """Nonnegativity region for identity-link positive models."""
    if spec.positive_mean and params.link == "identity":
        if not (params.omega > 0 and params.alpha >= 0 and params.beta >= params.alpha):
            raise DomainError(
                "identity-link positive models need omega > 0, alpha >= 0 and beta >= alpha"
            )


def _mean_of(params, theta):
    return math.exp(theta) if params.link == "log" else theta


def scaled_score_variance(fisher, d: float):
    """Conditional variance of I**(-d) * s, which is I**(1 - 2d)."""
    return np.asarray(fisher, float) ** (1.0 - 2.0 * d)


def _kernel(spec, params):
    """Scalar update with plain floats; same operation order as the edm calculus."""
    phi, p, d = spec.dispersion, spec.tweedie_index, params.d
    omega, beta, alpha = params.omega, params.beta, params.alpha
    log_link = params.link == "log"
    floor = spec.positive_mean and not log_link

    def step(theta, x):
        mu = math.exp(theta) if log_link else theta
        inv = phi if p == 0.0 else (phi * mu if p == 1.0 else phi * (mu * mu))
        s = (x - mu) / inv
        if log_link:
            s = mu * s
            inv = 1.0 / (mu * mu * (1.0 / inv))
        S = inv ** d
        scaled = S * s
        nxt = omega + beta * theta + alpha * scaled
        floored = False
        if floor and not nxt > POSITIVITY_FLOOR:
            nxt, floored = POSITIVITY_FLOOR, True
        return nxt, floored, mu, s, S, scaled, inv

    return step


def recursion_step(spec: EdmSpec, params: RecursionParams, theta_t: float, y_t: float) -> float:
    """One update of the link-scale parameter.

    Identity-link positive models floor the result at ``POSITIVITY_FLOOR``;
    :func:`run_recursion` reports which steps were floored.
    """
    mu = _mean_of(params, float(theta_t))
    edm.variance_function(spec, mu)  # mean-domain check
    x = float(edm.check_observation(spec, y_t))
    return _kernel(spec, params)(float(theta_t), x)[0]


def _initial_theta(spec, params, y1):
    if params.theta1 is not None:
        theta = float(params.theta1)
    elif params.stationary:
        theta = params.omega / (1.0 - params.beta)
    else:
        x1 = float(edm.sufficient_statistic(spec, y1))
        if params.link == "log":
            return math.log(max(x1, POSITIVITY_FLOOR))
        return max(x1, POSITIVITY_FLOOR) if spec.positive_mean else x1
    if spec.positive_mean and params.link == "identity" and not theta > 0:
        raise DomainError(f"initial parameter {theta} is outside the mean domain")
    return theta


@dataclass
class FilterTrace:
    """Per-step record of a score recursion run."""

    y: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    score: np.ndarray
    scaling: np.ndarray
    scaled_score: np.ndarray
    innovation: np.ndarray
    loglik_t: np.ndarray
    theta_next: np.ndarray
    floored: np.ndarray
    score_var: np.ndarray
    params: RecursionParams | None = None

    def __len__(self):
        return len(self.y)

    @property
    def loglik(self) -> float:
        return float(np.sum(self.loglik_t))

    def rows(self):
        for i in range(len(self.y)):
            yield (i + 1, self.y[i], self.theta[i], self.mu[i], self.score[i], self.scaling[i],
                   self.scaled_score[i], self.innovation[i], self.score_var[i],
                   self.loglik_t[i], self.theta_next[i], int(self.floored[i]))


TRACE_COLUMNS = ("t", "y", "theta", "mu", "score", "scaling", "scaled_score",
                 "innovation", "score_var", "loglik", "theta_next", "floored")


def _first_bad(spec, y, strict):
    for i, v in enumerate(y):
        try:
            edm.check_observation(spec, v, strict=strict)
        except DomainError as exc:
            return i, exc
    return None, None


def _validated_statistic(spec, y):
    try:
        return np.asarray(edm.check_observation(spec, y, strict=True), float)
    except DomainError:
        i, exc = _first_bad(spec, y, True)
        raise DomainError(f"step {i + 1}: {exc}") from None


def _loglik_terms(spec, x, mu):
    with np.errstate(all="ignore"):
        ll = np.asarray(edm._logpdf_stat(spec, x, mu), float)
    bad = ~np.isfinite(ll)
    if bad.any():
        raise DomainError(f"step {int(np.argmax(bad)) + 1}: non-finite log density")
    return ll


def _theta_path(spec, params, x, theta):
    step = _kernel(spec, params)
    T = x.size
    out = np.empty((7, T))
    floored = np.zeros(T, dtype=bool)
    for t in range(T):
        try:
            nxt, fl, mu, s, S, scaled, inv = step(theta, float(x[t]))
        except (OverflowError, ZeroDivisionError) as exc:
            raise DomainError(f"step {t + 1}: {exc}") from None
        out[:, t] = (theta, mu, s, S, scaled, inv, nxt)
        floored[t] = fl
        theta = nxt
    return out, floored


def run_recursion(spec: EdmSpec, params: RecursionParams, y_series) -> FilterTrace:
    """Filter a series and evaluate the log-likelihood at the predictive parameters.

    Raises
    ------
    DomainError
        On an observation outside the support or a non-finite log density,
        naming the step.
    """
    y = np.asarray(y_series, float).ravel()
    if y.size == 0:
        raise DomainError("empty series")
    _check_region(spec, params)
    x = _validated_statistic(spec, y)
    path, floored = _theta_path(spec, params, x, _initial_theta(spec, params, y[0]))
    theta, mu, s, S, scaled, inv, nxt = path
    ll = _loglik_terms(spec, x, mu)
    if floored.any():
        logger.warning("positivity floor applied at %d steps", int(floored.sum()))
    return FilterTrace(y=y, theta=theta, mu=mu, score=s, scaling=S, scaled_score=scaled,
                       innovation=inv * s, loglik_t=ll, theta_next=nxt, floored=floored,
                       score_var=scaled_score_variance(1.0 / inv, params.d), params=params)


def _negloglik(spec, params, x, y1):
    """Negative log-likelihood for fitting; inf where the recursion breaks down."""
    try:
        _check_region(spec, params)
        path, _ = _theta_path(spec, params, x, _initial_theta(spec, params, y1))
        ll = float(np.sum(_loglik_terms(spec, x, path[1])))
    except DomainError:
        return np.inf
    return -ll if math.isfinite(ll) else np.inf


# ----------------------------------------------------------------------------
# GARCH(1,1) correspondence

def garch_map(omega: float, beta: float, alpha: float):
    """Score-recursion coefficients to GARCH ``(omega_G, alpha_G, beta_G)``."""
    if not (omega > 0 and alpha >= 0 and beta >= alpha):
        warnings.warn("coefficients outside the nonnegative GARCH region", RuntimeWarning, stacklevel=2)
    return omega, alpha, beta - alpha


def garch_unmap(omega_g: float, alpha_g: float, beta_g: float):
    """Inverse of :func:`garch_map`; returns ``(omega, beta, alpha)``."""
    return omega_g, beta_g + alpha_g, alpha_g


def garch_recursion(omega_g: float, alpha_g: float, beta_g: float, y_series, h1: float) -> np.ndarray:
    """Textbook ``h_{t+1} = omega_G + alpha_G y_t**2 + beta_G h_t``; returns h_1..h_{T+1}."""
    y = np.asarray(y_series, float)
    h = np.empty(y.size + 1)
    h[0] = h1
    for t in range(y.size):
        h[t + 1] = omega_g + alpha_g * y[t] * y[t] + beta_g * h[t]
    return h


# ----------------------------------------------------------------------------
# fitting

@dataclass
class FitResult:
    params: RecursionParams
    loglik: float
    converged: bool
    n_starts: int
    history: list = field(default_factory=list)


def _default_bounds(spec, link):
    if spec.positive_mean and link == "identity":
        return [(1e-8, None), (0.0, 0.9999), (0.0, 1.0)]
    return [(None, None), (-0.9999, 0.9999), (-5.0, 5.0)]


def fit_params(
    spec: EdmSpec,
    y_series,
    link: str = "identity",
    d: float = 1.0,
    init: RecursionParams | None = None,
    bounds=None,
    restarts: int = 3,
    seed: int = 0,
    maxiter: int = 4000,
) -> FitResult:
    """Maximize the prediction-error log-likelihood over ``(omega, beta, alpha)``.

    Bounded Nelder-Mead from ``init`` plus ``restarts`` random starts drawn
    inside the bounds with a fixed seed. Points outside the nonnegativity
    region (identity link, positive mean) get log-likelihood ``-inf``. If no start
    converges the best point found is returned with ``converged=False``.
    """
    y = np.asarray(y_series, float).ravel()
    if y.size < 20:
        raise DomainError("fitting needs at least 20 observations")
    x = _validated_statistic(spec, y)
    if init is None:
        level = float(np.mean(x))
        if link == "log":
            level = math.log(level) if level > 0 else 0.0
        init = RecursionParams(omega=0.1 * level if level else 0.01, beta=0.9, alpha=0.05, d=d, link=link)
    else:
        init = replace(init, d=d, link=link)
    if bounds is None:
        bounds = _default_bounds(spec, link)
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], float)
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], float)
    x0 = np.clip(init.as_array(), lo, hi)

    def negll(v):
        p = replace(init, omega=float(v[0]), beta=float(v[1]), alpha=float(v[2]))
        return _negloglik(spec, p, x, y[0])

    rng = np.random.Generator(np.random.Philox(seed))
    starts = [x0]
    for _ in range(restarts):
        # perturb the initial point, staying inside the box
        width = np.where(np.isfinite(hi - lo), 0.25 * (hi - lo), 0.5 * np.maximum(np.abs(x0), 0.1))
        starts.append(np.clip(x0 + width * rng.uniform(-1, 1, size=3), lo, hi))

    best, history = None, []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for s0 in starts:
            res = optimize.minimize(negll, s0, method="Nelder-Mead", bounds=bounds,
                                    options={"maxiter": maxiter, "xatol": 1e-7, "fatol": 1e-9})
            history.append((res.x.tolist(), float(-res.fun), bool(res.success)))
            if best is None or res.fun < best.fun:
                best = res
    params = replace(init, omega=float(best.x[0]), beta=float(best.x[1]), alpha=float(best.x[2]))
    return FitResult(params, float(-best.fun), bool(best.success) and math.isfinite(best.fun),
                     len(starts), history)
