"""
Batteries of identity checks against the quadrature oracle.

Each suite returns a list of :class:`~tweediescore.identities.IdentityReport`
records; ``verify-identities`` on the command line writes them out as JSON.
"""

from __future__ import annotations

import numpy as np

from . import edm, identities, quadrature
from .identities import IdentityId, IdentityReport
from .local_approx import PredictiveState, correction_forms
from .quadrature import ConjugatePrior, GaussianMixturePrior, GaussianPrior, QuadratureConfig

__all__ = ["SUITES", "ORACLE_TOL", "ANALYTIC_TOL", "run_suite",
           "gaussian_suite", "kalman_suite", "nef_natural_suite",
           "nef_expectation_suite", "parameter_space_suite"]

ORACLE_TOL = 1e-6
ANALYTIC_TOL = 1e-12

BIMODAL = GaussianMixturePrior(weights=(0.5, 0.5), means=(-2.0, 2.0), variances=(0.25, 0.25))


def _grid(center, sd, n=21, width=4.0):
    return center + sd * np.linspace(-width, width, n)


def gaussian_suite(cfg: QuadratureConfig | None = None, sigma2: float = 1.0):
    """Gaussian Tweedie formula against the posterior mean, two priors."""
    out = []
    spec = edm.gaussian_location(sigma2)
    for name, prior in (("N(0,1)", GaussianPrior(0.0, 1.0)), ("bimodal", BIMODAL)):
        w, m, v = (np.asarray(c, float) for c in zip(*prior.components()))
        mean = float(w @ m)
        marg_sd = float(np.sqrt(sigma2 + w @ (v + m * m) - mean * mean))
        for y in _grid(mean, marg_sd):
            score = quadrature.marginal_score(spec, prior, y, cfg)
            lhs = identities.tweedie_gaussian(y, sigma2, score)
            rhs = quadrature.posterior_mean_oracle(spec, prior, y, cfg, target="mu")
            out.append(IdentityReport(IdentityId.GAUSSIAN_TWEEDIE, lhs, rhs, ORACLE_TOL,
                                      f"prior={name} y={float(y)!r}"))
    return out


def kalman_forms(sigma2: float, delta: float, mu_pred: float, y: float, cfg=None):
    """Three versions of the discounted Gaussian update.

    Returns ``(tweedie, kalman, score_form)``: the Tweedie formula with the
    marginal score by quadrature under ``N(mu_pred, sigma2 / n)``, the Kalman
    gain update, and ``mu_pred + (1 - delta) I**-1 s``, with ``n = delta / (1 - delta)``.
    """
    spec = edm.gaussian_location(sigma2)
    n = delta / (1.0 - delta)
    P = sigma2 / n
    prior = GaussianPrior(mu_pred, P)
    tweedie = identities.tweedie_gaussian(y, sigma2, quadrature.marginal_score(spec, prior, y, cfg))
    kalman = mu_pred + P / (P + sigma2) * (y - mu_pred)
    score_form = mu_pred + (1.0 - delta) * float(edm.scaled_score(spec, y, mu_pred, d=1.0))
    return tweedie, kalman, score_form


def kalman_suite(cfg: QuadratureConfig | None = None, sigma2: float = 1.0, delta: float = 0.9,
                 mu_pred: float = 0.5):
    out = []
    P = sigma2 * (1.0 - delta) / delta
    for y in _grid(mu_pred, np.sqrt(P + sigma2)):
        tw, ka, sf = kalman_forms(sigma2, delta, mu_pred, y, cfg)
        out.append(IdentityReport(IdentityId.GAUSSIAN_TWEEDIE, tw, ka, ORACLE_TOL, f"tweedie~kalman y={float(y)!r}"))
        out.append(IdentityReport(IdentityId.GAUSSIAN_TWEEDIE, ka, sf, ANALYTIC_TOL, f"kalman~score y={float(y)!r}"))
    return out


def _positive_grid(mean, n=21):
    # roughly spans the bulk of a positive marginal
    return mean * np.exp(np.linspace(-2.0, 1.5, n))


def nef_natural_suite(cfg: QuadratureConfig | None = None):
    """Natural-parameter identity for the continuous families."""
    cases = [
        (edm.gaussian_location(4.0), GaussianPrior(0.0, 1.0), _grid(0.0, np.sqrt(5.0)), "sigma2=4 N(0,1)"),
        (edm.gaussian_location(1.0), GaussianPrior(0.0, 1.0, space="natural"), _grid(0.0, np.sqrt(2.0)),
         "sigma2=1 N(0,1) on theta"),
        (edm.gaussian_location(1.0), BIMODAL, _grid(0.0, np.sqrt(5.25)), "sigma2=1 bimodal"),
        (edm.gamma(0.5), ConjugatePrior(2.0, 2.0), _positive_grid(1.0), "gamma conj(2,2)"),
        (edm.gaussian_variance(), ConjugatePrior(3.0, 3.0), np.sqrt(_positive_grid(1.0)),
         "variance conj(3,3)"),
    ]
    out = []
    for spec, prior, ys, name in cases:
        for y in ys:
            score = quadrature.marginal_score(spec, prior, y, cfg)
            lhs = identities.tweedie_nef_natural(spec, y, score)
            rhs = quadrature.posterior_mean_oracle(spec, prior, y, cfg, target="theta")
            out.append(IdentityReport(IdentityId.NEF_NATURAL, lhs, rhs, ORACLE_TOL,
                                      f"{spec.family.value} {name} y={float(y)!r}"))
    return out


def nef_expectation_suite(cfg: QuadratureConfig | None = None):
    """Conjugate closed form against the oracle and against the general quadrature form."""
    cases = [
        (edm.poisson(), ConjugatePrior(2.0, 1.0), np.arange(0.0, 21.0), "poisson conj(2,1)"),
        (edm.gamma(0.5), ConjugatePrior(2.0, 2.0), _positive_grid(1.0), "gamma conj(2,2)"),
        (edm.gaussian_location(1.0), ConjugatePrior(0.0, 1.0), _grid(0.0, np.sqrt(2.0)), "normal conj(0,1)"),
    ]
    out = []
    for spec, prior, ys, name in cases:
        for y in ys:
            closed = identities.nef_expectation_posterior(prior, spec, y, cfg)
            oracle = quadrature.posterior_mean_oracle(spec, prior, y, cfg, target="mu")
            general = identities.nef_expectation_posterior(prior, spec, y, cfg, method="quadrature")
            label = f"{spec.family.value} {name} y={float(y)!r}"
            out.append(IdentityReport(IdentityId.NEF_EXPECTATION, closed, oracle, ORACLE_TOL, label + " oracle"))
            out.append(IdentityReport(IdentityId.NEF_EXPECTATION, closed, general, ORACLE_TOL, label + " general"))
    return out


PARAMETER_SPACE_CASES = (
    (edm.gaussian_location(1.0), (-1.0, 0.0, 2.0), (-1.0, 0.5, 3.0)),
    (edm.poisson(), (1.0, 3.0), (1.0, 2.0, 5.0)),
    (edm.gamma(0.5), (1.0, 3.0), (0.5, 1.0, 4.0)),
    (edm.gaussian_variance(), (1.0, 3.0), (0.5, 1.5, 3.0)),
)
PARAMETER_SPACE_P = (0.01, 0.1, 0.5)


def parameter_space_suite(cfg: QuadratureConfig | None = None):
    """Mean shift versus scaled marginal score in the predictive mean, N(a, P) predictive law."""
    out = []
    for spec, a_grid, y_grid in PARAMETER_SPACE_CASES:
        for a in a_grid:
            for y in y_grid:
                for P in PARAMETER_SPACE_P:
                    shift, score_form = correction_forms(spec, PredictiveState(a, P), y, cfg)
                    out.append(IdentityReport(IdentityId.PARAMETER_SPACE, shift, score_form, ORACLE_TOL,
                                              f"{spec.family.value} a={a!r} y={float(y)!r} P={P!r}"))
    return out


SUITES = {
    "gaussian": lambda cfg: gaussian_suite(cfg) + kalman_suite(cfg),
    "nef-natural": nef_natural_suite,
    "nef-expectation": nef_expectation_suite,
    "parameter-space": parameter_space_suite,
}


def run_suite(name: str, cfg: QuadratureConfig | None = None):
    """Run one suite by name, or every suite for ``'all'``."""
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](cfg)]
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](cfg)
