"""
Local score approximations to the Bayesian posterior correction.

For a Gaussian predictive law ``mu ~ N(a, P)`` the exact correction satisfies

    E[mu | y] - a = P * d/da log f(y; a, P)

and the conditional score gives its leading term, ``P * s(a) + O(P**2)``.
When the predictive precision is a discounted filtered precision,
``P = kappa * I(a)**-1`` with ``kappa = (1 - delta) / delta``, while the
filtered covariance is ``(1 - delta) * I(a)**-1``.

Exact corrections are computed by quadrature (see :mod:`tweediescore.quadrature`).
For positive-mean families the likelihood is treated as zero for ``mu <= 0``;
calls whose posterior mass sits near that boundary are rejected because the
small-variance expansion no longer describes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import edm, quadrature
from .edm import EdmSpec
from .errors import DomainError, QuadratureError
from .quadrature import GaussianPrior, QuadratureConfig

__all__ = [
    "PredictiveState",
    "ExpansionStudy",
    "DiscountStudy",
    "exact_correction",
    "correction_forms",
    "leading_correction",
    "expansion_order_study",
    "info_matched_covariance",
    "filtered_precision",
    "scale_reconciliation",
    "discount_expansion_study",
]

BOUNDARY_MASS_TOL = 1e-10
FORM_AGREEMENT_TOL = 1e-6
UNDERFLOW = 1e-13


@dataclass(frozen=True)
class PredictiveState:
    """Predictive mean ``a`` and variance ``P`` of the latent mean parameter."""

    a: float
    P: float

    def __post_init__(self):
        if not (self.P > 0 and math.isfinite(self.P)):
            raise DomainError(f"predictive variance must be positive, got {self.P}")
        if not math.isfinite(self.a):
            raise DomainError("predictive mean must be finite")


@dataclass
class ExpansionStudy:
    P_grid: np.ndarray
    errors: np.ndarray
    fitted_slope: float
    intercept: float
    dropped: list = field(default_factory=list)


@dataclass
class DiscountStudy:
    deltas: np.ndarray
    kappas: np.ndarray
    errors: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        """errors / kappa**2; roughly constant when the remainder is O(kappa**2)."""
        return self.errors / self.kappas ** 2


def _prior(pred: PredictiveState) -> GaussianPrior:
    return GaussianPrior(pred.a, pred.P, space="mean")


def _check_boundary(spec, pred, y, cfg):
    if not spec.positive_mean:
        return
    if pred.a <= 0:
        raise DomainError(f"predictive mean {pred.a} is outside the mean domain")
    cut = max(1e-8, pred.a - 12.0 * math.sqrt(pred.P))
    mass = quadrature.posterior_expectation(
        spec, _prior(pred), y, lambda z: (z < cut).astype(float), cfg
    )
    if mass >= BOUNDARY_MASS_TOL:
        raise DomainError(
            f"posterior mass {mass:.3g} below {cut:.3g}: P={pred.P} is too large for a={pred.a}"
        )


def correction_forms(spec: EdmSpec, pred: PredictiveState, y: float, cfg: QuadratureConfig | None = None):
    """Return ``(mean_shift, score_form)``.

    ``mean_shift`` is ``E[mu | y] - a`` and ``score_form`` is ``P`` times a
    central difference of ``log f`` in ``a``.
    """
    _check_boundary(spec, pred, y, cfg)
    shift = quadrature.posterior_mean_oracle(spec, _prior(pred), y, cfg, target="mu") - pred.a
    h = min(1e-5, math.sqrt(pred.P) * 1e-3)
    up = quadrature.log_marginal_density(spec, GaussianPrior(pred.a + h, pred.P), y, cfg)
    dn = quadrature.log_marginal_density(spec, GaussianPrior(pred.a - h, pred.P), y, cfg)
    return shift, pred.P * (up - dn) / (2 * h)


def exact_correction(spec: EdmSpec, pred: PredictiveState, y: float, cfg: QuadratureConfig | None = None,
                     tol: float = FORM_AGREEMENT_TOL) -> float:
    """Exact posterior correction ``E[mu | y] - a`` under ``mu ~ N(a, P)``.

    Raises
    ------
    QuadratureError
        If the mean-shift and marginal-score forms differ by more than ``tol``.
    """
    shift, score_form = correction_forms(spec, pred, y, cfg)
    if abs(shift - score_form) > tol:
        raise QuadratureError(f"correction forms disagree: {shift!r} vs {score_form!r}")
    return shift


def leading_correction(spec: EdmSpec, pred: PredictiveState, y: float) -> float:
    """P * s(a), the conditional-score approximation."""
    return pred.P * float(edm.score_mean(spec, y, pred.a))


def _fit_loglog(P, err):
    slope, intercept = np.polyfit(np.log(P), np.log(err), 1)
    return float(slope), float(intercept)


def expansion_order_study(spec: EdmSpec, a: float, y: float, P_grid, cfg: QuadratureConfig | None = None) -> ExpansionStudy:
    """Fit the order of ``|exact - leading|`` in ``P`` on a log-log scale."""
    P_grid = np.asarray(P_grid, float)
    if P_grid.ndim != 1 or P_grid.size < 2:
        raise DomainError("P_grid needs at least two values")
    if np.any(np.diff(P_grid) >= 0):
        raise DomainError("P_grid must be strictly decreasing")
    if P_grid[-1] < 1e-5:
        raise DomainError("P_grid values below 1e-5 are beyond quadrature resolution")
    errors = np.empty_like(P_grid)
    for i, P in enumerate(P_grid):
        pred = PredictiveState(a, P)
        errors[i] = abs(exact_correction(spec, pred, y, cfg) - leading_correction(spec, pred, y))
    keep = errors >= UNDERFLOW
    dropped = [float(p) for p in P_grid[~keep]]
    if keep.sum() < 2:
        raise QuadratureError("fewer than two grid points above the underflow floor")
    slope, intercept = _fit_loglog(P_grid[keep], errors[keep])
    return ExpansionStudy(P_grid[keep], errors[keep], slope, intercept, dropped)


def info_matched_covariance(spec: EdmSpec, a: float, delta: float) -> float:
    """Predictive covariance ((1 - delta) / delta) * I(a)**-1."""
    kappa, _ = scale_reconciliation(delta)
    return kappa * float(edm.inverse_fisher_mean(spec, a))


def filtered_precision(P_pred: float, fisher_at_a: float) -> float:
    """Filtered covariance from P_filt**-1 = P_pred**-1 + I(a)."""
    if not (P_pred > 0 and fisher_at_a > 0):
        raise DomainError("covariance and information must be positive")
    return 1.0 / (1.0 / P_pred + fisher_at_a)


def scale_reconciliation(delta):
    """Return ``(kappa, learning_rate)`` with ``kappa = (1-delta)/delta``.

    Accepts floats or :class:`fractions.Fraction`; with fractions the identity
    ``1 - delta == kappa / (1 + kappa)`` is checked exactly.
    """
    if not (0 < delta < 1):
        raise DomainError(f"discount factor must lie in (0, 1), got {delta}")
    kappa = (1 - delta) / delta
    rate = 1 - delta
    gap = abs(rate - kappa / (1 + kappa))
    if gap > (0 if isinstance(delta, Fraction) else 1e-15):
        raise ArithmeticError(f"scale reconciliation off by {gap}")
    return kappa, rate


def discount_expansion_study(spec: EdmSpec, a: float, y: float, deltas, cfg: QuadratureConfig | None = None) -> DiscountStudy:
    """Error of the kappa * I**-1 * s approximation when P is information-matched."""
    deltas = np.asarray(deltas, float)
    kappas = (1 - deltas) / deltas
    errors = np.empty_like(deltas)
    step = float(edm.scaled_score(spec, y, a, d=1.0))
    for i, d in enumerate(deltas):
        P = info_matched_covariance(spec, a, d)
        exact = exact_correction(spec, PredictiveState(a, P), y, cfg)
        errors[i] = abs(exact - kappas[i] * step)
    return DiscountStudy(deltas, kappas, errors)
