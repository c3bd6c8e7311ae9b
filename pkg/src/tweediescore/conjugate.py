"""
Exact conjugate filtering in expectation space under precision discounting.

With a conjugate predictive prior ``exp{tau theta - n psi(theta)}`` the update
after observing statistic ``x`` is ``(tau + x, n + 1)``. Discounting the
filtered strength, ``n_pred = delta * n_filt``, has the fixed point
``n_pred = delta / (1 - delta)``, where the posterior mean update becomes

    mu_filt = mu_pred + (1 - delta) * I(mu_pred)**-1 * score(x; mu_pred)
            = mu_pred + (1 - delta) * (x - mu_pred).

No transition dynamics are applied between steps: the predictive mean at
``t + 1`` is the filtered mean at ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import edm
from .edm import EdmSpec
from .errors import DomainError

__all__ = [
    "ConjugateState",
    "ConjugateTrace",
    "conjugate_update",
    "discount_precision",
    "steady_strength",
    "filter_step_score_form",
    "run_conjugate_filter",
    "default_init",
]


@dataclass(frozen=True)
class ConjugateState:
    """Conjugate hyperparameters; ``mean`` is the implied E[mu] = tau / n."""

    tau: float
    n: float

    def __post_init__(self):
        if not (self.n > 0 and math.isfinite(self.n)):
            raise DomainError(f"prior strength n must be positive, got {self.n}")
        if not math.isfinite(self.tau):
            raise DomainError("tau must be finite")

    @property
    def mean(self) -> float:
        return self.tau / self.n


def _check_delta(delta):
    if not (0.0 < delta < 1.0):
        raise DomainError(f"discount factor must lie in (0, 1), got {delta}")


def steady_strength(delta: float) -> float:
    """Fixed point delta / (1 - delta) of the discounted prior strength."""
    _check_delta(delta)
    return delta / (1.0 - delta)


def conjugate_update(state: ConjugateState, x: float) -> ConjugateState:
    """Add one observation. ``x`` is the sufficient statistic (``y**2`` for variances)."""
    if not math.isfinite(x):
        raise DomainError("observation must be finite")
    return ConjugateState(state.tau + x, state.n + 1.0)


def discount_precision(n_filtered: float, delta: float) -> float:
    _check_delta(delta)
    if not n_filtered > 0:
        raise DomainError("prior strength must be positive")
    return delta * n_filtered


def filter_step_score_form(spec: EdmSpec, mu_pred: float, y: float, delta: float) -> float:
    """One filtering step written as an inverse-Fisher-scaled score correction."""
    _check_delta(delta)
    mu = mu_pred + (1.0 - delta) * float(edm.scaled_score(spec, y, mu_pred, d=1.0))
    if spec.positive_mean and not mu > 0:
        raise DomainError(f"filtered mean {mu} left the mean domain")
    return mu


def default_init(spec: EdmSpec, y_series, delta: float, mu0: float | None = None) -> ConjugateState:
    """Fixed-point strength with ``tau = n * mu0``; ``mu0`` defaults to the mean statistic."""
    n = steady_strength(delta)
    if mu0 is None:
        mu0 = float(np.mean(edm.check_observation(spec, y_series)))
    if spec.positive_mean and not mu0 > 0:
        raise DomainError(f"initial mean {mu0} is outside the mean domain")
    return ConjugateState(n * mu0, n)


@dataclass
class ConjugateTrace:
    """Per-step record of a conjugate filter run (arrays of equal length)."""

    y: np.ndarray
    x: np.ndarray
    mu_pred: np.ndarray
    n_pred: np.ndarray
    mu_filt: np.ndarray
    mu_filt_score: np.ndarray
    tau: np.ndarray
    n: np.ndarray
    score: np.ndarray
    innovation: np.ndarray
    delta: float
    squared: bool

    def __len__(self):
        return len(self.y)

    @property
    def max_form_gap(self) -> float:
        """Largest |mu_filt - mu_filt_score| over the run."""
        return float(np.max(np.abs(self.mu_filt - self.mu_filt_score)))

    def rows(self):
        """Rows for the ``t,y,mu_pred,mu_filt,tau,n,score,innovation`` table."""
        for i in range(len(self.y)):
            yield (i + 1, self.y[i], self.mu_pred[i], self.mu_filt[i], self.tau[i],
                   self.n[i], self.score[i], self.innovation[i])


TRACE_COLUMNS = ("t", "y", "mu_pred", "mu_filt", "tau", "n", "score", "innovation")


def run_conjugate_filter(
    spec: EdmSpec,
    y_series,
    delta: float,
    init: ConjugateState | None = None,
    check_tol: float | None = None,
) -> ConjugateTrace:
    """Run discount -> predict -> update over a series.

    ``init`` is the predictive prior for the first observation (default
    :func:`default_init`). Both the (tau, n) posterior mean and the score-form
    mean are recorded; when ``check_tol`` is given and the predictive strength
    sits at its fixed point, a disagreement larger than ``check_tol`` raises.

    Raises
    ------
    DomainError
        At the first observation outside the support, naming the step.
    """
    _check_delta(delta)
    y = np.asarray(y_series, dtype=float).ravel()
    if y.size == 0:
        raise DomainError("empty series")
    try:
        x = np.asarray(edm.check_observation(spec, y), float)
    except DomainError:
        for i, v in enumerate(y):
            try:
                edm.check_observation(spec, v)
            except DomainError as exc:
                raise DomainError(f"step {i + 1}: {exc}") from None
        raise
    if init is None:
        init = default_init(spec, y, delta)
    if spec.positive_mean and not init.mean > 0:
        raise DomainError(f"initial mean {init.mean} is outside the mean domain")

    T = y.size
    tau_pred, n_pred = np.empty(T), np.empty(T)
    tau_f, n_f = np.empty(T), np.empty(T)
    tau, n = float(init.tau), float(init.n)
    for t in range(T):
        tau_pred[t], n_pred[t] = tau, n
        # update, then discount: the mean is kept and tau scales with n
        tau, n = tau + float(x[t]), n + 1.0
        tau_f[t], n_f[t] = tau, n
        tau, n = delta * tau, delta * n

    mu_pred = tau_pred / n_pred
    innovation = np.asarray(edm.scaled_score(spec, y, mu_pred, d=1.0), float)
    out = {
        "mu_pred": mu_pred,
        "n_pred": n_pred,
        "mu_filt": tau_f / n_f,
        "mu_filt_score": mu_pred + (1.0 - delta) * innovation,
        "tau": tau_f,
        "n": n_f,
        "score": np.asarray(edm.score_mean(spec, y, mu_pred), float),
        "innovation": innovation,
    }
    if spec.positive_mean and not np.all(out["mu_filt_score"] > 0):
        i = int(np.argmax(~(out["mu_filt_score"] > 0)))
        raise DomainError(f"step {i + 1}: filtered mean left the mean domain")
    if check_tol is not None:
        n_star = steady_strength(delta)
        at_fixed = np.abs(n_pred - n_star) <= 1e-10 * n_star
        gap = np.where(at_fixed, np.abs(out["mu_filt"] - out["mu_filt_score"]), 0.0)
        if np.any(gap > check_tol):
            i = int(np.argmax(gap > check_tol))
            raise ArithmeticError(f"step {i + 1}: conjugate and score forms differ by {gap[i]:g}")
    return ConjugateTrace(y=y, x=x, delta=delta,
                          squared=spec.family is edm.Family.GAUSSIAN_VARIANCE, **out)
