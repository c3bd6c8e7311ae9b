import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats

from tweediescore import edm
from tweediescore.errors import DomainError
from tweediescore.local_approx import (PredictiveState, discount_expansion_study, exact_correction,
                                       expansion_order_study, filtered_precision, info_matched_covariance,
                                       leading_correction, scale_reconciliation)

GRID = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
G1 = edm.gaussian_location(1.0)


def test_exact_correction_gaussian_is_kalman_gain():
    assert exact_correction(G1, PredictiveState(0.0, 0.1), 1.0) == pytest.approx(1 / 11, abs=1e-10)
    assert exact_correction(G1, PredictiveState(0.7, 0.3), 0.7) == pytest.approx(0.0, abs=1e-10)


def test_exact_correction_poisson_against_direct_integration():
    a, P, y = 2.0, 0.05, 3
    prior = stats.norm(a, math.sqrt(P))
    num = integrate.quad(lambda m: m * stats.poisson(m).pmf(y) * prior.pdf(m), 0, 6, epsabs=0, epsrel=1e-13)[0]
    den = integrate.quad(lambda m: stats.poisson(m).pmf(y) * prior.pdf(m), 0, 6, epsabs=0, epsrel=1e-13)[0]
    assert exact_correction(edm.poisson(), PredictiveState(a, P), y) == pytest.approx(num / den - a, abs=1e-9)


def test_leading_correction_examples():
    assert leading_correction(G1, PredictiveState(0.0, 0.1), 1.0) == pytest.approx(0.1, rel=1e-15)
    assert leading_correction(edm.poisson(), PredictiveState(2.0, 0.05), 3) == pytest.approx(0.025, rel=1e-15)
    assert leading_correction(edm.gamma(0.5), PredictiveState(1.3, 0.05), 1.3) == 0.0


def test_gaussian_expansion_error_closed_form():
    study = expansion_order_study(G1, 0.0, 1.0, GRID)
    P = np.asarray(GRID)
    np.testing.assert_allclose(study.errors, P ** 2 / (P + 1.0), atol=1e-8, rtol=0)
    fine = expansion_order_study(G1, 0.0, 1.0, [1e-2, 3e-3, 1e-3])
    assert abs(fine.fitted_slope - 2.0) < 0.02


@pytest.mark.xfail(strict=True, reason="at y = a + 1 the P**2 coefficient of the Poisson expansion is zero, "
                                       "so the error is O(P**3)")
def test_poisson_expansion_order_at_a2_y3():
    study = expansion_order_study(edm.poisson(), 2.0, 3, GRID)
    assert 1.8 <= study.fitted_slope <= 2.2


def test_poisson_second_order_coefficient_vanishes_at_a2_y3():
    # P**2 term is s * l'' + l'''/2 with l = y log mu - mu
    a, y = 2.0, 3.0
    s, l2, l3 = y / a - 1, -y / a ** 2, 2 * y / a ** 3
    assert s * l2 + 0.5 * l3 == 0.0
    study = expansion_order_study(edm.poisson(), a, y, GRID)
    assert 2.8 <= study.fitted_slope <= 3.2


def test_gamma_expansion_order():
    study = expansion_order_study(edm.gamma(0.5), 1.0, 2.0, GRID)
    assert 1.8 <= study.fitted_slope <= 2.2


@pytest.mark.parametrize("spec,a,y", [
    (edm.gaussian_location(1.0), 0.0, 1.0),
    (edm.gaussian_location(2.5), 1.0, -0.5),
    (edm.poisson(), 2.0, 5.0),
    (edm.poisson(), 4.0, 2.0),
    (edm.gamma(0.5), 1.0, 2.0),
    (edm.gamma(0.25), 2.0, 1.0),
    (edm.gaussian_variance(), 1.0, 2.5),
])
def test_expansion_order_interior_pairs(spec, a, y):
    assert 1.8 <= expansion_order_study(spec, a, y, GRID).fitted_slope <= 2.2


def test_grid_validation():
    with pytest.raises(DomainError):
        expansion_order_study(G1, 0.0, 1.0, [1e-3, 1e-2])
    with pytest.raises(DomainError):
        expansion_order_study(G1, 0.0, 1.0, [1e-2, 1e-6])


def test_boundary_guard_rejects_mass_near_zero():
    with pytest.raises(DomainError):
        exact_correction(edm.poisson(), PredictiveState(0.5, 0.5), 0)


def test_info_matched_covariance_examples():
    assert info_matched_covariance(edm.gaussian_location(0.25), 0.0, 0.8) == pytest.approx(0.0625, rel=1e-15)
    assert info_matched_covariance(edm.gaussian_location(1.0), 0.0, 0.5) == 1.0
    assert info_matched_covariance(edm.poisson(), 2.0, 0.9) == pytest.approx(2 / 9, rel=1e-15)


def test_filtered_precision_examples():
    assert filtered_precision(0.25, 4.0) == 0.125
    assert filtered_precision(1e12, 4.0) == pytest.approx(0.25, rel=1e-12)
    for delta in (0.5, 0.75, 0.9):
        inv_i = float(edm.inverse_fisher_mean(edm.poisson(), 2.0))
        P = info_matched_covariance(edm.poisson(), 2.0, delta)
        assert filtered_precision(P, 1 / inv_i) == pytest.approx((1 - delta) * inv_i, rel=1e-15)


def test_scale_reconciliation_examples():
    k, r = scale_reconciliation(0.9)
    assert k == pytest.approx(1 / 9, rel=1e-15) and r == pytest.approx(0.1, rel=1e-15)
    assert scale_reconciliation(0.5) == (1.0, 0.5)
    k, r = scale_reconciliation(0.99)
    assert k == pytest.approx(0.010101010101, rel=1e-10) and r == pytest.approx(0.01, rel=1e-13)


@pytest.mark.parametrize("delta", [Fraction(1, 2), Fraction(3, 4), Fraction(9, 10)])
def test_scale_reconciliation_exact_on_rationals(delta):
    k, r = scale_reconciliation(delta)
    assert r == k / (1 + k)
    assert isinstance(k, Fraction)


def test_discount_study_ratio_reports_kappa_squared_scaling():
    study = discount_expansion_study(G1, 0.0, 1.0, [0.9, 0.99])
    np.testing.assert_allclose(study.kappas, [1 / 9, 1 / 99], rtol=1e-14)
    assert study.ratios[1] == pytest.approx(study.ratios[0], rel=0.5)
