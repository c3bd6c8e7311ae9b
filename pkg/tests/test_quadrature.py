import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from tweediescore import edm, quadrature as q
from tweediescore.errors import ConfigError, UnsupportedOperation
from tweediescore.quadrature import (ConjugatePrior, CustomPrior, GaussianMixturePrior, GaussianPrior,
                                     QuadratureConfig)

G1 = edm.gaussian_location(1.0)
STD = GaussianPrior(0.0, 1.0)
BIMODAL = GaussianMixturePrior((0.5, 0.5), (-2.0, 2.0), (0.25, 0.25))


def _mixture_marginal_score(y):
    # likelihood N(0, 1) convolved with each component gives N(m, 1.25)
    comps = [(0.5, -2.0, 1.25), (0.5, 2.0, 1.25)]
    f = sum(w * stats.norm(m, math.sqrt(v)).pdf(y) for w, m, v in comps)
    df = sum(-w * stats.norm(m, math.sqrt(v)).pdf(y) * (y - m) / v for w, m, v in comps)
    return df / f


def test_marginal_density_gaussian_convolution():
    assert q.marginal_density(G1, STD, 0.0) == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-12)
    assert q.marginal_density(G1, STD, 2.0) == pytest.approx(stats.norm(0, math.sqrt(2)).pdf(2.0), rel=1e-12)


def test_marginal_density_poisson_conjugate_is_negative_binomial():
    got = q.marginal_density(edm.poisson(), ConjugatePrior(2.0, 1.0), 3)
    assert got == pytest.approx(stats.nbinom(2, 0.5).pmf(3), rel=1e-9)


def test_poisson_marginal_sums_to_one():
    prior = ConjugatePrior(2.0, 1.0)
    total = sum(q.marginal_density(edm.poisson(), prior, k) for k in range(80))
    assert abs(total - 1) < 1e-8


def test_marginal_score_gaussian():
    assert q.marginal_score(G1, STD, 2.0) == pytest.approx(-1.0, abs=1e-7)
    assert q.marginal_score(G1, STD, 0.0) == pytest.approx(0.0, abs=1e-9)


def test_marginal_score_mixture_matches_closed_form():
    assert q.marginal_score(G1, BIMODAL, 1.0) == pytest.approx(_mixture_marginal_score(1.0), abs=1e-7)


def test_marginal_score_unsupported_for_counts():
    with pytest.raises(UnsupportedOperation):
        q.marginal_score(edm.poisson(), ConjugatePrior(2.0, 1.0), 3)


def test_posterior_mean_examples():
    assert q.posterior_mean_oracle(G1, STD, 2.0, target="mu") == pytest.approx(1.0, abs=1e-12)
    assert q.posterior_mean_oracle(edm.poisson(), ConjugatePrior(2.0, 1.0), 3, target="mu") == pytest.approx(2.5, abs=1e-10)


def test_mixture_posterior_mean_stable_under_dense_trapezoid():
    base = q.posterior_mean_oracle(G1, BIMODAL, 1.0)
    dense = q.posterior_mean_oracle(G1, BIMODAL, 1.0, QuadratureConfig(scheme="trapezoid", node_count=40960))
    assert base == pytest.approx(dense, abs=1e-10)


def test_gaussian_prior_on_positive_mean_against_direct_integration():
    spec, prior, y = edm.poisson(), GaussianPrior(2.0, 0.05), 3
    num = integrate.quad(lambda m: m * stats.poisson(m).pmf(y) * stats.norm(2, math.sqrt(0.05)).pdf(m), 0, 10, epsabs=0, epsrel=1e-13)[0]
    den = integrate.quad(lambda m: stats.poisson(m).pmf(y) * stats.norm(2, math.sqrt(0.05)).pdf(m), 0, 10, epsabs=0, epsrel=1e-13)[0]
    assert q.posterior_mean_oracle(spec, prior, y) == pytest.approx(num / den, abs=1e-10)
    assert q.marginal_density(spec, prior, y) == pytest.approx(den, rel=1e-9)


SMOOTH_CASES = [
    (G1, STD, 0.7),
    (G1, BIMODAL, 1.0),
    (edm.gaussian_location(4.0), GaussianPrior(1.0, 2.0), -2.5),
    (edm.gaussian_location(1.0), GaussianPrior(0.0, 1.0, space="natural"), 1.2),
]


@pytest.mark.parametrize("spec,prior,y", SMOOTH_CASES)
def test_schemes_agree(spec, prior, y):
    gh = QuadratureConfig(scheme="gauss_hermite")
    tr = QuadratureConfig(scheme="trapezoid")
    assert q.marginal_density(spec, prior, y, tr) == pytest.approx(q.marginal_density(spec, prior, y, gh), rel=1e-6)
    assert q.posterior_mean_oracle(spec, prior, y, tr) == pytest.approx(
        q.posterior_mean_oracle(spec, prior, y, gh), rel=1e-6, abs=1e-12)


RESOLUTION_CASES = SMOOTH_CASES + [
    (edm.poisson(), ConjugatePrior(2.0, 1.0), 3),
    (edm.gamma(0.5), ConjugatePrior(2.0, 2.0), 1.4),
    (edm.gaussian_variance(), ConjugatePrior(3.0, 3.0), 0.8),
    (edm.poisson(), GaussianPrior(2.0, 0.05), 3),
    (edm.gamma(0.5), GaussianPrior(1.0, 0.01), 2.0),
]


@pytest.mark.parametrize("spec,prior,y", RESOLUTION_CASES)
def test_doubling_nodes_changes_little(spec, prior, y):
    scheme = "gauss_hermite" if isinstance(prior, (GaussianPrior, GaussianMixturePrior)) and not spec.positive_mean else "trapezoid"
    base = QuadratureConfig(scheme=scheme).nodes_for(scheme)
    a = QuadratureConfig(scheme=scheme, node_count=base)
    b = QuadratureConfig(scheme=scheme, node_count=2 * base)
    assert abs(q.posterior_mean_oracle(spec, prior, y, a) - q.posterior_mean_oracle(spec, prior, y, b)) < 1e-8
    la, lb = q.log_marginal_density(spec, prior, y, a), q.log_marginal_density(spec, prior, y, b)
    assert abs(la - lb) < 1e-8


@settings(max_examples=40, deadline=None)
@given(tau=st.floats(0.2, 20), n=st.floats(0.2, 10), y=st.integers(0, 30))
def test_conjugate_posterior_mean_between_prior_mean_and_data(tau, n, y):
    got = q.posterior_mean_oracle(edm.poisson(), ConjugatePrior(tau, n), y)
    lo, hi = sorted((tau / n, float(y)))
    assert lo - 1e-9 <= got <= hi + 1e-9


def test_custom_prior_matches_builtin_gaussian():
    custom = CustomPrior(lambda z: -0.5 * z ** 2, center=0.0, scale=1.0)
    assert q.posterior_mean_oracle(G1, custom, 1.3) == pytest.approx(0.65, abs=1e-10)


def test_config_validation():
    with pytest.raises(ConfigError):
        QuadratureConfig(node_count=8)
    with pytest.raises(ConfigError):
        QuadratureConfig(fd_step=0.1)
    with pytest.raises(ConfigError):
        QuadratureConfig(scheme="simpson")


def test_prior_validation():
    with pytest.raises(ValueError):
        GaussianPrior(0.0, -1.0)
    with pytest.raises(ValueError):
        GaussianMixturePrior((0.3, 0.3), (0, 1), (1, 1))
    with pytest.raises(ValueError):
        ConjugatePrior(1.0, 0.0)


def test_gauss_hermite_rule_integrates_moments():
    z, w = q.gauss_hermite_rule(32)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert (w * z ** 4).sum() == pytest.approx(3.0, rel=1e-13)
