import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from commcs import (
    CategoricalValueDistribution,
    GaussianSpec,
    MomentPair,
    NormalizationError,
    bin_centers,
    discrete_moments,
    exact_dv1_from_children,
    expectation,
    project_density,
    project_gaussian,
)
from commcs.distribution import continuous_moments_oracle, moment_sums


def uniform(num_bins=9):
    return CategoricalValueDistribution(
        bin_centers(num_bins), np.full(num_bins, 1.0 / num_bins)
    )


def test_bin_centers_default_grid():
    z = bin_centers(9)
    assert z[0] == 0.0 and z[-1] == 1.0
    assert np.allclose(np.diff(z), 1.0 / 8.0)


def test_distribution_validation():
    z = bin_centers(3)
    with pytest.raises(NormalizationError):
        CategoricalValueDistribution(z, np.array([0.5, 0.5, 0.5]))
    with pytest.raises(ValueError):
        CategoricalValueDistribution(z, np.array([1.2, -0.2, 0.0]))
    with pytest.raises(ValueError):
        CategoricalValueDistribution(np.array([0.0, 0.3, 1.0]), np.full(3, 1 / 3))


def test_momentpair_bounds():
    with pytest.raises(ValueError):
        MomentPair(expected_bernoulli_variance=0.3, value_variance=0.0)
    with pytest.raises(ValueError):
        MomentPair(expected_bernoulli_variance=0.1, value_variance=-0.1)


def test_expectation_of_uniform():
    assert expectation(uniform()) == pytest.approx(0.5)


def test_hand_computable_moments():
    # three bins {0, 0.5, 1} with mass {0.25, 0.5, 0.25} around v_n = 0.5
    dist = CategoricalValueDistribution(
        bin_centers(3), np.array([0.25, 0.5, 0.25])
    )
    pair = discrete_moments(dist, 0.5)
    assert pair.expected_bernoulli_variance == pytest.approx(0.125, abs=1e-15)
    assert pair.value_variance == pytest.approx(0.125, abs=1e-15)


def test_uniform_nine_bin_moments():
    # sum (1/9) z(1-z) over z = i/8 is 7/48; sum (1/9)(z-1/2)^2 is 5/48
    pair = discrete_moments(uniform(9), 0.5)
    assert pair.expected_bernoulli_variance == pytest.approx(7.0 / 48.0)
    assert pair.value_variance == pytest.approx(5.0 / 48.0)
    m1, m2 = moment_sums(uniform(9))
    assert m1 == pytest.approx(0.5)
    assert m1 - m2 == pytest.approx(7.0 / 48.0)


def test_gaussian_projection_point_mass_and_tie():
    dist = project_gaussian(GaussianSpec(mu=0.3, sigma=0.0, delta_scale=1), 9)
    assert dist.probabilities[2] == 1.0  # 0.3 is nearest to bin center 0.25
    tie = project_gaussian(GaussianSpec(mu=0.0625, sigma=0.0, delta_scale=1), 9)
    assert tie.probabilities[0] == 1.0  # equidistant -> lower bin


def test_gaussian_projection_matches_cdf_differences():
    spec = GaussianSpec(mu=0.4, sigma=0.2, delta_scale=2)
    dist = project_gaussian(spec, 9)
    s = spec.sigma / spec.delta_scale
    # interior bin mass is the CDF increment over the bin interval
    lo, hi = 0.5 - 1 / 16, 0.5 + 1 / 16
    want = stats.norm.cdf(hi, 0.4, s) - stats.norm.cdf(lo, 0.4, s)
    assert dist.probabilities[4] == pytest.approx(want, abs=1e-12)
    # tails are absorbed into the edge bins
    assert dist.probabilities[0] == pytest.approx(
        stats.norm.cdf(1 / 16, 0.4, s), abs=1e-12
    )


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-1.0, 2.0),
    st.floats(0.0, 1.0),
    st.sampled_from([1, 2, 3]),
    st.sampled_from([3, 5, 9, 33]),
)
def test_gaussian_projection_invariants(mu, sigma, delta_scale, num_bins):
    dist = project_gaussian(GaussianSpec(mu, sigma, delta_scale), num_bins)
    assert dist.probabilities.min() >= 0.0
    assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-9)
    pair = discrete_moments(dist, 0.5)
    assert 0.0 <= pair.expected_bernoulli_variance <= 0.25


def truncated_normal_density(mu, sigma):
    norm = stats.norm.cdf(1.0, mu, sigma) - stats.norm.cdf(0.0, mu, sigma)
    return lambda x: stats.norm.pdf(x, mu, sigma) / norm


@pytest.mark.parametrize("mu,sigma", [(0.5, 0.2), (0.2, 0.15), (0.9, 0.3)])
def test_density_projection_moments_match_quadrature(mu, sigma):
    density = truncated_normal_density(mu, sigma)
    dist = project_density(density, 257)
    got = discrete_moments(dist, mu)
    want = continuous_moments_oracle(density, mu)
    assert got.expected_bernoulli_variance == pytest.approx(
        want.expected_bernoulli_variance, abs=5e-4
    )
    assert got.value_variance == pytest.approx(want.value_variance, abs=5e-4)


def test_unnormalized_density_rejected():
    with pytest.raises(NormalizationError):
        project_density(lambda x: 2.0, 9)
    with pytest.raises(NormalizationError):
        continuous_moments_oracle(lambda x: 0.5, 0.5)


def test_exact_dv1_from_children_binning():
    dist = exact_dv1_from_children([0.0, 0.5, 0.51, 1.0], [0.1, 0.2, 0.3, 0.4], 9)
    assert dist.probabilities[0] == pytest.approx(0.1)  # exactly 0 -> first bin
    assert dist.probabilities[4] == pytest.approx(0.5)  # 0.5 and 0.51 share a bin
    assert dist.probabilities[8] == pytest.approx(0.4)
    assert expectation(dist) == pytest.approx(0.1 * 0 + 0.2 * 0.5 + 0.3 * 0.5 + 0.4)


def test_exact_dv1_from_children_validation():
    with pytest.raises(ValueError):
        exact_dv1_from_children([0.5], [0.9], 9)
    with pytest.raises(ValueError):
        exact_dv1_from_children([1.5], [1.0], 9)
