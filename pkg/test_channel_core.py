#!/usr/bin/env python3
"""
Tests for the Gaussian channel primitives
Closed forms against worked values and Monte Carlo expectations
"""

import math

import numpy as np
import pytest

from channel_core import (
    Channel,
    DomainError,
    GaussianInputLaw,
    GaussianTestChannel,
    PowerBudget,
    binary_entropy,
    capacity,
    gaussian_conditional_divergence,
    gaussian_log_pdf,
    gaussian_mutual_information,
    gaussian_output_variance,
    nats_to_bits,
    positive_part,
)


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@pytest.mark.parametrize('make', [
    lambda: Channel(0.0),
    lambda: Channel(-1.0),
    lambda: PowerBudget(0.0),
    lambda: GaussianInputLaw(-0.1),
    lambda: GaussianTestChannel(1.0, 0.0),
])
def test_invalid_types_raise_domain_error(make):
    with pytest.raises(DomainError):
        make()


def test_domain_error_is_a_value_error():
    with pytest.raises(ValueError):
        Channel(0.0)


# ============================================================================
# CAPACITY
# ============================================================================

@pytest.mark.parametrize('sigma2, gamma, expected', [
    (1.0, 1.0, 0.5 * math.log(2.0)),
    (2.0, 6.0, 0.5 * math.log(4.0)),
])
def test_capacity_worked_values(sigma2, gamma, expected):
    assert capacity(Channel(sigma2), PowerBudget(gamma)) == pytest.approx(expected, abs=1e-12)


def test_capacity_vanishes_with_power():
    assert capacity(Channel(1.0), PowerBudget(1e-12)) == pytest.approx(0.0, abs=1e-11)


def test_capacity_monotone():
    ch = Channel(1.0)
    values = [capacity(ch, PowerBudget(g)) for g in np.geomspace(0.01, 100.0, 50)]
    assert all(v > 0 for v in values)
    assert all(b > a for a, b in zip(values, values[1:]))

    pb = PowerBudget(1.0)
    noisy = [capacity(Channel(s), pb) for s in np.geomspace(0.01, 100.0, 50)]
    assert all(b < a for a, b in zip(noisy, noisy[1:]))


def test_nats_to_bits():
    assert nats_to_bits(math.log(2.0)) == pytest.approx(1.0)
    assert nats_to_bits(capacity(Channel(1.0), PowerBudget(3.0))) == pytest.approx(1.0)


# ============================================================================
# MUTUAL INFORMATION AND DIVERGENCE
# ============================================================================

def test_mutual_information_of_the_channel_itself_is_capacity():
    ch, pb = Channel(1.5), PowerBudget(2.5)
    info = gaussian_mutual_information(GaussianInputLaw(pb.gamma),
                                       GaussianTestChannel(1.0, ch.noise_variance))
    assert info == pytest.approx(capacity(ch, pb), abs=1e-14)


def test_mutual_information_zero_gain():
    assert gaussian_mutual_information(GaussianInputLaw(3.0), GaussianTestChannel(0.0, 0.7)) == 0.0


def test_mutual_information_worked_value():
    info = gaussian_mutual_information(GaussianInputLaw(1.0), GaussianTestChannel(1.0, 0.5))
    assert info == pytest.approx(0.5 * math.log(3.0), abs=1e-12)
    assert info == pytest.approx(0.549306, abs=1e-6)


def test_output_variance():
    assert gaussian_output_variance(GaussianInputLaw(2.0), GaussianTestChannel(0.5, 1.0)) == 1.5


def test_mutual_information_matches_monte_carlo():
    rng = np.random.default_rng(2024)
    theta, alpha, xi = 1.0, 1.0, 0.5
    x = rng.normal(0.0, math.sqrt(theta), 1_000_000)
    y = alpha * x + rng.normal(0.0, math.sqrt(xi), x.size)
    samples = gaussian_log_pdf(y - alpha * x, xi) - gaussian_log_pdf(y, alpha ** 2 * theta + xi)

    closed = gaussian_mutual_information(GaussianInputLaw(theta), GaussianTestChannel(alpha, xi))
    std_err = samples.std() / math.sqrt(samples.size)
    assert abs(samples.mean() - closed) < 4 * std_err


def test_divergence_zero_iff_identical_channel():
    ch = Channel(1.3)
    assert gaussian_conditional_divergence(GaussianInputLaw(2.0), GaussianTestChannel(1.0, 1.3), ch) == 0.0
    assert gaussian_conditional_divergence(GaussianInputLaw(2.0), GaussianTestChannel(1.01, 1.3), ch) > 0
    assert gaussian_conditional_divergence(GaussianInputLaw(2.0), GaussianTestChannel(1.0, 1.31), ch) > 0


@pytest.mark.parametrize('theta, alpha, xi, expected', [
    (0.7, 1.0, 2.0, 0.5 * (2.0 - 1.0 + math.log(0.5))),
    (4.0, 0.5, 1.0, 0.5),
])
def test_divergence_worked_values(theta, alpha, xi, expected):
    div = gaussian_conditional_divergence(GaussianInputLaw(theta), GaussianTestChannel(alpha, xi),
                                          Channel(1.0))
    assert div == pytest.approx(expected, abs=1e-12)


def test_divergence_worked_value_digits():
    div = gaussian_conditional_divergence(GaussianInputLaw(1.0), GaussianTestChannel(1.0, 2.0),
                                          Channel(1.0))
    assert div == pytest.approx(0.153426, abs=1e-6)


def test_divergence_matches_monte_carlo():
    rng = np.random.default_rng(7)
    theta, alpha, xi, s2 = 4.0, 0.5, 1.0, 1.0
    x = rng.normal(0.0, math.sqrt(theta), 1_000_000)
    y = alpha * x + rng.normal(0.0, math.sqrt(xi), x.size)
    samples = gaussian_log_pdf(y - alpha * x, xi) - gaussian_log_pdf(y - x, s2)

    closed = gaussian_conditional_divergence(GaussianInputLaw(theta), GaussianTestChannel(alpha, xi),
                                             Channel(s2))
    std_err = samples.std() / math.sqrt(samples.size)
    assert abs(samples.mean() - closed) < 4 * std_err


def test_divergence_nonnegative_on_a_grid():
    ch = Channel(0.8)
    for theta in (0.0, 0.5, 3.0):
        for alpha in np.linspace(-2.0, 3.0, 11):
            for xi in np.geomspace(1e-3, 1e3, 13):
                div = gaussian_conditional_divergence(GaussianInputLaw(theta),
                                                      GaussianTestChannel(alpha, xi), ch)
                assert div >= 0.0


# ============================================================================
# SCALAR HELPERS
# ============================================================================

@pytest.mark.parametrize('p, expected', [
    (0.0, 0.0),
    (0.5, math.log(2.0)),
    (1.0, 0.0),
])
def test_binary_entropy(p, expected):
    assert binary_entropy(p) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize('p', [-0.1, 1.1])
def test_binary_entropy_outside_unit_interval(p):
    with pytest.raises(DomainError):
        binary_entropy(p)


@pytest.mark.parametrize('t, expected', [(-1.0, 0.0), (0.0, 0.0), (2.5, 2.5)])
def test_positive_part(t, expected):
    assert positive_part(t) == expected
