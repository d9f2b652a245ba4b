#!/usr/bin/env python3
"""
Tests for the quadrature functionals Omega and J, the tilted output and the
Gaussian-family exponents G_OH / G_AR
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad as integrate, trapezoid

from channel_core import Channel, DomainError, PowerBudget, capacity, gaussian_log_pdf
from closed_form_exponent import TiltParams, zeta
from variational_forms import (
    DiscretizedDensity,
    QuadratureSpec,
    g_ar_numeric,
    g_oh_numeric,
    gaussian_j,
    gaussian_output_density,
    j_functional,
    min_omega_over_q,
    omega,
    optimal_tilted_output,
    saddle_eta,
    saddle_value,
    tilted_log_normaliser,
    underline_omega,
    xi_of_theta,
)

UNIT = Channel(1.0)
PB1 = PowerBudget(1.0)
QUAD = QuadratureSpec()

R_03 = 0.5 * (math.log(2.3) - math.log(0.61))
G_03 = -0.15 - 0.5 * math.log(0.61)


# ============================================================================
# QUADRATURE AND DENSITIES
# ============================================================================

@pytest.mark.parametrize('rule', ['gauss-legendre', 'trapezoid'])
def test_quadrature_weights_integrate_constants_and_lines(rule):
    x, w = QuadratureSpec(nodes_per_axis=50, rule=rule).nodes(-2.0, 3.0)
    assert w.sum() == pytest.approx(5.0, rel=1e-12)
    assert np.dot(w, x) == pytest.approx(2.5, rel=1e-12)
    assert x[0] >= -2.0 and x[-1] <= 3.0


def test_quadrature_rejects_bad_rule():
    with pytest.raises(DomainError):
        QuadratureSpec(rule='simpson')
    with pytest.raises(DomainError):
        QuadratureSpec(nodes_per_axis=1)


def test_default_rule_converges_under_node_doubling():
    coarse = QuadratureSpec()
    fine = QuadratureSpec(nodes_per_axis=2 * coarse.nodes_per_axis)
    assert coarse.rule == 'gauss-legendre'

    tp = TiltParams(mu=0.3, lam=1.5)
    tp_ar = TiltParams(mu=0.3, lam=0.6)

    def reported(q):
        values = []
        for qx in (DiscretizedDensity.gaussian(1.3, q),
                   DiscretizedDensity.uniform(-2.0, 2.0, q),
                   DiscretizedDensity.mixture([(0.5, -1.5, 0.3), (0.5, 1.5, 0.3)], q)):
            values.append(j_functional(qx, tp_ar, UNIT, q))
            values.append(min_omega_over_q(qx, tp, UNIT, q))
            values.append(saddle_value(qx, TiltParams(0.5, 1.0), UNIT, q))
        return np.array(values)

    assert np.max(np.abs(reported(fine) - reported(coarse))) < 1e-7


def test_density_validation():
    with pytest.raises(DomainError):
        DiscretizedDensity(grid=[0.0, 1.0], weights=[0.4, 0.4], rule_weights=[1.0, 1.0])
    with pytest.raises(DomainError):
        DiscretizedDensity(grid=[1.0, 0.0], weights=[0.5, 0.5], rule_weights=[1.0, 1.0])
    with pytest.raises(DomainError):
        DiscretizedDensity(grid=[0.0, 1.0], weights=[1.5, -0.5], rule_weights=[1.0, 1.0])


def test_gaussian_density_moments():
    q = DiscretizedDensity.gaussian(2.5, QUAD)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert q.second_moment == pytest.approx(2.5, rel=1e-10)
    i = q.grid.size // 2
    assert q.density[i] == pytest.approx(math.exp(gaussian_log_pdf(q.grid[i], 2.5)), rel=1e-8)


def test_point_mass_at_theta_zero():
    q = DiscretizedDensity.gaussian(0.0)
    assert q.grid.tolist() == [0.0]
    assert q.second_moment == 0.0


def test_uniform_and_mixture_factories():
    u = DiscretizedDensity.uniform(-3.0, 3.0, QUAD)
    assert u.second_moment == pytest.approx(3.0, rel=1e-10)
    assert np.allclose(u.density, 1.0 / 6.0)

    m = DiscretizedDensity.mixture([(0.5, -1.5, 0.3), (0.5, 1.5, 0.3)], QUAD)
    assert m.second_moment == pytest.approx(1.5 ** 2 + 0.3, rel=1e-10)

    with pytest.raises(DomainError):
        DiscretizedDensity.uniform(1.0, 1.0)


def test_csv_round_trip(tmp_path):
    q = DiscretizedDensity.from_masses([-1.0, 0.0, 2.0], [0.3, 0.5, 0.2])
    path = tmp_path / 'q.csv'
    q.write_csv(path)

    assert path.read_text().splitlines()[0] == 'node,weight'
    back = DiscretizedDensity.read_csv(path)
    assert back.grid.tolist() == q.grid.tolist()
    assert back.weights == pytest.approx(q.weights, abs=1e-15)


# ============================================================================
# OMEGA
# ============================================================================

def test_omega_vanishes_at_lambda_zero():
    qx = DiscretizedDensity.gaussian(1.0, QUAD)
    tp = TiltParams(mu=0.5, lam=0.0)
    q_out = gaussian_output_density(qx, tp, UNIT, 2.0, QUAD)
    assert omega(qx, q_out, tp, UNIT) == pytest.approx(0.0, abs=1e-9)


def test_omega_matches_brute_force_sum_on_point_masses():
    qx = DiscretizedDensity.from_masses([-1.0, 0.0, 2.0], [0.3, 0.5, 0.2])
    q_out = DiscretizedDensity.from_masses([-2.0, -0.5, 0.0, 1.0, 3.0], [0.1, 0.2, 0.3, 0.25, 0.15])
    tp = TiltParams(mu=0.4, lam=1.5)
    ch = Channel(0.7)

    total = 0.0
    for x, px in zip(qx.grid, qx.weights):
        for y, qy in zip(q_out.grid, q_out.weights):
            p_n = math.exp(gaussian_log_pdf(y - x, ch.noise_variance))
            total += px * p_n ** (1 + tp.lam) * math.exp(-tp.mu * tp.lam * x ** 2) / qy ** tp.lam

    assert omega(qx, q_out, tp, ch) == pytest.approx(math.log(total), abs=1e-12)


def test_omega_rejects_zero_output_mass():
    qx = DiscretizedDensity.from_masses([0.0], [1.0])
    q_out = DiscretizedDensity.from_masses([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(DomainError):
        omega(qx, q_out, TiltParams(0.5, 1.0), UNIT)


def test_gaussian_pair_identity():
    rng = np.random.default_rng(17)
    for _ in range(10):
        tp = TiltParams(mu=rng.uniform(0.2, 1.0), lam=rng.uniform(0.1, 4.0))
        theta = rng.uniform(0.2, 3.0)
        xi = xi_of_theta(tp, theta)
        qx = DiscretizedDensity.gaussian(theta, QUAD)
        q_out = gaussian_output_density(qx, tp, UNIT, xi + 1.0, QUAD)
        assert omega(qx, q_out, tp, UNIT) == pytest.approx(zeta(tp, xi, UNIT), abs=1e-6)


# ============================================================================
# J AND THE TILTED OUTPUT
# ============================================================================

def test_j_vanishes_at_lambda_zero():
    qx = DiscretizedDensity.uniform(-1.0, 1.0, QUAD)
    assert j_functional(qx, TiltParams(0.3, 0.0), UNIT, QUAD) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize('lam', [1.0, 1.5])
def test_j_rejects_lambda_at_or_above_one(lam):
    qx = DiscretizedDensity.gaussian(1.0, QUAD)
    with pytest.raises(DomainError):
        j_functional(qx, TiltParams(0.3, lam), UNIT, QUAD)
    with pytest.raises(DomainError):
        gaussian_j(TiltParams(0.3, lam), 1.0, UNIT)


@pytest.mark.parametrize('mu, lam, theta', [(0.3, 0.4, 1.0), (0.1, 0.8, 2.0), (1.0, 0.2, 0.5)])
def test_j_quadrature_matches_gaussian_closed_form(mu, lam, theta):
    tp_ar = TiltParams(mu=mu, lam=lam)
    qx = DiscretizedDensity.gaussian(theta, QUAD)
    assert j_functional(qx, tp_ar, UNIT, QUAD) == pytest.approx(gaussian_j(tp_ar, theta, UNIT), abs=1e-7)


def test_j_matches_dense_trapezoid_evaluation():
    qx = DiscretizedDensity.from_masses([-1.0, 0.5, 1.5], [0.2, 0.5, 0.3])
    tp_ar = TiltParams(mu=0.4, lam=0.6)
    y = np.linspace(-30.0, 30.0, 60001)
    inner = sum(p * np.exp((gaussian_log_pdf(y - x, 1.0) - tp_ar.mu * tp_ar.lam * x ** 2)
                           / (1.0 - tp_ar.lam))
                for x, p in zip(qx.grid, qx.weights))
    brute = math.log(trapezoid(inner ** (1.0 - tp_ar.lam), y))
    assert j_functional(qx, tp_ar, UNIT, QUAD) == pytest.approx(brute, abs=1e-7)


def test_tilted_output_at_lambda_zero_is_the_output_law():
    qx = DiscretizedDensity.gaussian(1.0, QUAD)
    q_out = optimal_tilted_output(qx, TiltParams(0.5, 0.0), UNIT, QUAD)
    expected = np.exp(gaussian_log_pdf(q_out.grid, 2.0))
    assert np.allclose(q_out.density, expected, atol=1e-8)


def test_tilted_output_of_a_gaussian_is_gaussian():
    # theta = 1, mu = 1/2, lam = 1: xi = 1, so Q* = N(0, xi + sigma2)
    qx = DiscretizedDensity.gaussian(1.0, QUAD)
    q_out = optimal_tilted_output(qx, TiltParams(0.5, 1.0), UNIT, QUAD)
    expected = np.exp(gaussian_log_pdf(q_out.grid, 2.0))
    assert np.allclose(q_out.density, expected, atol=1e-8)


def test_tilted_output_shape_for_uniform_input():
    qx = DiscretizedDensity.uniform(-1.0, 1.0, QUAD)
    tp = TiltParams(mu=0.5, lam=1.0)
    q_out = optimal_tilted_output(qx, tp, UNIT, QUAD)

    def unnormalised(y):
        value, _ = integrate(lambda x: 0.5 * math.exp((1 + tp.lam) * gaussian_log_pdf(y - x, 1.0)
                                                      - tp.mu * tp.lam * x ** 2),
                             -1.0, 1.0, epsabs=0, epsrel=1e-12)
        return value ** (1.0 / (1.0 + tp.lam))

    i, j = q_out.grid.size // 2, 2 * q_out.grid.size // 5
    ratio = q_out.density[i] / q_out.density[j]
    assert ratio == pytest.approx(unnormalised(q_out.grid[i]) / unnormalised(q_out.grid[j]), rel=1e-8)


@pytest.mark.parametrize('name', ['gaussian', 'uniform', 'bimodal'])
def test_minimum_over_outputs_is_scaled_j(name):
    qx = {
        'gaussian': DiscretizedDensity.gaussian(1.3, QUAD),
        'uniform': DiscretizedDensity.uniform(-2.0, 2.0, QUAD),
        'bimodal': DiscretizedDensity.mixture([(0.5, -1.5, 0.3), (0.5, 1.5, 0.3)], QUAD),
    }[name]
    tp = TiltParams(mu=0.3, lam=2.0)
    tp_ar = TiltParams(mu=0.3, lam=2.0 / 3.0)

    assert min_omega_over_q(qx, tp, UNIT, QUAD) == pytest.approx(
        3.0 * j_functional(qx, tp_ar, UNIT, QUAD), abs=1e-6)
    assert tilted_log_normaliser(qx, tp, UNIT, QUAD) == pytest.approx(
        j_functional(qx, tp_ar, UNIT, QUAD), abs=1e-6)


@pytest.mark.parametrize('lam', [10.0, 20.0])
@pytest.mark.parametrize('name', ['gaussian', 'uniform'])
def test_minimum_over_outputs_with_steep_tilt(name, lam):
    qx = {
        'gaussian': DiscretizedDensity.gaussian(1.0, QUAD),
        'uniform': DiscretizedDensity.uniform(-2.0, 2.0, QUAD),
    }[name]
    tp = TiltParams(mu=0.3, lam=lam)
    tp_ar = TiltParams(mu=0.3, lam=lam / (1.0 + lam))

    q_out = optimal_tilted_output(qx, tp, UNIT, QUAD)
    assert np.all(q_out.weights > 0)
    assert q_out.weights.sum() == pytest.approx(1.0, abs=1e-12)

    value = min_omega_over_q(qx, tp, UNIT, QUAD)
    assert math.isfinite(value)
    assert value == pytest.approx((1.0 + lam) * j_functional(qx, tp_ar, UNIT, QUAD), abs=1e-6)


def test_gaussian_pair_identity_with_steep_tilt():
    tp = TiltParams(mu=0.3, lam=20.0)
    xi = xi_of_theta(tp, 1.0)
    qx = DiscretizedDensity.gaussian(1.0, QUAD)
    q_out = gaussian_output_density(qx, tp, UNIT, xi + 1.0, QUAD)
    assert omega(qx, q_out, tp, UNIT) == pytest.approx(zeta(tp, xi, UNIT), abs=1e-6)


def test_tilted_output_is_a_minimiser_under_perturbation():
    rng = np.random.default_rng(3)
    qx = DiscretizedDensity.mixture([(0.7, -0.5, 0.5), (0.3, 1.5, 0.2)], QUAD)
    tp = TiltParams(mu=0.4, lam=1.2)
    q_star = optimal_tilted_output(qx, tp, UNIT, QUAD)
    best = omega(qx, q_star, tp, UNIT)

    for _ in range(20):
        freq, phase, eps = rng.uniform(0.1, 2.0), rng.uniform(0, 2 * math.pi), rng.uniform(0.01, 0.2)
        bumped = q_star.weights * (1.0 + eps * np.cos(freq * q_star.grid + phase))
        perturbed = DiscretizedDensity(grid=q_star.grid, weights=bumped / bumped.sum(),
                                       rule_weights=q_star.rule_weights)
        assert omega(qx, perturbed, tp, UNIT) >= best - 1e-9


# ============================================================================
# GAUSSIAN FAMILY AND SADDLE
# ============================================================================

def test_xi_of_theta():
    assert xi_of_theta(TiltParams(0.5, 1.0), 1.0) == 1.0
    assert xi_of_theta(TiltParams(0.5, 1.0), 0.0) == 0.0
    assert xi_of_theta(TiltParams(0.0, 3.0), 2.0) == 8.0
    with pytest.raises(DomainError):
        xi_of_theta(TiltParams(0.5, 1.0), -1.0)


def test_underline_omega_maximiser():
    tp = TiltParams(mu=0.5, lam=1.0)
    value, xi = underline_omega(tp, UNIT)
    assert xi == pytest.approx(1.0 / (2 * tp.mu) - 1.0 / (1 + tp.lam), abs=1e-6)
    assert value == pytest.approx(0.5 * math.log(1.125), abs=1e-10)
    assert value == pytest.approx(0.0588915, abs=1e-7)


def test_underline_omega_is_zero_when_the_tilt_is_too_costly():
    # mu at or above (1+lam)/(2 sigma2) puts the maximiser at xi = 0
    assert underline_omega(TiltParams(mu=1.5, lam=1.0), UNIT) == (0.0, 0.0)
    assert underline_omega(TiltParams(mu=0.5, lam=0.0), UNIT) == (0.0, 0.0)


def test_saddle_eta_range():
    assert saddle_eta(TiltParams(0.5, 1.0), UNIT) == pytest.approx(0.5)
    assert saddle_eta(TiltParams(1.0, 1.0), UNIT) == 0.0
    with pytest.raises(DomainError):
        saddle_eta(TiltParams(1.2, 1.0), UNIT)
    with pytest.raises(DomainError):
        saddle_eta(TiltParams(0.0, 1.0), UNIT)


def test_saddle_value_does_not_depend_on_the_input():
    tp = TiltParams(mu=0.5, lam=1.0)
    oracle = zeta(tp, saddle_eta(tp, UNIT), UNIT)
    densities = [
        DiscretizedDensity.gaussian(1.0, QUAD),
        DiscretizedDensity.uniform(-3.0, 3.0, QUAD),
        DiscretizedDensity.mixture([(0.5, -1.5, 0.3), (0.5, 1.5, 0.3)], QUAD),
        DiscretizedDensity.from_masses([-1.0, 0.0, 2.0], [0.3, 0.5, 0.2]),
    ]
    values = [saddle_value(qx, tp, UNIT, QUAD) for qx in densities]
    assert max(values) - min(values) < 1e-6
    assert all(abs(v - oracle) < 1e-6 for v in values)


# ============================================================================
# EXPONENTS OVER THE GAUSSIAN FAMILY
# ============================================================================

def test_g_oh_vanishes_at_capacity():
    assert g_oh_numeric(capacity(UNIT, PB1), PB1, UNIT) == pytest.approx(0.0, abs=1e-5)


def test_g_oh_matches_closed_form():
    assert g_oh_numeric(R_03, PB1, UNIT) == pytest.approx(G_03, abs=1e-4)


def test_g_oh_mu_restriction_loses_nothing():
    restricted = g_oh_numeric(R_03, PB1, UNIT)
    unrestricted = g_oh_numeric(R_03, PB1, UNIT, restrict_mu=False)
    assert unrestricted <= restricted + 1e-5


def test_g_ar_matches_closed_form():
    assert g_ar_numeric(R_03, PB1, UNIT) == pytest.approx(G_03, abs=1e-4)


def test_exponent_routes_reject_nonpositive_rate():
    with pytest.raises(DomainError):
        g_oh_numeric(0.0, PB1, UNIT)
    with pytest.raises(DomainError):
        g_ar_numeric(-1.0, PB1, UNIT)
