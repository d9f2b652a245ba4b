"""
Dueck-Korner form of the exponent
=================================
G_DK(R) = min over Gaussian (q_X, q_{Y|X}) with E[X^2] <= Gamma of
          [R - I(q_X, q_{Y|X})]^+ + D(q_{Y|X} || W | q_X)

The search runs over zero-mean pairs X ~ N(0, theta), Y = alpha X + S,
S ~ N(0, xi), in the coordinates (theta, alpha, ln xi). The [.]^+ kink is
handled by solving both branches separately:

- rate-gap:          minimise R - I + D (smooth)
- capacity-limited:  minimise D subject to I >= R

and keeping the smaller value of the true objective, next to a plain
Nelder-Mead run on the kinked objective from every start.
"""

import math
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from channel_core import (
    DomainError,
    GaussianInputLaw,
    GaussianTestChannel,
    gaussian_conditional_divergence,
    gaussian_mutual_information,
    positive_part,
)
from closed_form_exponent import nu_zero
from settings import get_settings

logger = logging.getLogger(__name__)

# Deterministic starts as (theta/Gamma, alpha, xi/sigma2)
START_TABLE = (
    (1.0, 1.0, 1.0),
    (1.0, 1.2, 0.8),
    (1.0, 1.5, 0.5),
    (0.5, 1.0, 1.0),
    (1.0, 0.8, 1.2),
    (1.0, 1.1, 0.9),
    (0.75, 1.3, 0.6),
    (1.0, 1.0, 0.5),
)

ALPHA_BOUNDS = (-20.0, 20.0)
LOG_XI_SPAN = 40.0

# SLSQP keeps Fortran state between calls
_SLSQP_LOCK = threading.Lock()


@dataclass(frozen=True)
class GaussianJointParams:
    theta: float
    alpha: float
    xi: float

    def __post_init__(self):
        if self.theta < 0:
            raise DomainError(f"theta must be nonnegative, got {self.theta}")
        if not self.xi > 0:
            raise DomainError(f"xi must be positive, got {self.xi}")

    @property
    def input_law(self):
        return GaussianInputLaw(self.theta)

    @property
    def test_channel(self):
        return GaussianTestChannel(self.alpha, self.xi)


@dataclass(frozen=True)
class DKSolution:
    value: float
    params: GaussianJointParams
    mutual_information: float
    divergence: float
    branch: str
    start: int


def dk_objective(p, R, pb, ch):
    """[R - I(q_X, q_{Y|X})]^+ + D(q_{Y|X} || W | q_X)"""
    info = gaussian_mutual_information(p.input_law, p.test_channel)
    div = gaussian_conditional_divergence(p.input_law, p.test_channel, ch)
    return positive_part(R - info) + div


# ============================================================================
# SMOOTH PIECES IN (theta, alpha, u = ln xi)
# ============================================================================

def _info_and_grad(z):
    theta, alpha, u = max(z[0], 0.0), z[1], z[2]
    xi = math.exp(u)
    total = xi + alpha ** 2 * theta
    info = 0.5 * (math.log(total) - u)
    grad = np.array([0.5 * alpha ** 2 / total,
                     alpha * theta / total,
                     -0.5 * alpha ** 2 * theta / total])
    return info, grad


def _div_and_grad(z, s2):
    theta, alpha, u = max(z[0], 0.0), z[1], z[2]
    xi = math.exp(u)
    div = 0.5 * (1.0 - alpha) ** 2 * theta / s2 + 0.5 * (xi / s2 - 1.0 - u + math.log(s2))
    grad = np.array([0.5 * (1.0 - alpha) ** 2 / s2,
                     -(1.0 - alpha) * theta / s2,
                     0.5 * (xi / s2 - 1.0)])
    return div, grad


def _params(z):
    return GaussianJointParams(theta=max(float(z[0]), 0.0), alpha=float(z[1]), xi=math.exp(z[2]))


class _KinkedProblem:
    """
    min [R - I]^+ + D + mu (theta - Gamma) over theta in [0, theta_max]

    mu = 0 with theta_max = Gamma is the constrained G_DK problem; mu > 0
    with theta_max = None is its Lagrangian relaxation.
    """

    def __init__(self, R, pb, ch, mu=0.0, theta_max=None):
        self.R = R
        self.pb = pb
        self.ch = ch
        self.mu = mu
        s2 = ch.noise_variance
        self.bounds = [(0.0, theta_max),
                       ALPHA_BOUNDS,
                       (math.log(s2) - LOG_XI_SPAN, math.log(s2) + LOG_XI_SPAN)]

    def true_value(self, z):
        info, _ = _info_and_grad(z)
        div, _ = _div_and_grad(z, self.ch.noise_variance)
        return positive_part(self.R - info) + div + self.mu * (z[0] - self.pb.gamma)

    def rate_gap(self, z):
        info, g_info = _info_and_grad(z)
        div, g_div = _div_and_grad(z, self.ch.noise_variance)
        value = self.R - info + div + self.mu * (z[0] - self.pb.gamma)
        grad = -g_info + g_div + np.array([self.mu, 0.0, 0.0])
        return value, grad

    def capped(self, z):
        div, g_div = _div_and_grad(z, self.ch.noise_variance)
        return div + self.mu * (z[0] - self.pb.gamma), g_div + np.array([self.mu, 0.0, 0.0])

    def _clip(self, z):
        z = np.asarray(z, dtype=float).copy()
        for k, (lo, hi) in enumerate(self.bounds):
            z[k] = min(max(z[k], lo), hi if hi is not None else math.inf)
        return z

    def candidates(self, z0):
        """Local minimisers reached from one start, all feasible points"""
        found = [self._clip(z0)]

        res = minimize(self.true_value, z0, method='Nelder-Mead', bounds=self.bounds,
                       options={'xatol': 1e-10, 'fatol': 1e-14, 'maxiter': 4000})
        found.append(self._clip(res.x))

        res = minimize(self.rate_gap, z0, jac=True, method='L-BFGS-B', bounds=self.bounds,
                       options={'ftol': 1e-15, 'gtol': 1e-12, 'maxiter': 1000})
        found.append(self._clip(res.x))

        constraint = {
            'type': 'ineq',
            'fun': lambda z: _info_and_grad(z)[0] - self.R,
            'jac': lambda z: _info_and_grad(z)[1],
        }
        with _SLSQP_LOCK:
            res = minimize(lambda z: self.capped(z)[0], z0, jac=lambda z: self.capped(z)[1],
                           method='SLSQP', bounds=self.bounds, constraints=[constraint],
                           options={'ftol': 1e-15, 'maxiter': 500})
        found.append(self._clip(res.x))
        return found

    def start_points(self, count):
        s2 = self.ch.noise_variance
        for theta_frac, alpha, xi_frac in START_TABLE[:count]:
            yield np.array([theta_frac * self.pb.gamma, alpha, math.log(xi_frac * s2)])

    def solve(self, starts, workers=1):
        """Best true objective over every start; ties go to the lowest start index"""
        points = list(self.start_points(starts))

        def run(indexed):
            index, z0 = indexed
            scored = [(self.true_value(z), k, z) for k, z in enumerate(self.candidates(z0))]
            value, _, z = min(scored, key=lambda s: (s[0], s[1]))
            return value, index, z

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, enumerate(points)))

        return min(results, key=lambda r: (r[0], r[1]))


def _solution(problem, value, index, z):
    p = _params(z)
    info = gaussian_mutual_information(p.input_law, p.test_channel)
    div = gaussian_conditional_divergence(p.input_law, p.test_channel, problem.ch)
    branch = 'rate-gap' if info < problem.R - 1e-9 else 'capacity-limited'
    return DKSolution(value=value, params=p, mutual_information=info, divergence=div,
                      branch=branch, start=index)


# ============================================================================
# G_DK AND ITS PARAMETRIC FORMS
# ============================================================================

def solve_dk(R, pb, ch, settings=None):
    """Minimiser of the G_DK problem over the Gaussian family"""
    if R <= 0:
        raise DomainError(f"rate must be positive, got {R}")
    settings = settings or get_settings()
    problem = _KinkedProblem(R, pb, ch, mu=0.0, theta_max=pb.gamma)
    value, index, z = problem.solve(settings.dk_starts, settings.workers)
    solution = _solution(problem, value, index, z)
    logger.debug(f"G_DK at R={R}: {solution}")
    return solution


def g_dk(R, pb, ch, settings=None):
    """G_DK(R, Gamma|sigma2)"""
    return solve_dk(R, pb, ch, settings).value


def solve_dk_mu(mu, R, pb, ch, settings=None):
    """Minimiser of [R - I]^+ + D - mu (Gamma - E[X^2]) with theta unconstrained"""
    if mu < 0:
        raise DomainError(f"mu must be nonnegative, got {mu}")
    if R <= 0:
        raise DomainError(f"rate must be positive, got {R}")
    settings = settings or get_settings()
    problem = _KinkedProblem(R, pb, ch, mu=mu, theta_max=None)
    value, index, z = problem.solve(settings.dk_starts, settings.workers)
    return _solution(problem, value, index, z)


def g_dk_mu(mu, R, pb, ch, settings=None):
    """G_DK^(mu)(R, Gamma|sigma2)"""
    return solve_dk_mu(mu, R, pb, ch, settings).value


def g_dk_max_over_mu(R, pb, ch, settings=None):
    """
    max over mu >= 0 of G_DK^(mu); concave in mu

    Returns:
        (value, argmax mu)
    """
    settings = settings or get_settings()
    mu_hi = 2.0 * nu_zero(pb, ch) / ch.noise_variance + 1.0 / ch.noise_variance
    res = minimize_scalar(lambda m: -g_dk_mu(m, R, pb, ch, settings),
                          bounds=(0.0, mu_hi), method='bounded', options={'xatol': 1e-8})
    value_at_zero = g_dk_mu(0.0, R, pb, ch, settings)
    if value_at_zero >= -res.fun:
        return value_at_zero, 0.0
    return float(-res.fun), float(res.x)


def g_dk_mu_lambda(mu, lam, R, pb, ch, settings=None, starts=3):
    """
    G_DK^(mu,lam) = min lam [R - I] - mu Gamma + mu E[X^2] + D,  lam in [0, 1]

    With mu = 0 and lam > 0 the input power is free and the minimum is -inf.
    """
    if mu < 0 or not 0.0 <= lam <= 1.0:
        raise DomainError(f"need mu >= 0 and lam in [0, 1], got ({mu}, {lam})")
    if mu == 0 and lam > 0:
        return -math.inf

    s2 = ch.noise_variance
    bounds = [(0.0, None), ALPHA_BOUNDS, (math.log(s2) - LOG_XI_SPAN, math.log(s2) + LOG_XI_SPAN)]

    def objective(z):
        info, g_info = _info_and_grad(z)
        div, g_div = _div_and_grad(z, s2)
        value = lam * (R - info) + mu * (z[0] - pb.gamma) + div
        return value, -lam * g_info + g_div + np.array([mu, 0.0, 0.0])

    best = math.inf
    for theta_frac, alpha, xi_frac in START_TABLE[:starts]:
        z0 = np.array([theta_frac * pb.gamma, alpha, math.log(xi_frac * s2)])
        res = minimize(objective, z0, jac=True, method='L-BFGS-B', bounds=bounds,
                       options={'ftol': 1e-15, 'gtol': 1e-12, 'maxiter': 1000})
        best = min(best, float(res.fun))
    return best


def g_dk_lagrange_sweep(R, pb, ch, mu_grid, lambda_grid, settings=None):
    """
    max of G_DK^(mu,lam) over a (mu, lam) grid, refined by Nelder-Mead

    Returns:
        dict with value, mu, lam and whether lam landed on 0 or 1
    """
    best = {'value': -math.inf, 'mu': None, 'lam': None}
    for mu in mu_grid:
        for lam in lambda_grid:
            value = g_dk_mu_lambda(mu, lam, R, pb, ch, settings)
            if value > best['value']:
                best = {'value': value, 'mu': float(mu), 'lam': float(lam)}

    if best['mu'] is not None and best['mu'] > 0:
        def negative(z):
            mu, lam = z
            if mu < 0 or not 0.0 <= lam <= 1.0:
                return math.inf
            return -g_dk_mu_lambda(mu, lam, R, pb, ch, settings)

        res = minimize(negative, x0=[best['mu'], best['lam']], method='Nelder-Mead',
                       options={'xatol': 1e-8, 'fatol': 1e-12, 'maxiter': 400})
        if -res.fun > best['value']:
            best = {'value': float(-res.fun), 'mu': float(res.x[0]), 'lam': float(res.x[1])}

    best['lambda_boundary'] = best['lam'] is not None and (best['lam'] <= 1e-9
                                                           or best['lam'] >= 1.0 - 1e-9)
    if best['lambda_boundary']:
        logger.info(f"Lagrange sweep at R={R}: maximiser on lambda boundary ({best['lam']})")
    return best
