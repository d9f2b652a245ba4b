"""
Gaussian channel primitives
===========================
Capacity, mutual information and conditional divergence for the AWGN
channel Y = X + N, N ~ N(0, sigma2), plus the scalar helpers shared by
every exponent route.

All logarithms are natural: rates and exponents are in nats.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

logger = logging.getLogger(__name__)


# ============================================================================
# ERRORS
# ============================================================================

class ExponentError(Exception):
    """Base class for every error raised by the toolkit"""


class DomainError(ExponentError, ValueError):
    """Argument outside the domain of an operation"""


class SizeError(ExponentError):
    """Desk-scale cap exceeded (codebook size, block length, trials)"""


class DegenerateEstimateError(ExponentError):
    """Monte Carlo estimate sits on {0, 1} where a logarithm is needed"""


class SolverError(ExponentError):
    """An optimiser or root finder did not converge"""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IdentityViolation(ExponentError):
    """A numerical identity failed its tolerance"""

    def __init__(self, identity, message):
        super().__init__(f"{identity}: {message}")
        self.identity = identity


class ConfigError(ExponentError):
    """Malformed configuration"""


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class Channel:
    """AWGN channel specified by its noise variance sigma2"""
    noise_variance: float

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise DomainError(f"noise_variance must be positive, got {self.noise_variance}")


@dataclass(frozen=True)
class PowerBudget:
    """Average power constraint (1/n) sum x_t^2 <= gamma"""
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class GaussianInputLaw:
    """Zero-mean Gaussian input q_X with variance theta"""
    theta: float

    def __post_init__(self):
        if not self.theta >= 0:
            raise DomainError(f"theta must be nonnegative, got {self.theta}")


@dataclass(frozen=True)
class GaussianTestChannel:
    """Auxiliary channel Y = alpha * X + S, S ~ N(0, xi)"""
    alpha: float
    xi: float

    def __post_init__(self):
        if not self.xi > 0:
            raise DomainError(f"xi must be positive, got {self.xi}")


# ============================================================================
# OPERATIONS
# ============================================================================

def capacity(ch, pb):
    """C(gamma|sigma2) = 1/2 ln(1 + gamma/sigma2) in nats"""
    return 0.5 * math.log1p(pb.gamma / ch.noise_variance)


def gaussian_mutual_information(input_law, tc):
    """I(q_X, q_{Y|X}) for the jointly Gaussian pair: 1/2 ln(1 + alpha^2 theta / xi)"""
    return 0.5 * math.log1p(tc.alpha ** 2 * input_law.theta / tc.xi)


def gaussian_output_variance(input_law, tc):
    """Variance of the test channel output q_Y"""
    return tc.alpha ** 2 * input_law.theta + tc.xi


def gaussian_conditional_divergence(input_law, tc, ch):
    """
    D(q_{Y|X} || W | q_X) between the test channel and the AWGN channel

    Closed form:
        1/2 (1 - alpha)^2 theta / sigma2 + 1/2 [xi/sigma2 - 1 + ln(sigma2/xi)]
    """
    s2 = ch.noise_variance
    r = tc.xi / s2
    mean_term = 0.5 * (1.0 - tc.alpha) ** 2 * input_law.theta / s2
    # r - 1 - ln r, written to keep precision near r = 1
    var_term = 0.5 * ((r - 1.0) - math.log1p(r - 1.0))
    return mean_term + max(var_term, 0.0)


def binary_entropy(p):
    """h(p) = -p ln p - (1-p) ln(1-p) with 0 ln 0 = 0"""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binary_entropy needs p in [0, 1], got {p}")
    return float(-xlogy(p, p) - xlogy(1.0 - p, 1.0 - p))


def positive_part(t):
    """[t]^+ = max(0, t)"""
    return max(0.0, t)


def nats_to_bits(x):
    return x / math.log(2.0)


def gaussian_log_pdf(x, variance):
    """Log density of N(0, variance), vectorised over x"""
    x = np.asarray(x, dtype=float)
    return -0.5 * np.log(2.0 * np.pi * variance) - x ** 2 / (2.0 * variance)
