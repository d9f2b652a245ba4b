"""
Closed-form correct-decoding exponent
=====================================
zeta, L in the (mu, lambda) and (rho, nu) parameterisations, the nu_0 root,
the parametric exponent curve, and a convex solver on F = -L using the
analytic gradient and Hessian.

Feasible region in (rho, nu):   0 <= nu/(1+nu) <= rho < 1
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import xlogy

from channel_core import DomainError, SolverError, binary_entropy, capacity
from settings import get_settings

logger = logging.getLogger(__name__)

# Value of L outside its domain (the nu -> 0 limit with rho > 0)
INFEASIBLE = -math.inf

# Slack used when testing rho >= nu/(1+nu)
_FEAS_SLACK = 1e-12


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class TiltParams:
    """Lagrange multiplier mu (power cost) and tilting exponent lam"""
    mu: float
    lam: float

    def __post_init__(self):
        if self.mu < 0 or self.lam < 0:
            raise DomainError(f"mu and lambda must be nonnegative, got ({self.mu}, {self.lam})")


@dataclass(frozen=True)
class RhoNuParams:
    """rho = lam/(1+lam), nu = 2 lam mu sigma2/(1+lam)"""
    rho: float
    nu: float

    def __post_init__(self):
        if not (0.0 <= self.rho < 1.0) or self.nu < 0:
            raise DomainError(f"infeasible (rho, nu) = ({self.rho}, {self.nu})")
        if self.nu / (1.0 + self.nu) > self.rho + _FEAS_SLACK:
            raise DomainError(
                f"infeasible (rho, nu) = ({self.rho}, {self.nu}): need rho >= nu/(1+nu)"
            )

    @property
    def interior(self):
        return self.nu > 0 and 0 < self.rho < 1


@dataclass(frozen=True)
class ExponentPoint:
    rate: float
    exponent: float
    nu: float


@dataclass(frozen=True)
class RhoNuSolution:
    """Maximiser of L over the feasible region and the branch that won"""
    rho: float
    nu: float
    value: float
    branch: str
    iterations: int = 0


# ============================================================================
# CLOSED FORMS
# ============================================================================

def zeta(tp, eta, ch):
    """
    zeta^(mu,lambda)(eta|sigma2)
        = lam/2 ln(1 + eta/sigma2) + 1/2 ln(1 - lam/(1+lam) * 2 mu eta)
    """
    if eta < 0:
        raise DomainError(f"eta must be nonnegative, got {eta}")
    arg = 1.0 - tp.lam / (1.0 + tp.lam) * 2.0 * tp.mu * eta
    if arg <= 0:
        raise DomainError(f"zeta undefined: 1 - (lam/(1+lam)) 2 mu eta = {arg} <= 0")
    return 0.5 * tp.lam * math.log1p(eta / ch.noise_variance) + 0.5 * math.log(arg)


def big_l_mu_lambda(tp, R, pb, ch):
    """
    L^(mu,lambda)(R, Gamma|sigma2) via the expanded two-log form

    Stays defined for mu > (1+lam)/(2 sigma2), where the zeta route would
    need a negative eta.
    """
    if tp.lam == 0:
        return 0.0
    if tp.mu <= 0:
        raise DomainError("L^(mu,lambda) needs mu > 0")

    s2 = ch.noise_variance
    rho = tp.lam / (1.0 + tp.lam)
    nu = 2.0 * tp.mu * tp.lam * s2 / (1.0 + tp.lam)
    return (rho * (R - tp.mu * pb.gamma)
            - rho * 0.5 * math.log(rho + 1.0 / (2.0 * s2 * tp.mu))
            - (1.0 - rho) * 0.5 * (math.log(1.0 - rho) + math.log1p(nu)))


def rho_nu_from_mu_lambda(tp, ch):
    rho = tp.lam / (1.0 + tp.lam)
    nu = 2.0 * tp.lam * tp.mu * ch.noise_variance / (1.0 + tp.lam)
    return RhoNuParams(rho=rho, nu=nu)


def mu_lambda_from_rho_nu(rn, ch):
    if rn.rho == 0:
        if rn.nu > 0:
            raise DomainError("mu undefined at rho = 0 with nu > 0")
        return TiltParams(mu=0.0, lam=0.0)
    return TiltParams(mu=rn.nu / (2.0 * rn.rho * ch.noise_variance),
                      lam=rn.rho / (1.0 - rn.rho))


def big_l_rho_nu(rn, R, pb, ch):
    """
    L^(rho,nu) = rho R - (nu/2) Gamma/sigma2 - 1/2 ln(1+nu) + (rho/2) ln nu + 1/2 h(rho)

    At nu = 0 only rho = 0 is finite (value 0); otherwise INFEASIBLE.
    """
    if rn.nu == 0:
        return 0.0 if rn.rho == 0 else INFEASIBLE
    snr = pb.gamma / ch.noise_variance
    return (rn.rho * R - 0.5 * rn.nu * snr - 0.5 * math.log1p(rn.nu)
            + 0.5 * rn.rho * math.log(rn.nu) + 0.5 * binary_entropy(rn.rho))


def _big_l_grid(rho, nu, R, snr):
    """Vectorised L over arrays, INFEASIBLE outside the region"""
    with np.errstate(divide='ignore', invalid='ignore'):
        h = -xlogy(rho, rho) - xlogy(1.0 - rho, 1.0 - rho)
        value = (rho * R - 0.5 * nu * snr - 0.5 * np.log1p(nu)
                 + 0.5 * xlogy(rho, nu) + 0.5 * h)
    feasible = nu / (1.0 + nu) <= rho + _FEAS_SLACK
    value = np.where(feasible, value, INFEASIBLE)
    # nu = 0 with rho > 0 diverges to -inf; xlogy gives 0*log0 = 0 only at rho = 0
    value = np.where((nu == 0) & (rho > 0), INFEASIBLE, value)
    return value


# ============================================================================
# PARAMETRIC FORM
# ============================================================================

def nu_zero(pb, ch):
    """Unique positive root of nu0 (1 + nu0) = sigma2/Gamma"""
    c = ch.noise_variance / pb.gamma
    # (-1 + sqrt(1+4c))/2 without cancellation
    return 2.0 * c / (1.0 + math.sqrt(1.0 + 4.0 * c))


def _rate_of_nu(nu, snr):
    return 0.5 * (math.log1p(snr * (1.0 + nu)) - math.log1p(-snr * nu * (1.0 + nu)))


def _rate_derivative(nu, snr):
    den = 1.0 - snr * nu * (1.0 + nu)
    return 0.5 * (snr / (1.0 + snr * (1.0 + nu)) + snr * (1.0 + 2.0 * nu) / den)


def _exponent_of_nu(nu, snr):
    return max(0.0, -0.5 * nu * snr - 0.5 * math.log1p(-snr * nu * (1.0 + nu)))


def parametric_point(nu, pb, ch):
    """
    Point (R(nu), G(nu)) of the exponent curve, nu in [0, nu0)

        R = 1/2 ln[(1 + s(1+nu)) / (1 - s nu (1+nu))]
        G = -nu s/2 - 1/2 ln[1 - s nu (1+nu)]        with s = Gamma/sigma2
    """
    nu0 = nu_zero(pb, ch)
    if not 0.0 <= nu < nu0:
        raise DomainError(f"nu must lie in [0, {nu0}), got {nu}")
    snr = pb.gamma / ch.noise_variance
    return ExponentPoint(rate=_rate_of_nu(nu, snr), exponent=_exponent_of_nu(nu, snr), nu=nu)


def below_capacity(R, pb, ch):
    """True when R <= C, where the exponent is reported as 0"""
    return R <= capacity(ch, pb)


def _solve_nu(R, pb, ch, rate_tol):
    """Invert the strictly increasing map nu -> R(nu) on [0, nu0)"""
    snr = pb.gamma / ch.noise_variance
    nu0 = nu_zero(pb, ch)

    hi = nu0 * (1.0 - 1e-9)
    if _rate_of_nu(hi, snr) < R:
        hi = nu0 * (1.0 - 1e-15)
        if _rate_of_nu(hi, snr) < R:
            raise SolverError(f"rate {R} beyond the reach of the parametric curve",
                              {'nu0': nu0, 'max_rate': _rate_of_nu(hi, snr)})

    nu = brentq(lambda v: _rate_of_nu(v, snr) - R, 0.0, hi,
                xtol=1e-14, rtol=4 * np.finfo(float).eps)

    # Newton polish, guarded to stay inside the bracket
    for _ in range(5):
        gap = _rate_of_nu(nu, snr) - R
        if abs(gap) < rate_tol:
            break
        step = gap / _rate_derivative(nu, snr)
        candidate = nu - step
        if not 0.0 <= candidate < hi:
            break
        nu = candidate

    return nu


def exponent_at_rate(R, pb, ch, settings=None):
    """
    Optimal correct-decoding exponent G(R, Gamma|sigma2)

    Returns 0 for R <= C (see below_capacity).
    """
    if R <= 0:
        raise DomainError(f"rate must be positive, got {R}")
    if below_capacity(R, pb, ch):
        return 0.0
    settings = settings or get_settings()
    nu = _solve_nu(R, pb, ch, settings.rate_tol)
    return _exponent_of_nu(nu, pb.gamma / ch.noise_variance)


def exponent_curve(nu_max, steps, pb, ch):
    """
    Equally spaced sweep of the parametric curve, nu = 0 .. nu_max

    Returns:
        list of dicts with nu, R_nats, G_nats, rho_star, G_over_R
    """
    nu0 = nu_zero(pb, ch)
    if not 0.0 <= nu_max < nu0:
        raise DomainError(f"nu_max must lie in [0, {nu0}), got {nu_max}")
    if steps < 1:
        raise DomainError("steps must be >= 1")

    snr = pb.gamma / ch.noise_variance
    rows = []
    for k in range(steps + 1):
        nu = nu_max * k / steps
        point = parametric_point(nu, pb, ch)
        rows.append({
            'nu': nu,
            'R_nats': point.rate,
            'G_nats': point.exponent,
            'rho_star': nu / (1.0 + nu) + nu * snr,
            'G_over_R': point.exponent / point.rate,
        })
    return rows


# ============================================================================
# CONVEX SOLVER ON F = -L
# ============================================================================

def f_gradient(rn, R, pb, ch):
    """(dF/drho, dF/dnu) at an interior point"""
    if not rn.interior:
        raise DomainError("gradient needs nu > 0 and 0 < rho < 1")
    snr = pb.gamma / ch.noise_variance
    d_rho = -R - 0.5 * math.log(rn.nu) + 0.5 * math.log(rn.rho / (1.0 - rn.rho))
    d_nu = 0.5 * (snr + 1.0 / (1.0 + rn.nu) - rn.rho / rn.nu)
    return d_rho, d_nu


def f_hessian(rn):
    """Hessian of F; it does not depend on R, Gamma or sigma2"""
    if not rn.interior:
        raise DomainError("Hessian needs nu > 0 and 0 < rho < 1")
    rho, nu = rn.rho, rn.nu
    h_rr = 1.0 / (2.0 * rho * (1.0 - rho))
    h_rn = -1.0 / (2.0 * nu)
    h_nn = 0.5 * (-1.0 / (1.0 + nu) ** 2 + rho / nu ** 2)
    return np.array([[h_rr, h_rn], [h_rn, h_nn]])


def hessian_determinant_factor(rn):
    """
    |B| = [rho^2/nu^2 - 1/(1+nu)^2] / (rho (1-rho)) = 4 det f_hessian(rn)

    Nonnegative on the feasible region, zero on rho = nu/(1+nu).
    """
    if not rn.interior:
        raise DomainError("determinant needs nu > 0 and 0 < rho < 1")
    rho, nu = rn.rho, rn.nu
    return (rho ** 2 / nu ** 2 - 1.0 / (1.0 + nu) ** 2) / (rho * (1.0 - rho))


def stationary_point(R, pb, ch, settings=None):
    """
    Minimiser of F for R > C

        rho* = nu*/(1+nu*) + nu* Gamma/sigma2,  nu* solves R(nu*) = R
    """
    if below_capacity(R, pb, ch):
        raise DomainError(f"stationary point needs R > C, got R = {R}")
    settings = settings or get_settings()
    nu = _solve_nu(R, pb, ch, settings.rate_tol)
    snr = pb.gamma / ch.noise_variance
    return RhoNuParams(rho=nu / (1.0 + nu) + nu * snr, nu=nu)


def _feasible(rho, nu):
    return nu > 0 and 0 < rho < 1 and nu / (1.0 + nu) <= rho


def _newton_refine(rho, nu, R, pb, ch, param_tol, max_iter=100):
    """Damped Newton on F from an interior start; F is convex on the region"""
    def f_value(r, v):
        return -big_l_rho_nu(RhoNuParams(r, v), R, pb, ch)

    current = f_value(rho, nu)
    for iteration in range(1, max_iter + 1):
        rn = RhoNuParams(rho, nu)
        grad = np.array(f_gradient(rn, R, pb, ch))
        hess = f_hessian(rn)
        try:
            step = -np.linalg.solve(hess, grad)
            if grad @ step >= 0:
                step = -grad
        except np.linalg.LinAlgError:
            step = -grad

        t = 1.0
        while t > 1e-16:
            r_new, v_new = rho + t * step[0], nu + t * step[1]
            if _feasible(r_new, v_new):
                candidate = f_value(r_new, v_new)
                if candidate <= current + 1e-4 * t * (grad @ step):
                    break
            t *= 0.5
        else:
            logger.debug(f"Newton line search stalled at iteration {iteration}")
            return rho, nu, iteration

        rho, nu, current = r_new, v_new, candidate
        if np.max(np.abs(t * step)) < param_tol:
            return rho, nu, iteration

    return rho, nu, max_iter


def solve_rho_nu(R, pb, ch, settings=None):
    """
    Maximise L^(rho,nu) over the feasible region

    Coarse grid, damped Newton refinement from the best interior cell, and a
    1-D search along the boundary rho = nu/(1+nu). The branch that wins is
    recorded in the result.
    """
    if R <= 0:
        raise DomainError(f"rate must be positive, got {R}")
    settings = settings or get_settings()
    snr = pb.gamma / ch.noise_variance
    nu0 = nu_zero(pb, ch)
    size = settings.rho_nu_grid

    rho_axis = np.arange(size) / size
    nu_axis = nu0 * np.arange(size) / size
    rho_grid, nu_grid = np.meshgrid(rho_axis, nu_axis, indexing='ij')
    values = _big_l_grid(rho_grid, nu_grid, R, snr)

    # Corner (0, 0) is always feasible with value 0
    best = RhoNuSolution(rho=0.0, nu=0.0, value=0.0, branch='corner')

    interior = values.copy()
    interior[(nu_grid == 0) | (rho_grid == 0)] = INFEASIBLE
    interior[nu_grid / (1.0 + nu_grid) >= rho_grid] = INFEASIBLE
    if np.isfinite(interior).any():
        i, j = np.unravel_index(np.argmax(interior), interior.shape)
        logger.debug(f"Grid winner rho={rho_axis[i]:.4f} nu={nu_axis[j]:.4f} "
                     f"L={interior[i, j]:.6g}")
        rho, nu, iterations = _newton_refine(rho_axis[i], nu_axis[j], R, pb, ch,
                                             settings.param_tol)
        value = big_l_rho_nu(RhoNuParams(rho, nu), R, pb, ch)
        if value > best.value:
            best = RhoNuSolution(rho=rho, nu=nu, value=value, branch='interior',
                                 iterations=iterations)

    # Boundary rho = nu/(1+nu)
    def negative_boundary(v):
        return -big_l_rho_nu(RhoNuParams(v / (1.0 + v), v), R, pb, ch)

    res = minimize_scalar(negative_boundary, bounds=(1e-300, nu0), method='bounded',
                          options={'xatol': settings.param_tol})
    if res.success and -res.fun > best.value + settings.param_tol:
        best = RhoNuSolution(rho=res.x / (1.0 + res.x), nu=res.x, value=-res.fun,
                             branch='boundary', iterations=res.nfev)

    logger.debug(f"rho-nu optimum at R={R}: {best}")
    return best


def optimize_rho_nu(R, pb, ch, settings=None):
    """G(R) as max over the feasible (rho, nu) region of L^(rho,nu)"""
    return solve_rho_nu(R, pb, ch, settings).value
