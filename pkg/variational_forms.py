"""
Variational forms of the exponent
=================================
Quadrature evaluation of the tilted functionals

    Omega^(mu,lam)(q_X, Q|sigma2)
        = log int int q_X(x) p_N(y-x)^(1+lam) e^(-mu lam x^2) / Q(y)^lam dx dy
    J^(mu,lam)(q_X|sigma2)
        = log int dy [ int dx q_X(x) {p_N(y-x) e^(-mu lam x^2)}^(1/(1-lam)) ]^(1-lam)

for densities held on quadrature grids, the tilted output density that
minimises Omega over Q, the Gaussian-pair closed forms, the saddle output,
and the G_OH / G_AR exponents maximised over the Gaussian input family.

All products are formed as sums of logs and reduced with logsumexp; the
tilt e^(-mu lam x^2) underflows long before anything else does.
"""

import csv
import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import logsumexp

from channel_core import DomainError, gaussian_log_pdf
from closed_form_exponent import TiltParams, zeta
from settings import get_settings

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-9


# ============================================================================
# QUADRATURE AND DENSITIES
# ============================================================================

@dataclass(frozen=True)
class QuadratureSpec:
    """Truncation half-width (in standard deviations), node count and rule"""
    half_width: float = 10.0
    nodes_per_axis: int = 400
    rule: str = 'gauss-legendre'

    def __post_init__(self):
        if self.rule not in ('gauss-legendre', 'trapezoid'):
            raise DomainError(f"Unknown quadrature rule: {self.rule}")
        if self.nodes_per_axis < 2 or self.half_width <= 0:
            raise DomainError("need nodes_per_axis >= 2 and half_width > 0")

    @classmethod
    def from_settings(cls, settings=None):
        settings = settings or get_settings()
        return cls(half_width=settings.half_width,
                   nodes_per_axis=settings.nodes_per_axis,
                   rule=settings.rule)

    def nodes(self, lo, hi):
        """Nodes and weights of the rule on [lo, hi]"""
        n = self.nodes_per_axis
        if self.rule == 'trapezoid':
            x = np.linspace(lo, hi, n)
            w = np.full(n, (hi - lo) / (n - 1))
            w[0] *= 0.5
            w[-1] *= 0.5
            return x, w
        knots, weights = np.polynomial.legendre.leggauss(n)
        return 0.5 * (hi - lo) * knots + 0.5 * (hi + lo), 0.5 * (hi - lo) * weights


def _default_quad(quad):
    return quad if quad is not None else QuadratureSpec.from_settings()


@dataclass(frozen=True, eq=False)
class DiscretizedDensity:
    """
    Probability density held on a grid

    weights are probability masses per node; rule_weights are the quadrature
    weights of the grid, so density values are weights / rule_weights.
    """
    grid: np.ndarray
    weights: np.ndarray
    rule_weights: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        rule_weights = np.asarray(self.rule_weights, dtype=float)
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'rule_weights', rule_weights)

        if grid.ndim != 1 or grid.shape != weights.shape or grid.shape != rule_weights.shape:
            raise DomainError("grid, weights and rule_weights must be 1-D and equally long")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(weights < 0) or np.any(rule_weights <= 0):
            raise DomainError("weights must be nonnegative and rule weights positive")
        if abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"weights sum to {weights.sum()}, not 1")

    @property
    def density(self):
        return self.weights / self.rule_weights

    @property
    def log_weights(self):
        with np.errstate(divide='ignore'):
            return np.log(self.weights)

    @property
    def log_density(self):
        return self.log_weights - np.log(self.rule_weights)

    @property
    def second_moment(self):
        return float(np.sum(self.weights * self.grid ** 2))

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.grid)))

    # ------------------------------------------------------------------
    # Factories
    # ------------------------------------------------------------------

    @classmethod
    def from_log_pdf(cls, log_pdf, lo, hi, quad=None):
        """Discretise a (possibly unnormalised) log density on [lo, hi]"""
        quad = _default_quad(quad)
        x, w = quad.nodes(lo, hi)
        log_mass = log_pdf(x) + np.log(w)
        mass = np.exp(log_mass - logsumexp(log_mass))
        return cls(grid=x, weights=mass / mass.sum(), rule_weights=w)

    @classmethod
    def gaussian(cls, theta, quad=None):
        """Zero-mean Gaussian q_{X,theta}; theta = 0 is the point mass at 0"""
        if theta < 0:
            raise DomainError(f"theta must be nonnegative, got {theta}")
        if theta == 0:
            return cls(grid=[0.0], weights=[1.0], rule_weights=[1.0])
        quad = _default_quad(quad)
        half = quad.half_width * math.sqrt(theta)
        return cls.from_log_pdf(lambda x: gaussian_log_pdf(x, theta), -half, half, quad)

    @classmethod
    def uniform(cls, a, b, quad=None):
        if not b > a:
            raise DomainError("uniform density needs b > a")
        return cls.from_log_pdf(lambda x: np.zeros_like(x), a, b, quad)

    @classmethod
    def mixture(cls, components, quad=None):
        """
        Gaussian mixture

        Args:
            components: iterable of (weight, mean, variance)
        """
        quad = _default_quad(quad)
        components = [(float(p), float(m), float(v)) for p, m, v in components]
        lo = min(m - quad.half_width * math.sqrt(v) for _, m, v in components)
        hi = max(m + quad.half_width * math.sqrt(v) for _, m, v in components)

        def log_pdf(x):
            terms = [math.log(p) + gaussian_log_pdf(x - m, v) for p, m, v in components]
            return logsumexp(np.vstack(terms), axis=0)

        return cls.from_log_pdf(log_pdf, lo, hi, quad)

    @classmethod
    def from_masses(cls, grid, weights):
        """Discrete distribution (point masses) on a grid"""
        weights = np.asarray(weights, dtype=float)
        return cls(grid=grid, weights=weights / weights.sum(), rule_weights=np.ones_like(weights))

    # ------------------------------------------------------------------
    # CSV debug format: node,weight
    # ------------------------------------------------------------------

    def write_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['node', 'weight'])
            for x, w in zip(self.grid, self.weights):
                writer.writerow([repr(float(x)), repr(float(w))])

    @classmethod
    def read_csv(cls, path):
        """
        Read a node,weight file

        Rule weights are not stored; trapezoid weights of the grid are used.
        """
        nodes, weights = [], []
        with open(path, 'r', newline='') as f:
            for row in csv.DictReader(f):
                nodes.append(float(row['node']))
                weights.append(float(row['weight']))

        grid = np.asarray(nodes)
        if grid.size == 1:
            rule = np.ones(1)
        else:
            gaps = np.diff(grid)
            rule = np.concatenate(([gaps[0]], gaps[:-1] + gaps[1:], [gaps[-1]])) / 2.0
        weights = np.asarray(weights)
        return cls(grid=grid, weights=weights / weights.sum(), rule_weights=rule)


def _output_grid(qx, lam, ch, quad):
    """
    y-grid for outputs of qx: the untilted spread theta + sigma2 inflated by (1+lam)
    """
    spread = math.sqrt(ch.noise_variance + (1.0 + lam) * qx.second_moment)
    half = qx.max_abs + quad.half_width * spread
    return quad.nodes(-half, half)


def _log_channel(x, y, ch):
    """log p_N(y - x) on the (x, y) outer grid"""
    return gaussian_log_pdf(y[None, :] - x[:, None], ch.noise_variance)


# ============================================================================
# FUNCTIONALS
# ============================================================================

def omega(qx, q_out, tp, ch):
    """Omega^(mu,lam)(q_X, Q|sigma2) by 2-D quadrature in log space"""
    if np.any(q_out.weights <= 0):
        raise DomainError("Q must be strictly positive on its grid")

    x, y = qx.grid, q_out.grid
    log_terms = (qx.log_weights[:, None]
                 + np.log(q_out.rule_weights)[None, :]
                 + (1.0 + tp.lam) * _log_channel(x, y, ch)
                 - tp.mu * tp.lam * x[:, None] ** 2
                 - tp.lam * q_out.log_density[None, :])
    return float(logsumexp(log_terms))


def j_functional(qx, tp_ar, ch, quad=None):
    """J^(mu,lam)(q_X|sigma2) for lam in [0, 1)"""
    lam = tp_ar.lam
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"J needs lambda in [0, 1), got {lam}")
    quad = _default_quad(quad)

    y, w = _output_grid(qx, lam / (1.0 - lam), ch, quad)
    x = qx.grid
    inner = logsumexp(qx.log_weights[:, None]
                      + (_log_channel(x, y, ch) - tp_ar.mu * lam * x[:, None] ** 2) / (1.0 - lam),
                      axis=0)
    return float(logsumexp(np.log(w) + (1.0 - lam) * inner))


def _tilted_output(qx, tp, ch, quad):
    y, w = _output_grid(qx, tp.lam, ch, quad)
    x = qx.grid
    log_tilt = logsumexp(qx.log_weights[:, None]
                         + (1.0 + tp.lam) * _log_channel(x, y, ch)
                         - tp.mu * tp.lam * x[:, None] ** 2,
                         axis=0) / (1.0 + tp.lam)
    log_mass = np.log(w) + log_tilt
    log_norm = logsumexp(log_mass)
    mass = np.exp(log_mass - log_norm)

    # Large lam pushes tail masses below the double range; keep Q > 0 on its grid
    keep = mass > 0
    if not np.all(keep):
        logger.debug(f"Tilted output: dropped {np.count_nonzero(~keep)} underflowed y-nodes (lam={tp.lam})")
        y, w, mass = y[keep], w[keep], mass[keep]
    return DiscretizedDensity(grid=y, weights=mass / mass.sum(), rule_weights=w), float(log_norm)


def optimal_tilted_output(qx, tp, ch, quad=None):
    """
    Q minimising Omega^(mu,lam)(q_X, .) for fixed q_X:
    Q(y) = kappa [int q_X(x) p_N(y-x)^(1+lam) e^(-mu lam x^2) dx]^(1/(1+lam))
    """
    return _tilted_output(qx, tp, ch, _default_quad(quad))[0]


def tilted_log_normaliser(qx, tp, ch, quad=None):
    """ln kappa^-1 of the tilted output; equals J^(mu, lam/(1+lam))(q_X)"""
    return _tilted_output(qx, tp, ch, _default_quad(quad))[1]


def min_omega_over_q(qx, tp, ch, quad=None):
    """min over Q of Omega^(mu,lam)(q_X, Q) = (1+lam) J^(mu, lam/(1+lam))(q_X)"""
    return omega(qx, optimal_tilted_output(qx, tp, ch, quad), tp, ch)


# ============================================================================
# GAUSSIAN FAMILY
# ============================================================================

def xi_of_theta(tp, theta):
    """xi(mu, lam, theta) = (1+lam) theta / (1 + 2 mu lam theta)"""
    if theta < 0:
        raise DomainError(f"theta must be nonnegative, got {theta}")
    return (1.0 + tp.lam) * theta / (1.0 + 2.0 * tp.mu * tp.lam * theta)


def gaussian_j(tp_ar, theta, ch):
    """
    J^(mu,lam)(q_{X,theta}) in closed form

    J^(mu,lam) = zeta^(mu,lam')(xi(mu,lam',theta)) / (1+lam'),  lam' = lam/(1-lam)
    """
    lam = tp_ar.lam
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"J needs lambda in [0, 1), got {lam}")
    tp = TiltParams(mu=tp_ar.mu, lam=lam / (1.0 - lam))
    return zeta(tp, xi_of_theta(tp, theta), ch) / (1.0 + tp.lam)


def underline_omega(tp, ch, xatol=1e-10):
    """
    max over 0 <= xi < (1+lam)/(2 mu lam) of zeta^(mu,lam)(xi|sigma2)

    Returns:
        (value, argmax xi)
    """
    if tp.lam == 0:
        return 0.0, 0.0
    if tp.mu <= 0:
        raise DomainError("underline Omega needs mu > 0")

    xi_sup = (1.0 + tp.lam) / (2.0 * tp.mu * tp.lam)
    res = minimize_scalar(lambda v: -zeta(tp, v, ch),
                          bounds=(0.0, xi_sup * (1.0 - 1e-12)),
                          method='bounded', options={'xatol': xatol})
    # zeta is concave; the bounded search never lands exactly on xi = 0
    if -res.fun <= 0.0:
        return 0.0, 0.0
    return float(-res.fun), float(res.x)


def saddle_eta(tp, ch):
    """eta(mu, lam) = 1/(2 mu) - sigma2/(1+lam), for mu in (0, (1+lam)/(2 sigma2)]"""
    bound = (1.0 + tp.lam) / (2.0 * ch.noise_variance)
    if not 0.0 < tp.mu <= bound * (1.0 + 1e-12):
        raise DomainError(f"saddle needs mu in (0, {bound}], got {tp.mu}")
    return max(0.0, 1.0 / (2.0 * tp.mu) - ch.noise_variance / (1.0 + tp.lam))


def gaussian_output_density(qx, tp, ch, out_var, quad=None):
    """
    Q = N(0, out_var) on a y-grid fitted to the Omega^(mu,lam) integrand of qx

    Each x-slice of the integrand is Gaussian in y with precision a - b,
    centred at x a/(a-b).
    """
    quad = _default_quad(quad)
    a = (1.0 + tp.lam) / ch.noise_variance
    b = tp.lam / out_var
    half = max(qx.max_abs * a / (a - b) + quad.half_width / math.sqrt(a - b),
               quad.half_width * math.sqrt(out_var))
    y, w = quad.nodes(-half, half)
    log_mass = gaussian_log_pdf(y, out_var) + np.log(w)
    mass = np.exp(log_mass - logsumexp(log_mass))
    return DiscretizedDensity(grid=y, weights=mass / mass.sum(), rule_weights=w)


def saddle_value(qx, tp, ch, quad=None):
    """
    Omega^(mu,lam)(q_X, N(0, eta + sigma2)) at the saddle eta

    The value does not depend on q_X: it equals zeta^(mu,lam)(eta).
    """
    eta = saddle_eta(tp, ch)
    q_out = gaussian_output_density(qx, tp, ch, eta + ch.noise_variance, quad)
    return omega(qx, q_out, tp, ch)


# ============================================================================
# EXPONENTS OVER THE GAUSSIAN FAMILY
# ============================================================================

def _oh_objective(mu, lam, R, pb, ch):
    omega_value, _ = underline_omega(TiltParams(mu=mu, lam=lam), ch)
    return (lam * (R - mu * pb.gamma) - omega_value) / (1.0 + lam)


def solve_g_oh(R, pb, ch, settings=None, restrict_mu=True):
    """
    sup over (mu, lam) of [lam (R - mu Gamma) - underline Omega^(mu,lam)] / (1+lam)

    mu is restricted to [0, (1+lam)/(2 sigma2)] unless restrict_mu is False,
    in which case the grid extends to twice that bound.

    Returns:
        dict with value, mu, lam
    """
    if R <= 0:
        raise DomainError(f"rate must be positive, got {R}")
    settings = settings or get_settings()
    s2 = ch.noise_variance
    size = settings.oh_grid
    t_max = 1.0 if restrict_mu else 2.0

    def mu_of(lam, t):
        return t * (1.0 + lam) / (2.0 * s2)

    # lam = 0 contributes 0 for every mu
    best = {'value': 0.0, 'mu': 0.0, 'lam': 0.0}
    for lam in np.geomspace(1e-3, 1e3, size):
        for t in np.linspace(t_max / size, t_max, size):
            value = _oh_objective(mu_of(lam, t), lam, R, pb, ch)
            if value > best['value']:
                best = {'value': value, 'mu': mu_of(lam, t), 'lam': float(lam)}

    if best['lam'] > 0:
        def negative(z):
            lam = math.exp(z[0])
            mu = math.exp(z[1])
            if restrict_mu:
                mu = min(mu, t_max * (1.0 + lam) / (2.0 * s2))
            return -_oh_objective(mu, lam, R, pb, ch)

        res = minimize(negative, x0=[math.log(best['lam']), math.log(best['mu'])],
                       method='Nelder-Mead',
                       options={'xatol': 1e-10, 'fatol': 1e-13, 'maxiter': 4000})
        if -res.fun > best['value']:
            lam = math.exp(res.x[0])
            mu = math.exp(res.x[1])
            if restrict_mu:
                mu = min(mu, (1.0 + lam) / (2.0 * s2))
            best = {'value': float(-res.fun), 'mu': mu, 'lam': lam}

    logger.debug(f"G_OH at R={R}: {best}")
    return best


def g_oh_numeric(R, pb, ch, settings=None, restrict_mu=True):
    """G_OH(R, Gamma|sigma2) over the Gaussian-attained underline Omega"""
    return solve_g_oh(R, pb, ch, settings, restrict_mu)['value']


def max_gaussian_j(tp_ar, ch):
    """
    max over theta >= 0 of J^(mu,lam)(q_{X,theta})

    Bounded search over s = theta/(1+theta) in [0, 1).

    Returns:
        (value, argmax theta)
    """
    if tp_ar.lam == 0:
        return 0.0, 0.0

    def negative(s):
        return -gaussian_j(tp_ar, s / (1.0 - s), ch)

    res = minimize_scalar(negative, bounds=(0.0, 1.0 - 1e-12), method='bounded',
                          options={'xatol': 1e-12})
    if -res.fun <= 0.0:
        return 0.0, 0.0
    return float(-res.fun), float(res.x / (1.0 - res.x))


def _ar_objective(mu, lam, R, pb, ch):
    j_value, _ = max_gaussian_j(TiltParams(mu=mu, lam=lam), ch)
    return lam * (R - mu * pb.gamma) - j_value


def solve_g_ar(R, pb, ch, settings=None):
    """
    sup over mu >= 0, lam in [0, 1) of lam (R - mu Gamma) - max_theta J^(mu,lam)(q_{X,theta})

    Returns:
        dict with value, mu, lam
    """
    if R <= 0:
        raise DomainError(f"rate must be positive, got {R}")
    settings = settings or get_settings()
    s2 = ch.noise_variance
    size = settings.oh_grid

    # lam crowds towards both ends of (0, 1)
    half = max(size // 2, 1)
    lam_grid = np.concatenate([np.geomspace(1e-3, 0.5, half),
                               1.0 - np.geomspace(0.5, 1e-3, half + 1)[1:]])

    best = {'value': 0.0, 'mu': 0.0, 'lam': 0.0}
    for lam in lam_grid:
        # Omega-side bound (1+lam')/(2 sigma2) with lam' = lam/(1-lam)
        mu_bound = 1.0 / ((1.0 - lam) * 2.0 * s2)
        for t in np.linspace(1.0 / size, 1.0, size):
            value = _ar_objective(t * mu_bound, lam, R, pb, ch)
            if value > best['value']:
                best = {'value': value, 'mu': t * mu_bound, 'lam': float(lam)}

    if best['lam'] > 0:
        def negative(z):
            lam = 1.0 / (1.0 + math.exp(-z[0]))
            if lam >= 1.0:
                return math.inf
            return -_ar_objective(math.exp(z[1]), lam, R, pb, ch)

        lam0 = best['lam']
        res = minimize(negative, x0=[math.log(lam0 / (1.0 - lam0)), math.log(best['mu'])],
                       method='Nelder-Mead',
                       options={'xatol': 1e-10, 'fatol': 1e-13, 'maxiter': 4000})
        if -res.fun > best['value']:
            best = {'value': float(-res.fun), 'mu': math.exp(res.x[1]),
                    'lam': 1.0 / (1.0 + math.exp(-res.x[0]))}

    logger.debug(f"G_AR at R={R}: {best}")
    return best


def g_ar_numeric(R, pb, ch, settings=None):
    """G_AR(R, Gamma|sigma2) over Gaussian inputs"""
    return solve_g_ar(R, pb, ch, settings)['value']
