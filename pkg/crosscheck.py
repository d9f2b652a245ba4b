#!/usr/bin/env python3
"""
Numerical cross-checks of the exponent toolkit
Runs every route to the exponent against the others and checks the
functional identities each route relies on.
"""

import math
import logging
from datetime import datetime

import numpy as np

from channel_core import Channel, IdentityViolation, PowerBudget, capacity
from closed_form_exponent import (
    RhoNuParams,
    TiltParams,
    big_l_rho_nu,
    exponent_at_rate,
    f_gradient,
    f_hessian,
    hessian_determinant_factor,
    optimize_rho_nu,
    parametric_point,
    zeta,
)
from dk_exponent import g_dk
from settings import get_settings
from variational_forms import (
    DiscretizedDensity,
    QuadratureSpec,
    g_ar_numeric,
    g_oh_numeric,
    gaussian_output_density,
    j_functional,
    min_omega_over_q,
    omega,
    saddle_eta,
    saddle_value,
    xi_of_theta,
)

logger = logging.getLogger(__name__)

# Suite name -> method, in reporting order
SUITES = {
    'endpoint': 'check_endpoint',
    'routes': 'check_routes',
    'lmSdd': 'check_gaussian_pair',
    'AssdZ': 'check_tilted_minimiser',
    'Aggd': 'check_saddle',
    'calculus': 'check_calculus',
    'shape': 'check_shape',
}

ENDPOINT_RATIOS = (0.1, 0.25, 1.0, 4.0, 10.0)


class CrossCheck:
    """Run identity suites and collect one result per suite"""

    def __init__(self, settings=None, perturb_zeta=0.0, seed=0):
        self.settings = settings or get_settings()
        self.perturb_zeta = perturb_zeta
        self.seed = seed
        self.quad = QuadratureSpec.from_settings(self.settings)
        self.results = {}

    def _rng(self, suite):
        # One stream per suite so suites can run alone with identical draws
        return np.random.default_rng([self.seed, list(SUITES).index(suite)])

    def _zeta_oracle(self, tp, eta, ch):
        return zeta(tp, eta, ch) + self.perturb_zeta

    def _channels(self):
        """(PowerBudget, Channel) pairs for every configured Gamma/sigma2 ratio"""
        ch = Channel(1.0)
        return [(PowerBudget(float(r)), ch) for r in self.settings.crosscheck_ratios]

    def _record(self, name, errors, tolerance, detail=''):
        max_error = float(max(errors)) if errors else 0.0
        passed = bool(errors) and max_error < tolerance
        self.results[name] = {
            'passed': passed,
            'max_error': max_error,
            'tolerance': tolerance,
            'detail': detail,
        }
        return self.results[name]

    def run(self, suites=None):
        """Run the named suites (all by default) in reporting order"""
        names = list(SUITES) if suites is None else [s for s in SUITES if s in suites]
        unknown = set(suites or ()) - set(SUITES)
        if unknown:
            raise ValueError(f"Unknown crosscheck suites: {sorted(unknown)}")

        for name in names:
            logger.info(f"Running suite {name}...")
            getattr(self, SUITES[name])()
        return self.results

    # ------------------------------------------------------------------
    # Suites
    # ------------------------------------------------------------------

    def check_endpoint(self):
        """parametric_point(0) = (C, 0)"""
        errors = []
        ch = Channel(1.0)
        for ratio in ENDPOINT_RATIOS:
            pb = PowerBudget(ratio)
            point = parametric_point(0.0, pb, ch)
            errors.append(abs(point.rate - capacity(ch, pb)))
            errors.append(abs(point.exponent))
        return self._record('endpoint', errors, 1e-12)

    def route_values(self, R, pb, ch):
        """G at R by every route"""
        return {
            'parametric': exponent_at_rate(R, pb, ch, self.settings),
            'opt': optimize_rho_nu(R, pb, ch, self.settings),
            'dk': g_dk(R, pb, ch, self.settings),
            'variational': g_oh_numeric(R, pb, ch, self.settings),
            'arimoto': g_ar_numeric(R, pb, ch, self.settings),
        }

    def check_routes(self):
        """Closed-form routes agree to route_tol/10, variational ones to route_tol"""
        tol = self.settings.route_tol
        exact = ('parametric', 'opt', 'dk')
        errors = []
        worst = ''
        for pb, ch in self._channels():
            C = capacity(ch, pb)
            count = self.settings.crosscheck_rates
            for k in range(1, count + 1):
                R = C + 1.2 * k / count
                values = self.route_values(R, pb, ch)
                spread_exact = max(values[m] for m in exact) - min(values[m] for m in exact)
                spread_all = max(values.values()) - min(values.values())
                # Scale the closed-form spread so one tolerance covers both
                error = max(spread_exact * 10.0, spread_all)
                if not errors or error > max(errors):
                    worst = f"Gamma={pb.gamma} R={R:.6f} {values}"
                errors.append(error)
        return self._record('routes', errors, tol, worst)

    def check_gaussian_pair(self):
        """Omega(q_{X,theta}, N(0, xi + sigma2)) = zeta(xi) with xi = xi(mu, lam, theta)"""
        rng = self._rng('lmSdd')
        ch = Channel(1.0)
        errors = []
        for _ in range(10):
            tp = TiltParams(mu=rng.uniform(0.2, 1.0), lam=rng.uniform(0.1, 4.0))
            theta = rng.uniform(0.2, 3.0)
            xi = xi_of_theta(tp, theta)
            qx = DiscretizedDensity.gaussian(theta, self.quad)
            q_out = gaussian_output_density(qx, tp, ch, xi + ch.noise_variance, self.quad)
            errors.append(abs(omega(qx, q_out, tp, ch) - self._zeta_oracle(tp, xi, ch)))
        return self._record('lmSdd', errors, self.settings.identity_tol)

    def _test_densities(self):
        q = self.quad
        return {
            'gaussian': DiscretizedDensity.gaussian(1.0, q),
            'uniform': DiscretizedDensity.uniform(-2.0, 2.0, q),
            'bimodal': DiscretizedDensity.mixture([(0.5, -1.5, 0.3), (0.5, 1.5, 0.3)], q),
            'skewed': DiscretizedDensity.mixture([(0.7, -0.5, 0.5), (0.3, 1.5, 0.2)], q),
            'discrete': DiscretizedDensity.from_masses([-1.0, 0.0, 2.0], [0.3, 0.5, 0.2]),
        }

    def check_tilted_minimiser(self):
        """min_Q Omega(q_X, Q) = (1+lam) J^(mu, lam/(1+lam))(q_X)"""
        rng = self._rng('AssdZ')
        ch = Channel(1.0)
        densities = self._test_densities()
        errors = []
        draws = [TiltParams(mu=rng.uniform(0.05, 1.0), lam=rng.uniform(0.1, 4.0)) for _ in range(10)]
        # steep tilts, where the output tails underflow
        draws += [TiltParams(mu=0.3, lam=10.0), TiltParams(mu=0.3, lam=20.0)]
        for tp in draws:
            tp_ar = TiltParams(mu=tp.mu, lam=tp.lam / (1.0 + tp.lam))
            for name in ('gaussian', 'uniform', 'bimodal'):
                qx = densities[name]
                lhs = min_omega_over_q(qx, tp, ch, self.quad)
                rhs = (1.0 + tp.lam) * j_functional(qx, tp_ar, ch, self.quad)
                errors.append(abs(lhs - rhs))
        return self._record('AssdZ', errors, self.settings.identity_tol)

    def check_saddle(self):
        """Omega at the saddle output is zeta(eta) for every input density"""
        rng = self._rng('Aggd')
        ch = Channel(1.0)
        densities = list(self._test_densities().values())
        errors = []
        for _ in range(5):
            lam = rng.uniform(0.2, 3.0)
            mu = rng.uniform(0.2, 1.0) * (1.0 + lam) / (2.0 * ch.noise_variance)
            tp = TiltParams(mu=mu, lam=lam)
            oracle = self._zeta_oracle(tp, saddle_eta(tp, ch), ch)
            values = [saddle_value(qx, tp, ch, self.quad) for qx in densities]
            errors.append(max(values) - min(values))
            errors.append(max(abs(v - oracle) for v in values))
        return self._record('Aggd', errors, self.settings.identity_tol)

    def check_calculus(self):
        """Analytic gradient and Hessian of F = -L against central differences"""
        rng = self._rng('calculus')
        ch = Channel(1.0)
        pb = PowerBudget(1.0)
        step = 1e-6
        errors = []

        def f(rho, nu, R):
            return -big_l_rho_nu(RhoNuParams(rho, nu), R, pb, ch)

        for k in range(100):
            nu = rng.uniform(0.05, 2.0)
            lo = nu / (1.0 + nu)
            rho = lo + (1.0 - lo) * rng.uniform(0.1, 0.9)
            R = rng.uniform(0.0, 2.0)
            d_rho, d_nu = f_gradient(RhoNuParams(rho, nu), R, pb, ch)
            fd_rho = (f(rho + step, nu, R) - f(rho - step, nu, R)) / (2 * step)
            fd_nu = (f(rho, nu + step, R) - f(rho, nu - step, R)) / (2 * step)
            errors.append(abs(fd_rho - d_rho) / max(1.0, abs(d_rho)))
            errors.append(abs(fd_nu - d_nu) / max(1.0, abs(d_nu)))

            if k < 50:
                hess = f_hessian(RhoNuParams(rho, nu))
                g_rp = f_gradient(RhoNuParams(rho + step, nu), R, pb, ch)
                g_rm = f_gradient(RhoNuParams(rho - step, nu), R, pb, ch)
                g_np = f_gradient(RhoNuParams(rho, nu + step), R, pb, ch)
                g_nm = f_gradient(RhoNuParams(rho, nu - step), R, pb, ch)
                fd = np.array([[g_rp[0] - g_rm[0], g_np[0] - g_nm[0]],
                               [g_rp[1] - g_rm[1], g_np[1] - g_nm[1]]]) / (2 * step)
                errors.append(float(np.max(np.abs(fd - hess) / np.maximum(1.0, np.abs(hess)))))
                errors.append(max(0.0, -hessian_determinant_factor(RhoNuParams(rho, nu)) - 1e-10))

        # |B| vanishes on rho = nu/(1+nu)
        for nu in np.linspace(0.1, 2.0, 10):
            det = hessian_determinant_factor(RhoNuParams(nu / (1.0 + nu), nu))
            errors.append(0.0 if abs(det) < 1e-10 else math.inf)
        return self._record('calculus', errors, 1e-5)

    def check_shape(self):
        """Monotone in R, nonincreasing in Gamma, convex in R, and G <= R"""
        rng = self._rng('shape')
        violations = 0
        worst = 0.0
        for _ in range(100):
            ch = Channel(rng.uniform(0.5, 2.0))
            pb = PowerBudget(ch.noise_variance * math.exp(rng.uniform(math.log(0.1), math.log(10.0))))
            C = capacity(ch, pb)
            r1, r2 = np.sort(C + rng.uniform(0.01, 1.5, size=2))
            g1 = exponent_at_rate(r1, pb, ch, self.settings)
            g2 = exponent_at_rate(r2, pb, ch, self.settings)
            g_mid = exponent_at_rate(0.5 * (r1 + r2), pb, ch, self.settings)
            g_more_power = exponent_at_rate(r1, PowerBudget(pb.gamma * 1.5), ch, self.settings)

            gaps = [
                g1 - g2 if r2 > r1 else 0.0,
                g_mid - 0.5 * (g1 + g2),
                g2 - r2,
                g_more_power - g1,
            ]
            worst = max(worst, *gaps)
            violations += sum(1 for gap in gaps if gap > 1e-10)

        return self._record('shape', [float(violations)], 0.5,
                            f"{violations} violations, worst excess {worst:.3g}")

    # ------------------------------------------------------------------
    # Reporting
    # ------------------------------------------------------------------

    @property
    def passed(self):
        return bool(self.results) and all(r['passed'] for r in self.results.values())

    def report(self):
        """Log the suite results"""
        logger.info("\n" + "="*60)
        logger.info("CROSSCHECK REPORT")
        logger.info("="*60)
        logger.info(f"Run time: {datetime.now().isoformat()}")
        logger.info(f"Gamma/sigma2 ratios: {self.settings.crosscheck_ratios}")
        logger.info("")

        for name, result in self.results.items():
            status = "✅ PASS" if result['passed'] else "❌ FAIL"
            logger.info(f"{name}: {status}")
            logger.info(f"  • max error {result['max_error']:.3e} (tolerance {result['tolerance']:.0e})")
            if result['detail']:
                logger.info(f"  • {result['detail']}")

        logger.info("="*60)

    def raise_on_failure(self):
        for name, result in self.results.items():
            if not result['passed']:
                raise IdentityViolation(name, f"max error {result['max_error']:.3e} "
                                              f"exceeds {result['tolerance']:.0e}")

    def to_dict(self):
        return {
            'passed': self.passed,
            'perturb_zeta': self.perturb_zeta,
            'suites': self.results,
        }
