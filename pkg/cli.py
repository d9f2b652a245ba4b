#!/usr/bin/env python3
"""
AWGN correct-decoding exponent toolkit
Command-line entry point: capacity, exponent, curve, crosscheck, simulate

Results go to stdout (or --output) as text, JSON or CSV; logs go to stderr.
"""

import os
import io
import math
import sys
import csv
import json
import argparse
import logging

from channel_core import (
    Channel,
    ConfigError,
    DegenerateEstimateError,
    DomainError,
    GaussianTestChannel,
    IdentityViolation,
    PowerBudget,
    SizeError,
    SolverError,
    capacity,
    nats_to_bits,
)
from closed_form_exponent import (
    below_capacity,
    exponent_at_rate,
    exponent_curve,
    solve_rho_nu,
    stationary_point,
)
from coding_sim import (
    change_of_measure_diagnostic,
    generate_random_codebook,
    simulate_correct_probability,
)
from crosscheck import SUITES, CrossCheck
from dk_exponent import solve_dk
from settings import get_settings
from variational_forms import solve_g_ar, solve_g_oh

logger = logging.getLogger(__name__)

METHODS = ('parametric', 'opt', 'dk', 'variational', 'arimoto')

CURVE_COLUMNS = ('nu', 'R_nats', 'G_nats', 'rho_star', 'G_over_R')

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_IDENTITY = 4


# ============================================================================
# EXPONENT ROUTES
# ============================================================================

def run_method(method, R, pb, ch, settings):
    """
    Exponent by one route with the solver's diagnostics

    Returns:
        (G in nats, diagnostics dict)
    """
    if method == 'parametric':
        G = exponent_at_rate(R, pb, ch, settings)
        if below_capacity(R, pb, ch):
            return G, {'nu_star': 0.0, 'rho_star': 0.0}
        point = stationary_point(R, pb, ch, settings)
        return G, {'nu_star': point.nu, 'rho_star': point.rho}

    if method == 'opt':
        sol = solve_rho_nu(R, pb, ch, settings)
        return sol.value, {'rho': sol.rho, 'nu': sol.nu, 'branch': sol.branch,
                           'iterations': sol.iterations}

    if method == 'dk':
        sol = solve_dk(R, pb, ch, settings)
        return sol.value, {'theta': sol.params.theta, 'alpha': sol.params.alpha,
                           'xi': sol.params.xi, 'mutual_information': sol.mutual_information,
                           'divergence': sol.divergence, 'branch': sol.branch,
                           'start': sol.start}

    if method == 'variational':
        best = solve_g_oh(R, pb, ch, settings)
        return best['value'], {'mu': best['mu'], 'lam': best['lam']}

    if method == 'arimoto':
        best = solve_g_ar(R, pb, ch, settings)
        return best['value'], {'mu': best['mu'], 'lam': best['lam']}

    raise DomainError(f"Unknown method: {method}")


# ============================================================================
# OUTPUT
# ============================================================================

def _output_path(path, settings):
    """Bare file names land in the configured output directory"""
    if path and not os.path.dirname(path):
        return os.path.join(settings.output_dir, path)
    return path


def _format_text(payload, indent=0):
    lines = []
    for key, value in payload.items():
        if isinstance(value, dict):
            lines.append(' ' * indent + f"{key}:")
            lines.append(_format_text(value, indent + 2))
        elif isinstance(value, float):
            lines.append(' ' * indent + f"{key}: {value:.10g}")
        else:
            lines.append(' ' * indent + f"{key}: {value}")
    return '\n'.join(lines)


def _format_csv(rows, columns):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([f"{row[c]:.10g}" if isinstance(row[c], float) else row[c]
                         for c in columns])
    return buffer.getvalue()


def emit(text, args, settings):
    path = _output_path(args.output, settings)
    if path:
        with open(path, 'w') as f:
            f.write(text)
        logger.info(f"✅ Wrote {path}")
    else:
        sys.stdout.write(text)


def render(payload, args, settings):
    if args.format == 'json':
        emit(json.dumps(payload) + '\n', args, settings)
    else:
        emit(_format_text(payload) + '\n', args, settings)


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_capacity(args, settings):
    pb, ch = PowerBudget(args.gamma), Channel(args.sigma2)
    C = capacity(ch, pb)
    render({
        'capacity_nats': C,
        'capacity_bits': nats_to_bits(C),
        'gamma': pb.gamma,
        'sigma2': ch.noise_variance,
    }, args, settings)
    return EXIT_OK


def cmd_exponent(args, settings):
    pb, ch = PowerBudget(args.gamma), Channel(args.sigma2)
    if args.rate <= 0:
        raise DomainError(f"rate must be positive, got {args.rate}")

    methods = METHODS if args.method == 'all' else (args.method,)
    results = {}
    for method in methods:
        G, diagnostics = run_method(method, args.rate, pb, ch, settings)
        logger.debug(f"{method}: G={G:.10g} {diagnostics}")
        results[method] = {'G_nats': G, 'diagnostics': diagnostics}

    payload = {
        'rate_nats': args.rate,
        'gamma': pb.gamma,
        'sigma2': ch.noise_variance,
        'capacity_nats': capacity(ch, pb),
        'below_capacity': below_capacity(args.rate, pb, ch),
        'method': args.method,
    }
    if args.method == 'all':
        values = [r['G_nats'] for r in results.values()]
        payload['G_nats'] = results['parametric']['G_nats']
        payload['max_discrepancy'] = max(values) - min(values)
        payload['methods'] = results
    else:
        payload['G_nats'] = results[args.method]['G_nats']
        payload['diagnostics'] = results[args.method]['diagnostics']

    if args.format == 'csv':
        rows = [{'method': m, 'G_nats': r['G_nats']} for m, r in results.items()]
        emit(_format_csv(rows, ('method', 'G_nats')), args, settings)
    else:
        render(payload, args, settings)
    return EXIT_OK


def cmd_curve(args, settings):
    pb, ch = PowerBudget(args.gamma), Channel(args.sigma2)
    rows = exponent_curve(args.nu_max, args.steps, pb, ch)
    logger.info(f"Curve: {len(rows)} points up to nu={args.nu_max}")

    if args.format == 'json':
        emit(json.dumps([{c: row[c] for c in CURVE_COLUMNS} for row in rows]) + '\n',
             args, settings)
    else:
        emit(_format_csv(rows, CURVE_COLUMNS), args, settings)
    return EXIT_OK


def cmd_crosscheck(args, settings):
    check = CrossCheck(settings, perturb_zeta=args.perturb_zeta, seed=args.seed)
    check.run(args.suite)
    check.report()

    if args.format == 'text':
        render({name: result['passed'] for name, result in check.results.items()}, args, settings)
    else:
        emit(json.dumps(check.to_dict()) + '\n', args, settings)

    check.raise_on_failure()
    return EXIT_OK


def cmd_simulate(args, settings):
    pb, ch = PowerBudget(args.gamma), Channel(args.sigma2)
    theta = pb.gamma if args.theta is None else args.theta

    cb = generate_random_codebook(args.n, args.rate, theta, pb, args.seed, settings)
    result = simulate_correct_probability(cb, ch, args.trials, args.seed, settings)

    payload = result.to_dict()
    payload['exponent_at_rate'] = (0.0 if cb.rate == 0
                                   else exponent_at_rate(cb.rate, pb, ch, settings))
    # JSON has no infinity
    std_err = result.exponent_std_err
    payload['exponent_std_err'] = None if math.isinf(std_err) else std_err
    payload['codebook'] = cb.power_stats()

    if args.test_channel:
        alpha, xi = args.test_channel
        diag = change_of_measure_diagnostic(cb, GaussianTestChannel(alpha, xi), ch,
                                            args.trials, args.seed, settings)
        payload['change_of_measure'] = diag.to_dict()

    render(payload, args, settings)
    return EXIT_OK


# ============================================================================
# ENTRY POINT
# ============================================================================

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--gamma', type=float, default=1.0, help='Power budget Gamma (default: 1.0)')
    common.add_argument('--sigma2', type=float, default=1.0, help='Noise variance (default: 1.0)')
    common.add_argument('--config', type=str, help='key=value config file')
    common.add_argument('--output', type=str, help='Write results to this file')
    common.add_argument('--format', choices=('text', 'json', 'csv'), default='text',
                        help='Output format (default: text)')
    common.add_argument('--workers', type=int, help='Worker threads')
    common.add_argument('--verbose', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(description='AWGN correct-decoding exponent toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('capacity', parents=[common], help='Channel capacity in nats and bits')

    p = sub.add_parser('exponent', parents=[common], help='Exponent at one rate')
    p.add_argument('--rate', type=float, required=True, help='Rate in nats')
    p.add_argument('--method', choices=METHODS + ('all',), default='parametric')

    p = sub.add_parser('curve', parents=[common], help='Parametric exponent curve as CSV')
    p.add_argument('--nu-max', type=float, required=True, help='Last nu of the sweep (< nu0)')
    p.add_argument('--steps', type=int, default=100)

    p = sub.add_parser('crosscheck', parents=[common], help='Route and identity suites')
    p.add_argument('--suite', action='append', choices=list(SUITES),
                   help='Suite to run (repeatable; default: all)')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--perturb-zeta', type=float, default=0.0,
                   help='Offset added to every zeta oracle (harness self-test)')

    p = sub.add_parser('simulate', parents=[common], help='Monte Carlo correct probability')
    p.add_argument('--n', type=int, required=True, help='Block length')
    p.add_argument('--rate', type=float, required=True, help='Rate in nats')
    p.add_argument('--trials', type=int, default=10000)
    p.add_argument('--seed', type=int, default=1)
    p.add_argument('--theta', type=float, help='Codeword letter variance (default: gamma)')
    p.add_argument('--test-channel', type=float, nargs=2, metavar=('ALPHA', 'XI'),
                   help='Also run the change-of-measure diagnostic for Y = ALPHA X + N(0, XI)')

    return parser


COMMANDS = {
    'capacity': cmd_capacity,
    'exponent': cmd_exponent,
    'curve': cmd_curve,
    'crosscheck': cmd_crosscheck,
    'simulate': cmd_simulate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr
    )

    try:
        settings = get_settings(config_path=args.config, overrides={'workers': args.workers})
        if not args.verbose:
            logging.getLogger().setLevel(settings.log_level.upper())
        return COMMANDS[args.command](args, settings)

    except (ConfigError, DomainError, SizeError) as e:
        logger.error(f"❌ {e}")
        return EXIT_USAGE
    except (SolverError, DegenerateEstimateError) as e:
        logger.error(f"❌ Solver failure: {e}")
        for key, value in getattr(e, 'diagnostics', {}).items():
            logger.error(f"  • {key}: {value}")
        return EXIT_SOLVER
    except IdentityViolation as e:
        logger.error(f"❌ Identity violated: {e.identity} ({e})")
        return EXIT_IDENTITY


if __name__ == '__main__':
    sys.exit(main())
