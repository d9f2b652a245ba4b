"""
Settings for the AWGN exponent toolkit
Defaults, .env / environment overrides and key=value config files
"""

import os
import logging
from dataclasses import dataclass, fields, replace

from dotenv import load_dotenv

from channel_core import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """
    Every tunable of the toolkit in one table.

    Tolerances are in nats (rates/exponents) or parameter units.
    """
    output_dir: str = '.'
    log_level: str = 'INFO'
    workers: int = 1

    # Desk-scale caps for simulation
    max_codewords: int = 1_000_000
    max_block_length: int = 64
    max_trials: int = 10_000_000
    sim_block_size: int = 1024

    # Quadrature
    half_width: float = 10.0
    nodes_per_axis: int = 400
    rule: str = 'gauss-legendre'

    # Tolerances
    rate_tol: float = 1e-10
    param_tol: float = 1e-8
    route_tol: float = 1e-4
    identity_tol: float = 1e-6

    # Solver sizes
    rho_nu_grid: int = 200
    oh_grid: int = 24
    dk_starts: int = 8

    # Crosscheck
    crosscheck_ratios: tuple = (0.25, 1.0, 4.0)
    crosscheck_rates: int = 8


# Environment variables recognised (after .env is loaded)
ENV_KEYS = {
    'EXPONENT_OUTPUT_DIR': 'output_dir',
    'EXPONENT_LOG_LEVEL': 'log_level',
    'EXPONENT_WORKERS': 'workers',
}


def _coerce(name, raw):
    """Convert a string value to the type of the Settings field"""
    default = Settings.__dataclass_fields__[name].default
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(',') if v.strip())
    except ValueError as e:
        raise ConfigError(f"Invalid value for {name}: {raw!r} ({e})")
    return raw.strip()


def load_config_file(path):
    """
    Load a key=value config file

    Blank lines and lines starting with '#' are skipped.

    Returns:
        dict of raw string values keyed by setting name
    """
    values = {}
    known = {f.name for f in fields(Settings)}

    try:
        f = open(path, 'r')
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")

    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue

            if '=' not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")

            key, value = (part.strip() for part in line.split('=', 1))
            if key not in known:
                logger.warning(f"{path}:{lineno}: unknown setting '{key}' ignored")
                continue
            values[key] = value

    return values


def _validate(settings):
    if settings.workers < 1:
        raise ConfigError("workers must be >= 1")
    if settings.nodes_per_axis < 2:
        raise ConfigError("nodes_per_axis must be >= 2")
    if settings.half_width <= 0:
        raise ConfigError("half_width must be positive")
    if settings.rule not in ('gauss-legendre', 'trapezoid'):
        raise ConfigError(f"Unknown quadrature rule: {settings.rule}")
    if settings.sim_block_size < 1:
        raise ConfigError("sim_block_size must be >= 1")
    if settings.log_level.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ConfigError(f"Unknown log level: {settings.log_level}")
    return settings


def build_settings(config_path=None, overrides=None):
    """
    Build settings with precedence
    defaults < environment (.env) < config file < overrides
    """
    load_dotenv()
    values = {}

    for env_key, name in ENV_KEYS.items():
        raw = os.environ.get(env_key)
        if raw:
            values[name] = _coerce(name, raw)

    if config_path is None:
        config_path = os.environ.get('EXPONENT_CONFIG')

    if config_path:
        for name, raw in load_config_file(config_path).items():
            values[name] = _coerce(name, raw)
        logger.debug(f"Loaded config file {config_path}")

    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    return _validate(replace(Settings(), **values))


# Singleton instance
_settings_instance = None

def get_settings(config_path=None, overrides=None):
    """Get or create the settings singleton; explicit arguments build a fresh one"""
    global _settings_instance
    if config_path is not None or overrides:
        return build_settings(config_path, overrides)
    if _settings_instance is None:
        _settings_instance = build_settings()
    return _settings_instance


def reset_settings():
    """Forget the cached settings (tests, config reloads)"""
    global _settings_instance
    _settings_instance = None
