#!/usr/bin/env python3
"""
Tests for settings: defaults, config files, environment and overrides
"""

import logging
from pathlib import Path

import pytest

from channel_core import ConfigError
from settings import (
    ENV_KEYS,
    Settings,
    build_settings,
    get_settings,
    load_config_file,
    reset_settings,
)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in list(ENV_KEYS) + ['EXPONENT_CONFIG']:
        monkeypatch.delenv(key, raising=False)
    reset_settings()
    yield
    reset_settings()


def write_config(tmp_path, text):
    path = tmp_path / 'exponent.conf'
    path.write_text(text)
    return path


# ============================================================================
# CONFIG FILES
# ============================================================================

def test_defaults():
    s = Settings()
    assert s.workers == 1
    assert s.nodes_per_axis == 400
    assert s.rule == 'gauss-legendre'
    assert s.crosscheck_ratios == (0.25, 1.0, 4.0)
    assert s.route_tol == 1e-4


def test_load_config_file_skips_comments_and_blank_lines(tmp_path):
    path = write_config(tmp_path, "# comment\n\nworkers = 3\n  rule=trapezoid  \n")
    assert load_config_file(path) == {'workers': '3', 'rule': 'trapezoid'}


def test_unknown_setting_is_ignored_with_a_warning(tmp_path, caplog):
    path = write_config(tmp_path, "workers = 2\ncolour = blue\n")
    with caplog.at_level(logging.WARNING, logger='settings'):
        values = load_config_file(path)
    assert values == {'workers': '2'}
    assert "unknown setting 'colour'" in caplog.text


def test_malformed_line_raises(tmp_path):
    path = write_config(tmp_path, "workers 2\n")
    with pytest.raises(ConfigError, match=':1:'):
        load_config_file(path)


def test_values_are_coerced_to_field_types(tmp_path):
    path = write_config(tmp_path, "half_width = 8\nnodes_per_axis = 128\ncrosscheck_ratios = 0.5, 2\n")
    s = build_settings(path)
    assert s.half_width == 8.0 and isinstance(s.half_width, float)
    assert s.nodes_per_axis == 128
    assert s.crosscheck_ratios == (0.5, 2.0)


@pytest.mark.parametrize('text', [
    "workers = many\n",
    "workers = 0\n",
    "rule = simpson\n",
    "log_level = LOUD\n",
    "nodes_per_axis = 1\n",
])
def test_invalid_values_raise(tmp_path, text):
    with pytest.raises(ConfigError):
        build_settings(write_config(tmp_path, text))


def test_sample_config_matches_defaults():
    sample = Path(__file__).parent / 'exponent.conf'
    assert build_settings(sample) == Settings()


# ============================================================================
# PRECEDENCE
# ============================================================================

def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv('EXPONENT_WORKERS', '2')
    monkeypatch.setenv('EXPONENT_OUTPUT_DIR', '/tmp/results')
    s = build_settings()
    assert s.workers == 2
    assert s.output_dir == '/tmp/results'


def test_config_file_overrides_environment(monkeypatch, tmp_path):
    monkeypatch.setenv('EXPONENT_WORKERS', '2')
    path = write_config(tmp_path, "workers = 3\n")
    assert build_settings(path).workers == 3

    monkeypatch.setenv('EXPONENT_CONFIG', str(path))
    assert build_settings().workers == 3


def test_overrides_win(monkeypatch, tmp_path):
    monkeypatch.setenv('EXPONENT_WORKERS', '2')
    path = write_config(tmp_path, "workers = 3\n")
    assert build_settings(path, overrides={'workers': 5}).workers == 5
    assert build_settings(path, overrides={'workers': None}).workers == 3


# ============================================================================
# SINGLETON
# ============================================================================

def test_get_settings_is_cached():
    assert get_settings() is get_settings()


def test_explicit_arguments_bypass_the_cache():
    cached = get_settings()
    fresh = get_settings(overrides={'workers': 4})
    assert fresh.workers == 4
    assert get_settings() is cached


def test_reset_settings_rebuilds(monkeypatch):
    first = get_settings()
    monkeypatch.setenv('EXPONENT_WORKERS', '6')
    assert get_settings() is first

    reset_settings()
    assert get_settings().workers == 6
