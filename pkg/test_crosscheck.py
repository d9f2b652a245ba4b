#!/usr/bin/env python3
"""
Tests for the crosscheck harness: every suite passes on the real oracles
and fails loudly on a perturbed one
"""

import logging
from dataclasses import replace

import pytest

from channel_core import Channel, IdentityViolation, PowerBudget
from crosscheck import SUITES, CrossCheck
from settings import Settings

FAST_SUITES = ['endpoint', 'lmSdd', 'AssdZ', 'Aggd', 'calculus', 'shape']


@pytest.mark.parametrize('suite', FAST_SUITES)
def test_suite_passes(suite):
    check = CrossCheck(Settings())
    results = check.run([suite])
    assert list(results) == [suite]
    assert results[suite]['passed'], results[suite]


def test_routes_agree_on_a_small_sweep():
    settings = replace(Settings(), crosscheck_ratios=(1.0,), crosscheck_rates=2)
    check = CrossCheck(settings)
    result = check.run(['routes'])['routes']
    assert result['passed'], result['detail']


def test_route_values_cover_every_route():
    check = CrossCheck(Settings())
    values = check.route_values(1.0, PowerBudget(1.0), Channel(1.0))
    assert list(values) == ['parametric', 'opt', 'dk', 'variational', 'arimoto']
    assert max(values.values()) - min(values.values()) < 1e-4


@pytest.mark.slow
def test_full_run_passes():
    check = CrossCheck(Settings())
    check.run()
    assert list(check.results) == list(SUITES)
    assert check.passed
    check.raise_on_failure()


@pytest.mark.parametrize('suite', ['lmSdd', 'Aggd'])
def test_perturbed_oracle_is_caught(suite):
    check = CrossCheck(Settings(), perturb_zeta=1e-3)
    check.run([suite])
    assert not check.passed
    assert check.results[suite]['max_error'] >= 9e-4

    with pytest.raises(IdentityViolation) as excinfo:
        check.raise_on_failure()
    assert excinfo.value.identity == suite


def test_same_seed_same_draws():
    first = CrossCheck(Settings(), seed=4).run(['lmSdd'])
    second = CrossCheck(Settings(), seed=4).run(['lmSdd'])
    assert first == second


def test_report_and_dict(caplog):
    check = CrossCheck(Settings())
    check.run(['endpoint'])
    with caplog.at_level(logging.INFO, logger='crosscheck'):
        check.report()
    assert 'CROSSCHECK REPORT' in caplog.text
    assert 'endpoint: ✅ PASS' in caplog.text

    payload = check.to_dict()
    assert payload['passed'] is True
    assert payload['perturb_zeta'] == 0.0
    assert list(payload['suites']) == ['endpoint']


def test_empty_run_does_not_pass():
    assert not CrossCheck(Settings()).passed


def test_unknown_suite():
    with pytest.raises(ValueError):
        CrossCheck(Settings()).run(['nope'])
