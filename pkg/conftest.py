"""
Shared pytest fixtures for the lab test suites
"""

import pytest
from click.testing import CliRunner

import config as lab_config
from engines.reduction import build_reduction, random_multi_indices


@pytest.fixture(autouse=True)
def testing_profile():
    """Run every test under the testing profile and restore the defaults afterwards"""
    lab_config.activate('testing')
    yield
    lab_config.activate('default')


@pytest.fixture(scope='session')
def small_sequence():
    return random_multi_indices(15, 2, 2, seed=7)


@pytest.fixture(scope='session')
def small_plan(small_sequence):
    """RC plan over 15 two-dimensional indices with coordinates in [-2, 2]"""
    return build_reduction(small_sequence, 15)


@pytest.fixture
def runner():
    return CliRunner()
