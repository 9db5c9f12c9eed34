"""Shared pytest fixtures and test utilities for ldsmarginals.

Provides the synthetic targets used throughout the suite, regions and
lattices at the sizes the experiments use, and helpers that copy YAML
config fixtures from tests/data/configs into a temporary directory.
Targets whose mode search is slow are session-scoped.
"""
import shutil
from pathlib import Path

import numpy as np
import pytest

from ldsmarginals.pointset import IntegrationRegion, generate_korobov
from ldsmarginals.targets import (build_region, find_mode_hessian, make_bimodal,
                                  make_gaussian, make_skewed)


# Test data directory
TEST_DATA_DIR = Path(__file__).parent / "data"
CONFIG_DIR = TEST_DATA_DIR / "configs"

SKEWED_SHAPES = [1, 2, 3, 4, 5]
BIMODAL_AXIS = 1


@pytest.fixture
def test_data_dir():
    """Provide the path to the test data directory."""
    return TEST_DATA_DIR


@pytest.fixture(scope="session")
def gaussian2():
    """Independent standard normal in two dimensions."""
    return make_gaussian([0.0, 0.0], np.eye(2))


@pytest.fixture(scope="session")
def gaussian5():
    """Independent standard normal in five dimensions."""
    return make_gaussian(np.zeros(5), np.eye(5))


@pytest.fixture(scope="session")
def skewed5():
    """Log-Gamma axes with shapes 1..5."""
    return make_skewed(5, SKEWED_SHAPES)


@pytest.fixture(scope="session")
def bimodal5():
    """Standard normal axes with a separation-6 mixture on the second axis."""
    return make_bimodal(5, BIMODAL_AXIS, 6.0, 0.5)


@pytest.fixture(scope="session")
def skewed5_mode(skewed5):
    """Mode summary of the skewed target."""
    return find_mode_hessian(skewed5)


@pytest.fixture(scope="session")
def skewed5_region(skewed5_mode):
    """Mode +/- 3 sd region of the skewed target."""
    return build_region(skewed5_mode, 3.0)


@pytest.fixture(scope="session")
def gaussian5_region(gaussian5):
    """Mode +/- 3 sd region of the five-dimensional Gaussian."""
    return build_region(find_mode_hessian(gaussian5), 3.0)


@pytest.fixture(scope="session")
def bimodal_region():
    """Explicit region wide enough to hold both modes of the mixture axis."""
    lower = np.full(5, -3.0)
    upper = np.full(5, 3.0)
    lower[BIMODAL_AXIS], upper[BIMODAL_AXIS] = -4.0, 4.0
    return IntegrationRegion(lower, upper)


@pytest.fixture(scope="session")
def lattice512():
    """The five-dimensional extensible lattice with N=512, alpha=19."""
    return generate_korobov(512, 5, 19, extensible=True)


@pytest.fixture
def temp_config_from_fixture(tmp_path):
    """Helper to copy a config fixture to a temporary path.

    Returns a function that takes a config name and returns the temp path.
    """
    def _copy_config(config_name: str) -> Path:
        config_path = CONFIG_DIR / f"{config_name}.yaml"
        if not config_path.exists():
            raise FileNotFoundError(
                f"Config fixture '{config_name}' not found at "
                f"{config_path}"
            )

        temp_config_path = tmp_path / f"{config_name}.yaml"
        shutil.copy2(config_path, temp_config_path)
        return temp_config_path

    return _copy_config
