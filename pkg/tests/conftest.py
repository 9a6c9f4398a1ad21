import os

import numpy as np
import pytest

from lionskit.evolution import preset_problem


@pytest.fixture(scope="session", autouse=True)
def prune_environment():
    delete_items = []
    for envvar in os.environ.keys():
        if envvar.startswith("LK_"):
            delete_items.append(envvar)
    for envvar in delete_items:
        del os.environ[envvar]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def decay():
    return preset_problem("decay")


@pytest.fixture
def forced_periodic():
    return preset_problem("forced-periodic")


@pytest.fixture(scope="session")
def decay_config() -> dict:
    return {
        "mode": "solve",
        "problem": {"preset": "decay"},
        "discretization": {"steps": 256, "theta": 0.5},
    }
