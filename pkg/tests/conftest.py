"""
Configuración compartida de pytest.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Agregar el directorio src al path
sys.path.append(str(Path(__file__).resolve().parents[1] / "src"))

from config.networkConfig import load_network_config  # noqa: E402
from network.parameters import init_params  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="ejecuta las corridas de escritorio (minutos)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: corridas de escritorio, requieren --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="usar --runslow para ejecutarla")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def _reproducible_env(monkeypatch, tmp_path):
    monkeypatch.setenv("VMI_RECORD_WALL_TIME", "false")
    monkeypatch.setenv("VMI_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("VMI_THREADS", "1")


@pytest.fixture(scope="session")
def tiny_config():
    return load_network_config("tiny")


@pytest.fixture
def tiny_params(tiny_config):
    return init_params(tiny_config, seed=3, n_sequences=2, sequence_ids=[0, 1])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
