from pathlib import Path

import pytest

from resolab.core import carleman, potentials

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture(scope="session")
def zero_pot():
    return potentials.make_potential("zero", 3, 1.0)


@pytest.fixture(scope="session")
def zero_params(zero_pot):
    return carleman.derive_constants(zero_pot, eta=1.0)


@pytest.fixture(scope="session")
def family_pots():
    return {name: potentials.make_potential(name, 3, 1.0) for name in potentials.FAMILIES}


@pytest.fixture(scope="session")
def family_params(family_pots):
    return {name: carleman.derive_constants(pot) for name, pot in family_pots.items()}


@pytest.fixture
def write_config(tmp_path):
    """Write a TOML body to a temp file and return its path."""

    def _write(body: str, name: str = "experiment.toml") -> Path:
        path = tmp_path / name
        path.write_text(body)
        return path

    return _write
