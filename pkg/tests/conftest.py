import numpy as np
import pytest

from langfit import DriftModel, SimConfig, simulate_path
from langfit.timeseries import Series


@pytest.fixture(scope="session")
def well_path() -> Series:
    """300-point q=2 series fluctuating in a stable well near P=2."""
    model = DriftModel(alphas=(2.0, -1.0), sigma=np.sqrt(0.0025))
    path = simulate_path(SimConfig(model=model, s0=2.0,
                                   grid=np.arange(300) * 0.25, seed=7))
    assert isinstance(path, Series)
    return path


@pytest.fixture(scope="session")
def gbm_path() -> Series:
    """1000-point q=1 series with gentle positive drift."""
    model = DriftModel(alphas=(0.002,), sigma=0.02)
    path = simulate_path(SimConfig(model=model, s0=100.0,
                                   grid=np.arange(1000, dtype=float), seed=11))
    assert isinstance(path, Series)
    return path


def make_path(phi, s0, grid, seed) -> Series:
    path = simulate_path(SimConfig(model=DriftModel.from_phi(phi), s0=s0,
                                   grid=np.asarray(grid, dtype=float), seed=seed))
    assert isinstance(path, Series)
    return path
