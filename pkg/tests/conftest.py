import numpy as np
import pytest

from otfs_isac.config import SystemConfig


@pytest.fixture
def table_cfg():
    """Reference configuration: 80x80 grid, 2.5 MHz spacing, 28 GHz, kappa 16."""
    return SystemConfig(m_tau=80, n_nu=80, delta_f=2.5e6, f_c=28e9, kappa=16, mu=16)


@pytest.fixture
def small_cfg():
    """Small collision-free reduced-rate configuration (M=6, kappa=2: the
    active subcarriers {0,2,4} fold injectively onto the 3 reduced bins)."""
    return SystemConfig(m_tau=6, n_nu=6, delta_f=1e6, f_c=1e9, kappa=2, mu=2)


@pytest.fixture
def dense_cfg():
    """Full-rate 4x4 configuration for dense-matrix oracles."""
    return SystemConfig(m_tau=4, n_nu=4, delta_f=1e6, f_c=1e9, kappa=1, mu=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
