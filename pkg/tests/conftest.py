import numpy as np
import pytest

from rollwave.core import PhysicalParams, WaveKey
from rollwave.profile import solve_profile

MAIN_PARAMS = PhysicalParams(2.5, 0.04)
MAIN_KEY = WaveKey(0.16, 1.0)
# small-viscosity point where the Evans expansion is well conditioned
EVANS_PARAMS = PhysicalParams(3.0, 0.01)
EVANS_KEY = WaveKey(0.6, 1.0)


@pytest.fixture(scope="session")
def main_profile():
    return solve_profile(MAIN_PARAMS, MAIN_KEY, n=128)


@pytest.fixture(scope="session")
def evans_profile():
    return solve_profile(EVANS_PARAMS, EVANS_KEY, n=128)


@pytest.fixture(scope="session")
def macro_setup(main_profile):
    """Profile family and a short modulated Whitham trajectory."""
    from rollwave import modsim
    from rollwave.whitham1 import FluxModel, solve_whitham

    k, q = main_profile.key.k, main_profile.key.qbar
    X, k0, q0 = modsim.sinusoidal_modulation(k, q, 1.25, 32, 0.02, 0.02)
    model = FluxModel(main_profile, 0.04 * k, 0.04)
    traj = solve_whitham(model, k0, q0, 0.01, length=1.25, dt=0.01 / 40)
    return modsim.ProfileFamily(main_profile), traj


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
