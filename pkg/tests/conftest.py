import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import obfarx as ox


@pytest.fixture(scope="session")
def plant4():
    """The fixed 4-state SISO plant shared by the rate and decay checks."""
    return ox.random_stable_plant(4, 7, rho=0.9)


@pytest.fixture(scope="session")
def plant4_kit(plant4):
    """Plant plus its white-noise loop, reference predictor, and closed loop."""
    plant, noise = plant4
    controller, ctrl_noise = ox.white_noise_controller(1, 1)
    kf = ox.design_kalman_predictor(plant, noise)
    closed = ox.close_loop(plant, noise, controller, ctrl_noise)
    return {
        "plant": plant,
        "noise": noise,
        "controller": controller,
        "ctrl_noise": ctrl_noise,
        "kf": kf,
        "closed": closed,
    }


def assert_allclose(actual, desired, rtol=1e-7, atol=0.0):
    np.testing.assert_allclose(actual, desired, rtol=rtol, atol=atol)
