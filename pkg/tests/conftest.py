import numpy as np
import pytest

from rotor import design_protocol

# Exact closed forms for the (n1, n2) = (1, 2), theta_f = pi/2 design:
# kappa_-^2 = 39 - 2 sqrt(105), kappa_+^2 = 39 + 2 sqrt(105).
KAPPA_MINUS = float(np.sqrt(39 - 2 * np.sqrt(105)))
KAPPA_PLUS = float(np.sqrt(39 + 2 * np.sqrt(105)))


@pytest.fixture(scope="session")
def row1_protocol():
    """Reference protocol: omega1 = 1 (unit 2*pi kHz), pi/2 rotation, (1, 2)."""
    return design_protocol(1.0, np.pi / 2, 1, 2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
