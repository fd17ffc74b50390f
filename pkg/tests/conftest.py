import numpy as np
import pytest

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
PLUS_Y = np.array([[1, -1j], [1j, 1]], dtype=complex) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
