import numpy as np
import pytest

from spinchain import ChainModel, Envelope


@pytest.fixture
def model3():
    return ChainModel(N=3, T=np.pi)


@pytest.fixture
def envelopes(model3):
    return (Envelope(bbar=5.0, T=model3.T), Envelope(bbar=3.0, T=model3.T))


def make_envelopes(T):
    return (Envelope(bbar=5.0, T=T), Envelope(bbar=3.0, T=T))


def basis_state(n, k):
    e = np.zeros(n, dtype=complex)
    e[k] = 1.0
    return e


def smooth_control_values(grid, T, scale, rng, n_modes=4):
    """Random low-order sine sums per channel; smooth relative to the grid."""
    vals = np.zeros((grid.size, 2))
    for l in range(2):
        for k in range(1, n_modes + 1):
            vals[:, l] += rng.uniform(-1.0, 1.0) * np.sin(k * np.pi * grid / T)
        vals[:, l] *= scale[l] / n_modes
    return vals
