import numpy as np
import pytest

from bmcluster import PRESETS


def power_iteration(P, tol=1e-15, max_squarings=80):
    """Left fixed point of a stochastic matrix from high matrix powers.

    Squares the lazy chain until all rows agree, so ``2**k`` steps cost only
    ``k`` products; independent of any balance-equation solve.
    """
    P = np.asarray(P, dtype=float)
    # lazy chain: same fixed point, no periodicity
    M = 0.5 * (P + np.eye(P.shape[0]))
    for _ in range(max_squarings):
        M = M @ M
        M /= M.sum(axis=1, keepdims=True)
        if np.abs(M - M[0]).max() < tol:
            break
    return M.mean(axis=0)


def random_stochastic(rng, K, low=0.05):
    p = rng.uniform(low, 1.0, size=(K, K))
    return p / p.sum(axis=1, keepdims=True)


def random_alpha(rng, K, low=0.1):
    a = rng.uniform(low, 1.0, size=K)
    return a / a.sum()


def min_states(alpha):
    """Smallest n whose sorted partition gives every cluster two states."""
    return int(np.ceil(3.0 / np.min(alpha))) + len(alpha)


@pytest.fixture
def demo():
    return PRESETS["demo"]


@pytest.fixture
def spectral_model():
    return PRESETS["spectral"]


@pytest.fixture
def improvement_model():
    return PRESETS["improvement"]
