import numpy as np
import pytest

from mvggm import Dimensions, SimulationSpec, simulate_dataset


@pytest.fixture
def small_dataset():
    """Two-session random-graph dataset, small enough for exhaustive checks."""
    spec = SimulationSpec(
        dims=Dimensions(m=2, n=(6, 8), p=12, q=8), kind="random", seed=11
    )
    return simulate_dataset(spec)


def max_abs(a, b=None):
    a = np.asarray(a, dtype=np.float64)
    if b is None:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return float(np.max(np.abs(a - np.asarray(b, dtype=np.float64))))
