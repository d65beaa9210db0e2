from __future__ import annotations

import numpy as np
import pytest

from aflsim.data import Dataset, synth_blobs


def fd_grad(f, z: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    g = np.zeros_like(z, dtype=np.float64)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp.flat[i] += eps
        zm.flat[i] -= eps
        g.flat[i] = (f(zp) - f(zm)) / (2.0 * eps)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / denom


@pytest.fixture(scope="session")
def toy_dataset() -> Dataset:
    return synth_blobs(class_count=3, per_class=60, dim=4, seed=7, spread=0.05)
