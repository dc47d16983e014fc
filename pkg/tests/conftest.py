import numpy as np
import pytest

from scorecard.data import Dataset
from scorecard.formulate import default_epsilon
from scorecard.scoring import CoefficientSet

INTERCEPT = "(Intercept)"


def toy_dataset(features, labels, names=None):
    """Build a Dataset from a plain feature matrix (no intercept column)."""
    x = np.asarray(features, dtype=np.float64)
    body_names = names or [f"f{j}" for j in range(1, x.shape[1] + 1)]
    full = np.column_stack([np.ones(x.shape[0]), x])
    return Dataset(
        features=full,
        labels=np.asarray(labels, dtype=np.int64),
        feature_names=(INTERCEPT, *body_names),
    )


def random_tiny_instance(rng, n_max=20, p_max=4, lam=3, lattice_c0=False,
                         p_pos=0.5, allow_single_class=False):
    """(dataset, coeff_set, c0, eps) drawn the way the acceptance suite does."""
    n = int(rng.integers(4, n_max + 1))
    p = int(rng.integers(1, p_max + 1))
    x = rng.integers(0, 2, size=(n, p)).astype(float)
    y = rng.choice([-1, 1], size=n, p=[1.0 - p_pos, p_pos])
    if not allow_single_class and np.all(y == y[0]):
        y[0] = -y[0]
    ds = toy_dataset(x, y)
    cs = CoefficientSet.uniform(p, lam=lam, intercept=lam)
    if lattice_c0:
        c0 = float(rng.integers(1, n + 1)) / n
    else:
        c0 = float(rng.uniform(0.001, 1.0))
    eps = default_epsilon(c0, n, cs)
    return ds, cs, c0, eps


@pytest.fixture
def rng():
    return np.random.default_rng(0)
