import numpy as np
import pytest

from lssfind import Dataset, RfConfig, fit_forest


def random_dataset(rng: np.random.Generator, n: int, p: int) -> Dataset:
    x = rng.random((n, p))
    # a mild signal keeps trees non-trivial without being degenerate
    y = (x[:, 0] <= 0.5).astype(float) * (x[:, min(1, p - 1)] <= 0.5) \
        + 0.1 * rng.standard_normal(n)
    return Dataset(x, y)


def random_config(rng: np.random.Generator, p: int, n_trees: int = 3) -> RfConfig:
    return RfConfig(
        n_trees=n_trees,
        mtry=int(rng.integers(1, p + 1)),
        epsilon=float(rng.choice([0.0, 0.001, 0.01, 0.05])),
        min_child_samples=int(rng.integers(1, 4)),
        bootstrap=bool(rng.integers(0, 2)),
        seed=int(rng.integers(0, 2 ** 31)),
    )


@pytest.fixture(scope="session")
def small_forest():
    rng = np.random.default_rng(7)
    ds = random_dataset(rng, 200, 4)
    return fit_forest(ds, RfConfig(n_trees=10, mtry=2, seed=3)), ds
