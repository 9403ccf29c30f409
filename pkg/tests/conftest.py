import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zskl import data  # noqa: E402

SCHEMA_DIR = Path(data.__file__).parent / "schemas"


def benchmark(seed=0, noise=0.05, center_attributes=True):
    """Default synthetic benchmark: C=10, 30 per class, d=20, d_attr=5, 6/2/2 class split."""
    ds = data.generate_synthetic(10, 30, 20, 5, noise, seed)
    ds = replace(ds, split=data.class_split(10, 0.6, 0.2, seed, seen_test_fraction=0.2))
    return data.prepare(ds, center_attributes=center_attributes)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bench0():
    return benchmark(0)


@pytest.fixture
def small_ds():
    X = np.arange(24, dtype=float).reshape(4, 6) / 7.0
    labels = np.array([1, 1, 2, 2, 3, 3])
    A = np.array([[1.0, 0.0, 2.0], [0.5, 1.0, -1.0]])
    return data.Dataset(features=X, labels=labels, attributes=A)
