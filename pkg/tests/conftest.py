"""Shared builders for small synthetic datasets used across the suite."""

import numpy as np
import pytest

from rulens.data import BINARY, CATEGORICAL, NUMERIC, REGRESSION, Column, Dataset


def make_numeric_dataset(n=60, p=4, seed=0, signal=True):
    """Small all-numeric regression set; y depends on x0, x1 when signal=True."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, p))
    if signal:
        y = 2.0 * X[:, 0] + (X[:, 1] > 0.0) - 0.5 * X[:, 0] * (X[:, 1] > 0.0) + 0.1 * rng.normal(size=n)
    else:
        y = rng.normal(size=n)
    cols = [Column(f"x{j}", NUMERIC, X[:, j].copy()) for j in range(p)]
    return Dataset(cols, y, REGRESSION)


def make_mixed_dataset(n=80, seed=0):
    """Two numeric variables plus one 4-level categorical driving the response."""
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, 1.0, n)
    x1 = rng.normal(size=n)
    codes = rng.integers(0, 4, n)
    effect = np.array([0.0, 1.5, -1.0, 3.0])
    y = x0 + effect[codes] + 0.05 * rng.normal(size=n)
    cols = [
        Column("x0", NUMERIC, x0),
        Column("x1", NUMERIC, x1),
        Column("cat", CATEGORICAL, codes.astype(np.int64), levels=["a", "b", "c", "d"]),
    ]
    return Dataset(cols, y, REGRESSION)


def make_binary_dataset(n=80, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 3))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] + 0.2 * rng.normal(size=n) > 0.0, 1.0, -1.0)
    cols = [Column(f"x{j}", NUMERIC, X[:, j].copy()) for j in range(3)]
    return Dataset(cols, y, BINARY)


@pytest.fixture
def numeric_data():
    return make_numeric_dataset()


@pytest.fixture
def mixed_data():
    return make_mixed_dataset()


@pytest.fixture
def binary_data():
    return make_binary_dataset()
