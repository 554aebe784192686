"""Synthetic benchmark generators and scaled evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BINARY, NUMERIC, Column, Dataset, quantile

DISCRETE_TARGET = "discrete_target"
LINEAR_PLUS_BUMPS = "linear_plus_bumps"


@dataclass
class SynthSpec:
    generator: str
    n_rows: int
    n_cols: int
    signal_to_noise: float = 2.0
    seed: int = 0
    # The printed second term of the discrete target lacks a square on its
    # exponent argument; "verbatim" keeps it as printed, "squared" adds it.
    second_term: str = "verbatim"

    def __post_init__(self):
        if self.n_rows < 1:
            raise ValueError("n_rows must be >= 1")
        if self.generator not in (DISCRETE_TARGET, LINEAR_PLUS_BUMPS):
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.second_term not in ("verbatim", "squared"):
            raise ValueError(f"unknown second-term variant {self.second_term!r}")


def discrete_target_function(X: np.ndarray, second_term: str = "verbatim") -> np.ndarray:
    """Bumps + exponential pair term + sine + linear contrast on x1..x8."""
    bump = 9.0 * np.exp(-3.0 * ((1.0 - X[:, 0]) ** 2 + (1.0 - X[:, 1]) ** 2 + (1.0 - X[:, 2]) ** 2))
    d45 = X[:, 3] - X[:, 4]
    pair = -0.8 * np.exp(-2.0 * (d45**2 if second_term == "squared" else d45))
    sine = 2.0 * np.sin(np.pi * X[:, 5]) ** 2
    lin = -2.5 * (X[:, 6] - X[:, 7])
    return bump + pair + sine + lin


def _to_dataset(X: np.ndarray, y: np.ndarray) -> Dataset:
    cols = [Column(f"x{j + 1}", NUMERIC, X[:, j].copy()) for j in range(X.shape[1])]
    return Dataset(cols, y, "regression")


def gen_discrete_target(spec: SynthSpec) -> tuple[Dataset, np.ndarray]:
    """Uniform draws on the ten-point grid {0.0, ..., 0.9} with noisy response.

    Returns the dataset and the noise-free target values for scaled-error
    evaluation.  Noise std is half the sample std of the target values.
    """
    if spec.n_cols < 8:
        raise ValueError("discrete target needs at least 8 variables")
    rng = np.random.default_rng(spec.seed)
    X = rng.integers(0, 10, size=(spec.n_rows, spec.n_cols)) / 10.0
    f_star = discrete_target_function(X, spec.second_term)
    sigma = float(np.std(f_star)) / spec.signal_to_noise
    y = f_star + rng.normal(0.0, sigma, spec.n_rows)
    return _to_dataset(X, y), f_star


def linear_plus_bumps_function(X: np.ndarray) -> np.ndarray:
    return 10.0 * np.exp(-2.0 * np.sum(X[:, :5] ** 2, axis=1)) + np.sum(X[:, 5:35], axis=1)


def gen_linear_plus_bumps(spec: SynthSpec) -> tuple[Dataset, np.ndarray]:
    """Uniform(0,1) inputs: five-variable bump plus thirty equal linear effects."""
    if spec.n_cols < 35:
        raise ValueError("linear-plus-bumps target needs at least 35 variables")
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(0.0, 1.0, size=(spec.n_rows, spec.n_cols))
    f_star = linear_plus_bumps_function(X)
    sigma = float(np.std(f_star)) / spec.signal_to_noise
    y = f_star + rng.normal(0.0, sigma, spec.n_rows)
    return _to_dataset(X, y), f_star


def generate(spec: SynthSpec) -> tuple[Dataset, np.ndarray]:
    if spec.generator == DISCRETE_TARGET:
        return gen_discrete_target(spec)
    return gen_linear_plus_bumps(spec)


def threshold_binary(data: Dataset) -> Dataset:
    """Median split of a regression response into -1/+1 labels (sign(0) -> +1)."""
    if data.task != "regression":
        raise ValueError("threshold_binary needs a regression dataset")
    med = quantile(data.response, 0.5)
    y = np.where(data.response - med >= 0.0, 1.0, -1.0)
    if np.all(y == y[0]):
        import warnings

        warnings.warn("constant response: all labels identical after median split")
    return Dataset(data.columns, y, BINARY, response_name=data.response_name)


def metric_aae(predictions, y) -> float:
    """Mean absolute error scaled by the error of predicting the median."""
    predictions = np.asarray(predictions, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty test set")
    den = float(np.mean(np.abs(y - quantile(y, 0.5))))
    if den == 0.0:
        raise ValueError("constant response: scaled error undefined")
    return float(np.mean(np.abs(y - predictions))) / den


def metric_target_error(predictions, f_star) -> float:
    """Scaled absolute error against the noise-free target values."""
    predictions = np.asarray(predictions, dtype=float)
    f_star = np.asarray(f_star, dtype=float)
    den = float(np.mean(np.abs(f_star - quantile(f_star, 0.5))))
    if den == 0.0:
        raise ValueError("constant target: scaled error undefined")
    return float(np.mean(np.abs(f_star - predictions))) / den


def metric_error_rate(predictions, y) -> float:
    """Misclassification rate of sign(F) against -1/+1 labels."""
    predictions = np.asarray(predictions, dtype=float)
    y = np.asarray(y, dtype=float)
    labels = np.where(predictions >= 0.0, 1.0, -1.0)
    return float(np.mean(labels != y))


def metric_comparative(errors) -> np.ndarray:
    """Each variant's error divided by the best variant's error."""
    errors = np.asarray(errors, dtype=float)
    if errors.size < 2:
        raise ValueError("comparative error needs at least two variants")
    return errors / errors.min()
