"""Tabular data loading, validation and winsorized linear features."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

REGRESSION = "regression"
BINARY = "binary_classification"


class ParseError(ValueError):
    """A cell could not be parsed under the declared column kind."""


class SchemaError(ValueError):
    """Header or declared schema is inconsistent with the file."""


@dataclass
class Column:
    name: str
    kind: str  # NUMERIC or CATEGORICAL
    values: np.ndarray  # floats for numeric, integer level codes for categorical
    levels: list[str] = field(default_factory=list)  # training-time level names, code order

    @property
    def n_levels(self) -> int:
        return len(self.levels)


@dataclass
class Dataset:
    columns: list[Column]
    response: np.ndarray
    task: str
    response_name: str = "y"

    def __post_init__(self):
        n = len(self.response)
        for c in self.columns:
            if len(c.values) != n:
                raise ValueError(f"column {c.name!r} has {len(c.values)} rows, expected {n}")
        if self.task == BINARY and not np.all(np.isin(self.response, (-1.0, 1.0))):
            raise ValueError("binary classification response must contain only -1/+1")

    @property
    def n_rows(self) -> int:
        return len(self.response)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def matrix(self) -> np.ndarray:
        """Column-stacked feature matrix; categorical cells hold level codes."""
        if not hasattr(self, "_matrix"):
            self._matrix = np.column_stack([c.values.astype(float) for c in self.columns])
        return self._matrix

    def numeric_indices(self) -> list[int]:
        return [j for j, c in enumerate(self.columns) if c.kind == NUMERIC]

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(name)


@dataclass
class WinsorLimits:
    """Per-numeric-variable clipping bounds at the (beta, 1-beta) quantiles."""

    lower: dict[int, float]
    upper: dict[int, float]
    beta: float

    def __post_init__(self):
        for j in self.lower:
            if self.lower[j] > self.upper[j]:
                raise ValueError(f"lower > upper for variable {j}")


def infer_task(response: np.ndarray) -> str:
    vals = np.unique(response)
    if len(vals) <= 2 and np.all(np.isin(vals, (-1.0, 1.0))):
        return BINARY
    return REGRESSION


def load_csv(path, categorical=(), target="y", task=None) -> Dataset:
    """Load a header-row CSV into a Dataset.

    Columns named in `categorical` get dense integer level codes assigned in
    first-appearance order; everything else (except `target`) is numeric.
    """
    categorical = set(categorical)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        # Provenance comment lines written by the CLI start with '#'.
        while header and header[0].startswith("#"):
            header = next(reader)
        if target not in header:
            raise SchemaError(f"{path}: response column {target!r} not in header {header}")
        missing = categorical - set(header)
        if missing:
            raise SchemaError(f"{path}: declared categorical columns not in header: {sorted(missing)}")
        raw = {name: [] for name in header}
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: row {rownum}: expected {len(header)} fields, got {len(row)}")
            for name, cell in zip(header, row):
                raw[name].append(cell)

    def parse_numeric(name, cells):
        out = np.empty(len(cells))
        for i, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: row {i + 2}: non-numeric value {cell!r} in column {name!r}"
                ) from None
            if not np.isfinite(v):
                raise ParseError(f"{path}: row {i + 2}: non-finite value in column {name!r}")
            out[i] = v
        return out

    columns = []
    for name in header:
        if name == target:
            continue
        if name in categorical:
            codes = {}
            vals = np.empty(len(raw[name]), dtype=np.int64)
            for i, cell in enumerate(raw[name]):
                vals[i] = codes.setdefault(cell, len(codes))
            columns.append(Column(name, CATEGORICAL, vals, list(codes)))
        else:
            columns.append(Column(name, NUMERIC, parse_numeric(name, raw[name])))

    y = parse_numeric(target, raw[target])
    if task is None:
        task = infer_task(y)
    return Dataset(columns, y, task, response_name=target)


def quantile(values, q: float) -> float:
    """Empirical quantile, linear interpolation at position 1 + (n-1)q."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("quantile of empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile fraction {q} outside [0, 1]")
    return float(np.quantile(values, q, method="linear"))


def compute_winsor_limits(data: Dataset, beta: float = 0.025) -> WinsorLimits:
    if not 0.0 <= beta < 0.5:
        raise ValueError(f"beta {beta} outside [0, 0.5)")
    lower, upper = {}, {}
    for j in data.numeric_indices():
        v = data.columns[j].values
        lower[j] = quantile(v, beta)
        upper[j] = quantile(v, 1.0 - beta)
    return WinsorLimits(lower, upper, beta)


def winsorize(x, limits: WinsorLimits, j: int):
    """Clip variable j to its winsor bounds; works elementwise on arrays."""
    if j not in limits.lower:
        raise ValueError(f"variable {j} has no winsor limits (not numeric)")
    return np.clip(x, limits.lower[j], limits.upper[j])
