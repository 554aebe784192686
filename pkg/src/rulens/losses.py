"""Loss functions, working responses and constant minimizers for ensemble seeding."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .data import BINARY, REGRESSION, quantile

SQUARED = "squared"
HUBER = "huber"
RAMP = "ramp"


@dataclass
class LossSpec:
    kind: str = SQUARED
    alpha: float = 0.9  # quantile of absolute residuals fixing the huber transition
    delta: float = 1.0  # huber transition point, recomputed while fitting

    def __post_init__(self):
        if self.kind not in (SQUARED, HUBER, RAMP):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"huber alpha {self.alpha} outside (0, 1]")
        if self.delta < 0.0:
            raise ValueError(f"huber delta {self.delta} must be >= 0")

    def validate_task(self, task: str) -> None:
        if self.kind == RAMP and task != BINARY:
            raise ValueError("ramp loss requires a binary classification task")
        if self.kind in (SQUARED, HUBER) and task != REGRESSION:
            raise ValueError(f"{self.kind} loss requires a regression task")

    def with_delta(self, delta: float) -> "LossSpec":
        return replace(self, delta=delta)


def _clip_unit(f):
    return np.clip(f, -1.0, 1.0)


def eval_loss(spec: LossSpec, y, f):
    """Pointwise loss; vectorized over numpy inputs."""
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    if spec.kind == SQUARED:
        return (y - f) ** 2
    if spec.kind == HUBER:
        r = np.abs(y - f)
        return np.where(r < spec.delta, r**2 / 2.0, spec.delta * (r - spec.delta / 2.0))
    return (y - _clip_unit(f)) ** 2


def negative_gradient(spec: LossSpec, y, f):
    """-dL/dF, the working response for gradient-style tree fitting."""
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    if spec.kind == SQUARED:
        return 2.0 * (y - f)
    if spec.kind == HUBER:
        r = y - f
        return np.where(np.abs(r) < spec.delta, r, spec.delta * np.sign(r))
    # Ramp: zero once f sits in the clipped region on the side that already
    # fits y; otherwise the interior gradient of the clipped square.
    g = 2.0 * (y - _clip_unit(f))
    outside = np.abs(f) >= 1.0
    dead = outside & (np.sign(f - y) == np.sign(f))
    return np.where(dead, 0.0, g)


def huber_delta(residuals, alpha: float) -> float:
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0:
        raise ValueError("huber_delta of empty residuals")
    return quantile(np.abs(residuals), alpha)


def constant_minimizer(spec: LossSpec, y) -> float:
    """arg min over constants c of sum L(y_i, c)."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("constant_minimizer of empty response")
    if spec.kind == SQUARED:
        return float(np.mean(y))
    if spec.kind == RAMP:
        return float(np.clip(np.mean(y), -1.0, 1.0))
    lo, hi = float(np.min(y)), float(np.max(y))
    if lo == hi:
        return lo
    res = optimize.minimize_scalar(
        lambda c: float(np.sum(eval_loss(spec, y, c))),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-8},
    )
    return float(res.x)
