"""L1-penalized fitting of the rule + linear basis over a regularization path."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import sparse

from .data import BINARY, Column, Dataset, WinsorLimits
from .losses import HUBER, RAMP, SQUARED, LossSpec, constant_minimizer, eval_loss, huber_delta
from .rules import Basis, Conjunct, LinearTerm, Rule, eval_rule_batch

_KKT_SLACK = 1e-12
_OUTER_MAJORIZE = 10


@dataclass
class FitConfig:
    n_lambdas: int = 100
    min_ratio: float = 1e-3
    lambda_values: list[float] | None = None
    cv_folds: int = 10  # 0 disables k-fold in favor of holdout_fraction
    holdout_fraction: float = 0.0
    max_iter: int = 1000
    tol: float = 1e-3  # absolute coefficient-update tolerance per sweep
    loss: LossSpec = field(default_factory=LossSpec)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.min_ratio < 1.0:
            raise ValueError("min_ratio must lie in (0, 1)")
        if self.tol <= 0.0:
            raise ValueError("tol must be > 0")
        if self.cv_folds == 0 and not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("either cv_folds >= 2 or a holdout fraction is required")


@dataclass
class PathPoint:
    lam: float
    coef: np.ndarray
    intercept: float
    risk: float
    loss: LossSpec  # delta resolved for huber
    converged: bool = True

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.coef))


def _intercept_only_gradient(Z, y, loss):
    """Per-column risk gradient magnitude at the intercept-only fit."""
    n = len(y)
    if loss.kind == HUBER:
        loss = loss.with_delta(huber_delta(y - np.median(y), loss.alpha))
    f0 = constant_minimizer(loss, y)
    r = y - f0
    if loss.kind == SQUARED:
        g = 2.0 * r
    elif loss.kind == HUBER:
        g = np.where(np.abs(r) < loss.delta, r, loss.delta * np.sign(r))
    else:
        g = 2.0 * (y - np.clip(f0, -1.0, 1.0)) * np.ones_like(r)
    return np.abs(Z.T @ g) / n


def lambda_max(basis: Basis, data: Dataset, loss: LossSpec) -> float:
    """Smallest penalty for which every slope in the path solution is zero."""
    Z = basis.matrix(data.matrix)
    if Z.shape[1] == 0:
        raise ValueError("empty basis")
    return float(np.max(_intercept_only_gradient(Z, data.response, loss)))


def _cd_weighted(Z, y, a, lam, coef, intercept, max_iter, tol, trace=None):
    """Cyclic coordinate descent on (1/N) sum a_i (y_i - f_i)^2 + lam * sum|coef|.

    Active-set strategy: sweep only coefficients that are nonzero or violate
    the KKT bound, re-screening the full gradient between rounds.  `Z` is a
    CSC matrix so rule columns cost only their support.
    """
    from ._cd import cd_sweeps

    n, p = Z.shape
    r = y - intercept - Z @ coef
    asum = float(a.sum())
    if asum == 0.0:
        return coef, intercept, True

    def sweep(cols, n_iter):
        nonlocal intercept
        if trace is None:
            intercept, done, _ = cd_sweeps(Z.data, Z.indices, Z.indptr, a, r, coef,
                                           q, cols, lam, n_iter, tol, intercept, asum)
            return done
        for _sweep in range(n_iter):
            intercept, done, _ = cd_sweeps(Z.data, Z.indices, Z.indptr, a, r, coef,
                                           q, cols, lam, 1, tol, intercept, asum)
            trace.append(float(np.mean(a * r**2) + lam * np.abs(coef).sum()))
            if done:
                return True
        return False

    converged = True
    q = np.full(p, -1.0)
    all_cols = np.arange(p)
    grad = 2.0 / n * (Z.T @ (a * r))
    active = np.nonzero((coef != 0.0) | (np.abs(grad) > lam + _KKT_SLACK))[0]
    for _round in range(50):
        if len(active):
            converged = sweep(active, max_iter)
        # A quiet pass over every column certifies KKT at the sweep tolerance;
        # any column it moves joins the active set for another round.
        if sweep(all_cols, 1):
            break
        active = np.nonzero(coef != 0.0)[0]
    # Coefficients at rounding-noise scale (boundary columns at lam_max get
    # nudged by ~1e-16) are snapped back to an exact zero.
    tiny = (coef != 0.0) & (np.abs(coef) < 1e-12)
    if tiny.any():
        r += Z[:, np.nonzero(tiny)[0]] @ coef[tiny]
        coef[tiny] = 0.0
    return coef, intercept, converged


def _solve_one(Z, y, loss, lam, coef, intercept, max_iter, tol, trace=None):
    """One path point: squared loss directly, huber/ramp via majorization."""
    n = len(y)
    if loss.kind == SQUARED:
        a = np.ones(n)
        coef, intercept, ok = _cd_weighted(Z, y, a, lam, coef, intercept, max_iter, tol, trace)
        return coef, intercept, ok, loss
    if loss.kind == HUBER:
        r = y - intercept - Z @ coef
        loss = loss.with_delta(huber_delta(r, loss.alpha))
        ok = True
        for _ in range(_OUTER_MAJORIZE):
            r = y - intercept - Z @ coef
            absr = np.abs(r)
            w = np.where(absr < loss.delta, 1.0, loss.delta / np.maximum(absr, 1e-300))
            prev = coef.copy()
            prev_int = intercept
            coef, intercept, ok = _cd_weighted(Z, y, w / 2.0, lam, coef, intercept, max_iter, tol)
            if max(np.max(np.abs(coef - prev)), abs(intercept - prev_int)) < tol:
                break
        return coef, intercept, ok, loss
    # Ramp: rows whose clipped prediction already matches y contribute no
    # gradient and drop out of the quadratic surrogate for the round.
    ok = True
    for _ in range(_OUTER_MAJORIZE):
        f = intercept + Z @ coef
        dead = (np.abs(f) >= 1.0) & (np.sign(f - y) == np.sign(f))
        a = np.where(dead, 0.0, 1.0)
        prev = coef.copy()
        prev_int = intercept
        coef, intercept, ok = _cd_weighted(Z, y, a, lam, coef, intercept, max_iter, tol)
        if max(np.max(np.abs(coef - prev)), abs(intercept - prev_int)) < tol:
            break
    return coef, intercept, ok, loss


def lambda_grid(lam_max: float, cfg: FitConfig) -> np.ndarray:
    if cfg.lambda_values is not None:
        return np.asarray(sorted(cfg.lambda_values, reverse=True), dtype=float)
    if lam_max <= 0.0:
        return np.array([0.0])
    return lam_max * np.geomspace(1.0, cfg.min_ratio, cfg.n_lambdas)


def fit_path_matrix(Z, y, cfg: FitConfig, lambdas=None) -> list[PathPoint]:
    """Warm-started path over a descending lambda grid on a raw design matrix."""
    Z = sparse.csc_matrix(np.asarray(Z, dtype=float))
    if lambdas is None:
        lambdas = lambda_grid(float(np.max(_intercept_only_gradient(Z, y, cfg.loss))), cfg)
    coef = np.zeros(Z.shape[1])
    base = cfg.loss
    if base.kind == HUBER:
        base = base.with_delta(huber_delta(y - np.median(y), base.alpha))
    intercept = constant_minimizer(base, y)
    path = []
    for lam in lambdas:
        coef, intercept, ok, loss = _solve_one(Z, y, cfg.loss, float(lam), coef, intercept,
                                               cfg.max_iter, cfg.tol)
        risk = float(np.mean(eval_loss(loss, y, intercept + Z @ coef)))
        path.append(PathPoint(float(lam), coef.copy(), intercept, risk, loss, ok))
    return path


def fit_path(basis: Basis, data: Dataset, cfg: FitConfig) -> list[PathPoint]:
    if basis.n_columns == 0:
        raise ValueError("empty basis")
    cfg.loss.validate_task(data.task)
    Z = basis.matrix(data.matrix)
    return fit_path_matrix(Z, data.response, cfg)


def select_lambda(path: list[PathPoint], basis: Basis, data: Dataset, cfg: FitConfig) -> float:
    """Pick the path lambda with the lowest estimated prediction risk.

    k-fold CV refits the warm-started path inside each fold on the same
    lambda grid; ties go to the larger (sparser) lambda.
    """
    if not path:
        raise ValueError("empty path")
    if len(path) == 1:
        return path[0].lam
    lambdas = np.array([p.lam for p in path])
    Z = basis.matrix(data.matrix)
    y = data.response
    n = len(y)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5E1EC7]))
    perm = rng.permutation(n)

    def heldout_risk(train_idx, test_idx):
        sub_path = fit_path_matrix(Z[train_idx], y[train_idx], cfg, lambdas=lambdas)
        out = np.empty(len(sub_path))
        for i, p in enumerate(sub_path):
            f = p.intercept + Z[test_idx] @ p.coef
            out[i] = float(np.mean(eval_loss(p.loss, y[test_idx], f)))
        return out

    if cfg.cv_folds >= 2:
        k = cfg.cv_folds
        if k > n:
            raise ValueError(f"cv_folds {k} exceeds n_rows {n}")
        folds = np.array_split(perm, k)
        risk = np.zeros(len(path))
        for fold in folds:
            train = np.setdiff1d(perm, fold)
            risk += heldout_risk(train, fold) * (len(fold) / n)
    else:
        n_hold = max(1, int(round(cfg.holdout_fraction * n)))
        hold, train = perm[:n_hold], perm[n_hold:]
        risk = heldout_risk(train, hold)

    best = 0
    for i in range(1, len(path)):
        if risk[i] < risk[best]:
            best = i
    return float(lambdas[best])


@dataclass
class ModelLinearTerm:
    var: int
    coef: float  # slope on the original winsorized scale
    lower: float
    upper: float
    mean: float
    std: float


@dataclass
class EnsembleModel:
    task: str
    loss: LossSpec
    intercept: float
    rule_terms: list[tuple[Rule, float]]
    linear_terms: list[ModelLinearTerm]
    column_names: list[str]
    column_kinds: list[str]
    column_levels: list[list[str]]
    selected_lambda: float = 0.0
    seed: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_nonzero(self) -> int:
        return len(self.rule_terms) + len(self.linear_terms)


def assemble_model(basis: Basis, data: Dataset, point: PathPoint, seed: int = 0,
                   diagnostics: dict | None = None) -> EnsembleModel:
    """Final model at one path point, linear slopes de-normalized."""
    n_rules = len(basis.rules)
    rule_terms = [(basis.rules[k], float(point.coef[k]))
                  for k in range(n_rules) if point.coef[k] != 0.0]
    linear_terms = []
    for i, t in enumerate(basis.linear_terms):
        c = point.coef[n_rules + i]
        if c != 0.0:
            linear_terms.append(ModelLinearTerm(
                var=t.var, coef=float(c * t.norm_factor),
                lower=t.lower, upper=t.upper, mean=t.mean, std=t.std))
    diag = dict(diagnostics or {})
    diag.setdefault("n_nonzero", point.n_nonzero)
    diag.setdefault("n_basis_columns", basis.n_columns)
    diag.setdefault("n_rules_pre_dedup", basis.n_rules_pre_dedup)
    return EnsembleModel(
        task=data.task, loss=point.loss, intercept=point.intercept,
        rule_terms=rule_terms, linear_terms=linear_terms,
        column_names=[c.name for c in data.columns],
        column_kinds=[c.kind for c in data.columns],
        column_levels=[list(c.levels) for c in data.columns],
        selected_lambda=point.lam, seed=seed, diagnostics=diag)


def predict(model: EnsembleModel, X) -> np.ndarray:
    """Model evaluation on a feature matrix in training column order."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(model.column_names):
        raise ValueError(f"expected {len(model.column_names)} columns, got {X.shape[1]}")
    out = np.full(len(X), model.intercept)
    for rule, c in model.rule_terms:
        out += c * eval_rule_batch(rule, X)
    for t in model.linear_terms:
        out += t.coef * np.clip(X[:, t.var], t.lower, t.upper)
    return out


def classify(model: EnsembleModel, X) -> np.ndarray:
    f = predict(model, X)
    return np.where(f >= 0.0, 1.0, -1.0)


def _conjunct_to_json(c: Conjunct) -> dict:
    d = {"var": c.var, "op": c.op}
    if c.op == "in_interval":
        d["lo"] = None if c.lo == -np.inf else c.lo
        d["hi"] = None if c.hi == np.inf else c.hi
    else:
        d["set"] = sorted(c.levels)
    return d


def _conjunct_from_json(d: dict) -> Conjunct:
    if d["op"] == "in_interval":
        lo = -np.inf if d.get("lo") is None else float(d["lo"])
        hi = np.inf if d.get("hi") is None else float(d["hi"])
        return Conjunct(int(d["var"]), "in_interval", lo=lo, hi=hi)
    return Conjunct(int(d["var"]), d["op"], levels=frozenset(int(v) for v in d["set"]))


def model_to_json(model: EnsembleModel) -> dict:
    return {
        "task": model.task,
        "loss": {"kind": model.loss.kind, "alpha": model.loss.alpha, "delta": model.loss.delta},
        "intercept": model.intercept,
        "rules": [
            {"conjuncts": [_conjunct_to_json(c) for c in rule.conjuncts],
             "support": rule.support, "scale": rule.scale, "coefficient": coef}
            for rule, coef in model.rule_terms
        ],
        "linear": [asdict(t) for t in model.linear_terms],
        "columns": [
            {"name": n, "kind": k, "levels": lv}
            for n, k, lv in zip(model.column_names, model.column_kinds, model.column_levels)
        ],
        "selected_lambda": model.selected_lambda,
        "seed": model.seed,
        "diagnostics": model.diagnostics,
    }


def model_from_json(doc: dict) -> EnsembleModel:
    rule_terms = []
    for r in doc["rules"]:
        rule = Rule(tuple(_conjunct_from_json(c) for c in r["conjuncts"]),
                    support=float(r["support"]), scale=float(r["scale"]))
        rule_terms.append((rule, float(r["coefficient"])))
    linear_terms = [ModelLinearTerm(**t) for t in doc["linear"]]
    loss = LossSpec(doc["loss"]["kind"], doc["loss"]["alpha"], doc["loss"]["delta"])
    return EnsembleModel(
        task=doc["task"], loss=loss, intercept=float(doc["intercept"]),
        rule_terms=rule_terms, linear_terms=linear_terms,
        column_names=[c["name"] for c in doc["columns"]],
        column_kinds=[c["kind"] for c in doc["columns"]],
        column_levels=[c["levels"] for c in doc["columns"]],
        selected_lambda=float(doc["selected_lambda"]), seed=int(doc["seed"]),
        diagnostics=doc.get("diagnostics", {}))


def save_model(model: EnsembleModel, path) -> None:
    atomic_write_text(path, json.dumps(model_to_json(model), indent=1))


def load_model(path) -> EnsembleModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
