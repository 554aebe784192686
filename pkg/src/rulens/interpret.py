"""Importance measures, partial dependence, interaction statistics and null calibration."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import BINARY, Dataset
from .pipeline import PipelineConfig, fit_rule_ensemble
from .rules import eval_rule_batch
from .sparsefit import EnsembleModel, predict

GLOBAL = "global"
POINT = "point"
REGION = "region"


@dataclass
class ImportanceReport:
    scope: str
    term_labels: list[str]
    term_values: np.ndarray  # raw I_k / I_j, aligned with model terms
    variable_values: np.ndarray  # raw J_l per input variable

    def __post_init__(self):
        if np.any(self.term_values < 0) or np.any(self.variable_values < 0):
            raise ValueError("importances must be non-negative")

    def scaled_terms(self) -> np.ndarray:
        m = self.term_values.max() if len(self.term_values) else 0.0
        return self.term_values * (100.0 / m) if m > 0 else self.term_values.copy()

    def scaled_variables(self) -> np.ndarray:
        m = self.variable_values.max() if len(self.variable_values) else 0.0
        return self.variable_values * (100.0 / m) if m > 0 else self.variable_values.copy()


def _term_labels(model: EnsembleModel) -> list[str]:
    labels = []
    for rule, _ in model.rule_terms:
        parts = []
        for c in rule.conjuncts:
            name = model.column_names[c.var]
            if c.op == "in_interval":
                if c.lo == -np.inf:
                    parts.append(f"{name} <= {c.hi:.6g}")
                elif c.hi == np.inf:
                    parts.append(f"{name} > {c.lo:.6g}")
                else:
                    parts.append(f"{c.lo:.6g} < {name} <= {c.hi:.6g}")
            else:
                levels = model.column_levels[c.var]
                names = sorted(levels[i] if i < len(levels) else str(i) for i in c.levels)
                op = "in" if c.op == "in_set" else "not in"
                parts.append(f"{name} {op} {{{', '.join(names)}}}")
        labels.append(" and ".join(parts))
    for t in model.linear_terms:
        labels.append(f"linear: {model.column_names[t.var]}")
    return labels


def _variable_shares(model: EnsembleModel, term_values: np.ndarray) -> np.ndarray:
    """Equal sharing of each term's importance among its defining variables."""
    out = np.zeros(len(model.column_names))
    i = 0
    for rule, _ in model.rule_terms:
        share = term_values[i] / rule.n_variables
        for v in rule.variables:
            out[v] += share
        i += 1
    for t in model.linear_terms:
        out[t.var] += term_values[i]
        i += 1
    return out


def global_term_importance(model: EnsembleModel) -> ImportanceReport:
    """|coefficient| times the standard deviation of the corresponding predictor."""
    vals = [abs(c) * rule.scale for rule, c in model.rule_terms]
    vals += [abs(t.coef) * t.std for t in model.linear_terms]
    vals = np.asarray(vals)
    return ImportanceReport(GLOBAL, _term_labels(model), vals, _variable_shares(model, vals))


def local_importance_matrix(model: EnsembleModel, X) -> np.ndarray:
    """Per-row, per-term local influence (rows x terms)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = []
    for rule, c in model.rule_terms:
        cols.append(abs(c) * np.abs(eval_rule_batch(rule, X) - rule.support))
    for t in model.linear_terms:
        lv = np.clip(X[:, t.var], t.lower, t.upper)
        cols.append(abs(t.coef) * np.abs(lv - t.mean))
    if not cols:
        return np.empty((len(X), 0))
    return np.column_stack(cols)


def local_term_importance(model: EnsembleModel, x) -> ImportanceReport:
    vals = local_importance_matrix(model, np.atleast_2d(x))[0]
    return ImportanceReport(POINT, _term_labels(model), vals, _variable_shares(model, vals))


def region_importance(model: EnsembleModel, X_region) -> ImportanceReport:
    """Plain average of local importances over the rows of a region."""
    X_region = np.atleast_2d(np.asarray(X_region, dtype=float))
    if len(X_region) == 0:
        raise ValueError("empty region")
    vals = local_importance_matrix(model, X_region).mean(axis=0)
    return ImportanceReport(REGION, _term_labels(model), vals, _variable_shares(model, vals))


def prediction_region(model: EnsembleModel, X, which: str, fraction: float) -> np.ndarray:
    """Row indices of the top/bottom prediction fraction."""
    f = predict(model, X)
    k = max(1, int(round(fraction * len(f))))
    order = np.argsort(f, kind="stable")
    return order[:k] if which == "bottom" else order[-k:]


def variable_importance(model: EnsembleModel, scope: str = GLOBAL, x=None, X_region=None) -> ImportanceReport:
    if scope == GLOBAL:
        return global_term_importance(model)
    if scope == POINT:
        return local_term_importance(model, x)
    if scope == REGION:
        return region_importance(model, X_region)
    raise ValueError(f"unknown scope {scope!r}")


# ---------------------------------------------------------------------------
# Partial dependence and interaction statistics
# ---------------------------------------------------------------------------


def partial_dependence(model: EnsembleModel, vars, eval_points, X_int, center: bool = True) -> np.ndarray:
    """Data-averaged prediction as a function of the variables in `vars`.

    `eval_points` has one column per entry of `vars`; `X_int` supplies the
    integration rows for the remaining variables.  The model is additive in
    rules, so each rule factors into its conjuncts on `vars` (evaluated at
    the points) times the data mean of its remaining conjuncts, which makes
    the computation exact without an N^2 double loop.
    """
    vars = tuple(vars)
    eval_points = np.atleast_2d(np.asarray(eval_points, dtype=float))
    X_int = np.atleast_2d(np.asarray(X_int, dtype=float))
    if len(X_int) == 0:
        raise ValueError("integration rows must be non-empty")
    if eval_points.shape[1] != len(vars):
        raise ValueError("eval_points must have one column per variable")
    colpos = {v: i for i, v in enumerate(vars)}
    out = np.full(len(eval_points), model.intercept)
    for rule, a in model.rule_terms:
        inside = np.ones(len(eval_points), dtype=bool)
        outside = np.ones(len(X_int), dtype=bool)
        for c in rule.conjuncts:
            if c.var in colpos:
                inside &= c.evaluate(eval_points[:, colpos[c.var]])
            else:
                outside &= c.evaluate(X_int[:, c.var])
        out += a * float(outside.mean()) * inside
    for t in model.linear_terms:
        if t.var in colpos:
            out += t.coef * np.clip(eval_points[:, colpos[t.var]], t.lower, t.upper)
        else:
            out += t.coef * float(np.clip(X_int[:, t.var], t.lower, t.upper).mean())
    if center:
        out -= out.mean()
    return out


def _pd_at(model, vars, X_eval, X_int):
    return partial_dependence(model, vars, X_eval[:, list(vars)], X_int, center=True)


# Variance fractions below this (relative) level are float residue from terms
# whose coefficients survived at negligible size, not interaction structure;
# genuine effects and procedure-level spurious effects both sit several orders
# of magnitude above it.
_NUMERICAL_FLOOR = 1e-8


def _ratio(num: float, den: float, scale: float | None = None) -> float:
    """sqrt(num / den) with numerically-negligible components treated as zero.

    `scale` is the overall prediction variance: a denominator below
    _NUMERICAL_FLOOR of it means the variable tuple has no appreciable joint
    presence in the model, so presence-testing its variance fraction is
    meaningless (the degenerate ratio of two near-zero sums can be anything
    up to 1).
    """
    if den <= 0.0 or (scale is not None and den <= _NUMERICAL_FLOOR * scale):
        return 0.0
    if num <= _NUMERICAL_FLOOR * den:
        return 0.0
    return float(np.sqrt(num / den))


def _prediction_scale(model: EnsembleModel, X_eval) -> float:
    fc = predict(model, X_eval)
    return float(np.sum((fc - fc.mean()) ** 2))


def h_pair(model: EnsembleModel, j: int, k: int, X_eval, X_int,
           importance_weighted: bool = False) -> float:
    """Two-variable interaction strength: sqrt of the unexplained PD variance fraction."""
    if j == k:
        raise ValueError("h_pair needs two distinct variables")
    f_jk = _pd_at(model, (j, k), X_eval, X_int)
    f_j = _pd_at(model, (j,), X_eval, X_int)
    f_k = _pd_at(model, (k,), X_eval, X_int)
    num = float(np.sum((f_jk - f_j - f_k) ** 2))
    scale = _prediction_scale(model, X_eval)
    den = scale if importance_weighted else float(np.sum(f_jk**2))
    return _ratio(num, den, scale)


def h_total(model: EnsembleModel, j: int, X_eval, X_int) -> float:
    """Interaction strength of one variable with all others."""
    X_eval = np.atleast_2d(np.asarray(X_eval, dtype=float))
    others = tuple(v for v in range(len(model.column_names)) if v != j)
    fc = predict(model, X_eval)
    fc = fc - fc.mean()
    f_j = _pd_at(model, (j,), X_eval, X_int)
    f_rest = _pd_at(model, others, X_eval, X_int)
    num = float(np.sum((fc - f_j - f_rest) ** 2))
    den = float(np.sum(fc**2))
    return _ratio(num, den, den)


def h_triple(model: EnsembleModel, j: int, k: int, l: int, X_eval, X_int,
             importance_weighted: bool = False) -> float:
    """Three-variable interaction strength beyond all pairwise effects."""
    if len({j, k, l}) != 3:
        raise ValueError("h_triple needs three distinct variables")
    f_jkl = _pd_at(model, (j, k, l), X_eval, X_int)
    f_jk = _pd_at(model, (j, k), X_eval, X_int)
    f_jl = _pd_at(model, (j, l), X_eval, X_int)
    f_kl = _pd_at(model, (k, l), X_eval, X_int)
    f_j = _pd_at(model, (j,), X_eval, X_int)
    f_k = _pd_at(model, (k,), X_eval, X_int)
    f_l = _pd_at(model, (l,), X_eval, X_int)
    num = float(np.sum((f_jkl - f_jk - f_jl - f_kl + f_j + f_k + f_l) ** 2))
    scale = _prediction_scale(model, X_eval)
    den = scale if importance_weighted else float(np.sum(f_jkl**2))
    return _ratio(num, den, scale)


@dataclass
class StatRequest:
    kind: str  # "total", "pair", "triple"
    variables: tuple[int, ...]

    def __post_init__(self):
        expect = {"total": 1, "pair": 2, "triple": 3}[self.kind]
        if len(self.variables) != expect:
            raise ValueError(f"{self.kind} statistic needs {expect} variables")


@dataclass
class InteractionBudget:
    """Evaluation-point / integration-row caps for the quadratic PD sums."""

    max_eval_points: int = 500
    max_integration_rows: int = 500
    exact: bool = False
    seed: int = 0

    def sample(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(X)
        if self.exact:
            return X, X
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xB0D9E7]))
        ev = X if n <= self.max_eval_points else X[np.sort(rng.choice(n, self.max_eval_points, replace=False))]
        it = X if n <= self.max_integration_rows else X[np.sort(rng.choice(n, self.max_integration_rows, replace=False))]
        return ev, it


def compute_statistic(model: EnsembleModel, req: StatRequest, X_eval, X_int,
                      importance_weighted: bool = False) -> float:
    if req.kind == "total":
        return h_total(model, req.variables[0], X_eval, X_int)
    if req.kind == "pair":
        return h_pair(model, *req.variables, X_eval, X_int, importance_weighted=importance_weighted)
    return h_triple(model, *req.variables, X_eval, X_int, importance_weighted=importance_weighted)


def fit_additive_reference(data: Dataset, cfg: PipelineConfig) -> EnsembleModel:
    """Full pipeline with stumps only (every tree two terminal nodes)."""
    return fit_rule_ensemble(data, cfg.with_lbar(2.0))


@dataclass
class NullStatistics:
    request: StatRequest
    mean: float
    std: float
    values: list[float]


def null_distribution(data: Dataset, cfg: PipelineConfig, requests: list[StatRequest],
                      reps: int = 10, budget: InteractionBudget | None = None,
                      additive_model: EnsembleModel | None = None,
                      importance_weighted: bool = False) -> list[NullStatistics]:
    """Parametric-bootstrap null for the requested interaction statistics.

    Artificial responses are built around an additive (stumps-only) reference
    fit; each replication refits the full pipeline with the original settings
    and recomputes every requested statistic.
    """
    if reps < 2:
        raise ValueError("need at least 2 bootstrap replications")
    if budget is None:
        budget = InteractionBudget(seed=cfg.seed)
    if additive_model is None:
        additive_model = fit_additive_reference(data, cfg)
    X = data.matrix
    f_a = predict(additive_model, X)
    y = data.response
    samples: list[list[float]] = [[] for _ in requests]
    x_eval, x_int = budget.sample(X)
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xB007, rep]))
        if data.task == BINARY:
            p1 = np.clip((1.0 + f_a) / 2.0, 0.0, 1.0)
            y_rep = np.where(rng.random(len(y)) < p1, 1.0, -1.0)
        else:
            perm = rng.permutation(len(y))
            y_rep = f_a + (y[perm] - f_a[perm])
        data_rep = Dataset(data.columns, y_rep, data.task, response_name=data.response_name)
        model_rep = fit_rule_ensemble(data_rep, cfg.reseeded(_derive_seed(cfg.seed, rep)))
        for i, req in enumerate(requests):
            samples[i].append(compute_statistic(model_rep, req, x_eval, x_int,
                                                importance_weighted=importance_weighted))
    out = []
    for req, vals in zip(requests, samples):
        arr = np.asarray(vals)
        out.append(NullStatistics(req, float(arr.mean()), float(arr.std(ddof=1)), vals))
    return out


def _derive_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, 0x5EED, rep]).generate_state(1)[0])


@dataclass
class InteractionReport:
    kind: str
    variables: tuple[int, ...]
    h: float
    null_mean: float | None = None
    null_std: float | None = None
    reps: int = 0

    def __post_init__(self):
        if self.h < 0:
            raise ValueError("H statistics are non-negative")
        if self.null_mean is not None and self.reps < 1:
            raise ValueError("null fields require at least one replication")

    @property
    def excess(self) -> float | None:
        if self.null_mean is None:
            return None
        return self.h - self.null_mean


def excess_statistics(raw: list[tuple[StatRequest, float]],
                      null: list[NullStatistics]) -> list[InteractionReport]:
    """Pair observed statistics with their null mean/std."""
    null_by_key = {(n.request.kind, n.request.variables): n for n in null}
    out = []
    for req, h in raw:
        n = null_by_key.get((req.kind, req.variables))
        if n is None:
            raise ValueError(f"no null statistics for {req.kind} {req.variables}")
        out.append(InteractionReport(req.kind, req.variables, h, n.mean, n.std, len(n.values)))
    return out
