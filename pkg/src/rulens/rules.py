"""Rule extraction from trees and assembly of the rule + linear fitting basis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, WinsorLimits, winsorize
from .ensemble import TreeEnsemble
from .tree import TreeNode

IN_INTERVAL = "in_interval"
IN_SET = "in_set"
NOT_IN_SET = "not_in_set"

# Average standard deviation of a rule whose support is uniform on (0, 1);
# linear columns are scaled to match it.
RULE_REFERENCE_STD = 0.4


@dataclass(frozen=True)
class Conjunct:
    var: int
    op: str
    lo: float = -math.inf  # in_interval: lo < x <= hi
    hi: float = math.inf
    levels: frozenset[int] = frozenset()

    def evaluate(self, values) -> np.ndarray:
        values = np.asarray(values)
        if self.op == IN_INTERVAL:
            return (values > self.lo) & (values <= self.hi)
        member = np.isin(values.astype(np.int64), sorted(self.levels))
        return member if self.op == IN_SET else ~member


@dataclass
class Rule:
    conjuncts: tuple[Conjunct, ...]
    support: float = float("nan")
    scale: float = float("nan")
    source: tuple[int, int] = (-1, -1)  # (tree index, node index)

    def key(self):
        return tuple((c.var, c.op, c.lo, c.hi, c.levels) for c in self.conjuncts)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(c.var for c in self.conjuncts)

    @property
    def n_variables(self) -> int:
        return len(self.conjuncts)


def eval_rule(rule: Rule, x) -> int:
    """Binary evaluation on a single row."""
    x = np.asarray(x)
    if not rule.conjuncts:
        raise ValueError("rule has no conjuncts")
    return int(all(bool(c.evaluate(x[c.var])) for c in rule.conjuncts))


def eval_rule_batch(rule: Rule, X) -> np.ndarray:
    X = np.asarray(X)
    if not rule.conjuncts:
        raise ValueError("rule has no conjuncts")
    out = np.ones(len(X), dtype=bool)
    for c in rule.conjuncts:
        out &= c.evaluate(X[:, c.var])
    return out.astype(float)


def compute_support(rule: Rule, data: Dataset) -> float:
    s = float(eval_rule_batch(rule, data.matrix).mean())
    rule.support = s
    rule.scale = math.sqrt(s * (1.0 - s))
    return s


@dataclass
class _PathState:
    bounds: dict  # var -> [lo, hi]
    must_in: dict  # var -> set of codes (None entry means unconstrained)
    must_not: dict  # var -> set of codes

    def copy(self):
        return _PathState(
            {v: list(b) for v, b in self.bounds.items()},
            {v: set(s) for v, s in self.must_in.items()},
            {v: set(s) for v, s in self.must_not.items()},
        )

    def to_conjuncts(self) -> tuple[Conjunct, ...]:
        out = []
        for var in sorted(set(self.bounds) | set(self.must_in) | set(self.must_not)):
            if var in self.bounds:
                lo, hi = self.bounds[var]
                out.append(Conjunct(var, IN_INTERVAL, lo=lo, hi=hi))
            elif var in self.must_in:
                allowed = self.must_in[var] - self.must_not.get(var, set())
                out.append(Conjunct(var, IN_SET, levels=frozenset(allowed)))
            else:
                out.append(Conjunct(var, NOT_IN_SET, levels=frozenset(self.must_not[var])))
        return tuple(out)


def extract_rules(tree: TreeNode, tree_index: int = 0) -> list[Rule]:
    """One rule per non-root node: the conjunction of the edge conditions on
    its root path, with repeated splits on a variable intersected."""
    if tree.n_terminals() < 2:
        raise ValueError("extract_rules needs a tree with >= 2 terminals")
    rules: list[Rule] = []
    counter = [0]

    def walk(node: TreeNode, state: _PathState):
        counter[0] += 1
        node_index = counter[0]
        if node is not tree:
            rules.append(Rule(state.to_conjuncts(), source=(tree_index, node_index)))
        if node.is_terminal:
            return
        spec = node.split
        left = state.copy()
        right = state.copy()
        if spec.is_categorical:
            if spec.variable in left.must_in:
                left.must_in[spec.variable] &= spec.left_levels
            else:
                left.must_in[spec.variable] = set(spec.left_levels)
            right.must_not.setdefault(spec.variable, set()).update(spec.left_levels)
        else:
            lb = left.bounds.setdefault(spec.variable, [-math.inf, math.inf])
            lb[1] = min(lb[1], spec.threshold)
            rb = right.bounds.setdefault(spec.variable, [-math.inf, math.inf])
            rb[0] = max(rb[0], spec.threshold)
        walk(node.left, left)
        walk(node.right, right)

    # Root carries no rule; children accumulate edge conditions.
    counter[0] = -1
    walk(tree, _PathState({}, {}, {}))
    return rules


@dataclass
class LinearTerm:
    var: int
    lower: float
    upper: float
    mean: float  # of the winsorized values over training data
    std: float  # population standard deviation of the winsorized values

    @property
    def norm_factor(self) -> float:
        return RULE_REFERENCE_STD / self.std


@dataclass
class Basis:
    rules: list[Rule]
    linear_terms: list[LinearTerm]
    n_rules_pre_dedup: int
    limits: WinsorLimits

    @property
    def n_columns(self) -> int:
        return len(self.rules) + len(self.linear_terms)

    def matrix(self, X) -> np.ndarray:
        """Design matrix: raw 0/1 rule columns then normalized linear columns."""
        X = np.asarray(X, dtype=float)
        cols = [eval_rule_batch(r, X) for r in self.rules]
        for t in self.linear_terms:
            cols.append(np.clip(X[:, t.var], t.lower, t.upper) * t.norm_factor)
        if not cols:
            return np.empty((len(X), 0))
        return np.column_stack(cols)


def build_basis(ens: TreeEnsemble, data: Dataset, limits: WinsorLimits,
                include_rules: bool = True, include_linear: bool = True) -> Basis:
    """Extract, deduplicate and score rules; attach normalized linear terms."""
    rules: list[Rule] = []
    pre_dedup = 0
    if include_rules:
        seen = {}
        for m, tree in enumerate(ens.trees):
            if tree.n_terminals() < 2:
                continue
            for rule in extract_rules(tree, tree_index=m):
                pre_dedup += 1
                seen.setdefault(rule.key(), rule)
        for rule in seen.values():
            s = compute_support(rule, data)
            if 0.0 < s < 1.0:
                rules.append(rule)

    linear_terms: list[LinearTerm] = []
    if include_linear:
        for j in data.numeric_indices():
            lv = winsorize(data.columns[j].values, limits, j)
            std = float(np.std(lv))
            if std == 0.0:
                continue
            linear_terms.append(
                LinearTerm(var=j, lower=limits.lower[j], upper=limits.upper[j],
                           mean=float(np.mean(lv)), std=std)
            )
    return Basis(rules=rules, linear_terms=linear_terms, n_rules_pre_dedup=pre_dedup, limits=limits)
