"""Regression tree induction with prescribed leaf counts and repeated-split incentive."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CATEGORICAL, Dataset


@dataclass(frozen=True)
class SplitSpec:
    variable: int
    threshold: float | None = None  # numeric: left iff x <= threshold
    left_levels: frozenset[int] | None = None  # categorical: left iff code in set

    @property
    def is_categorical(self) -> bool:
        return self.left_levels is not None


@dataclass
class TreeNode:
    depth: int
    n_rows: int
    path_vars: frozenset[int]
    value: float = 0.0
    split: SplitSpec | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    improvement: float = 0.0

    @property
    def is_terminal(self) -> bool:
        return self.split is None

    def terminals(self) -> list["TreeNode"]:
        if self.is_terminal:
            return [self]
        return self.left.terminals() + self.right.terminals()

    def n_terminals(self) -> int:
        return len(self.terminals())


@dataclass
class TreeGrowthConfig:
    target_terminals: int
    min_node_rows: int = 10
    kappa: float = 1.0

    def __post_init__(self):
        if self.target_terminals < 2:
            raise ValueError("target_terminals must be >= 2")
        if self.min_node_rows < 1:
            raise ValueError("min_node_rows must be >= 1")
        if self.kappa < 1.0:
            raise ValueError("kappa must be >= 1")


def sample_tree_size(lbar: float, rng: np.random.Generator) -> int:
    """Draw a terminal-node count: 2 + floor(Exponential(mean lbar - 2))."""
    if lbar < 2.0:
        raise ValueError("mean tree size must be >= 2")
    if lbar == 2.0:
        return 2
    gamma = rng.exponential(lbar - 2.0)
    return 2 + int(np.floor(gamma))


def best_split(values, kind, targets, min_node_rows=1):
    """Best squared-error split of one variable within a node.

    Returns (SplitSpec, improvement) or None when no admissible split exists.
    Ties go to the smaller threshold / smaller ordered level subset.
    """
    values = np.asarray(values)
    targets = np.asarray(targets, dtype=float)
    n = len(values)
    if n < 2 * min_node_rows:
        return None
    total = targets.sum()
    base = total * total / n

    if kind == CATEGORICAL:
        codes = values.astype(np.int64)
        width = int(codes.max()) + 1
        counts = np.bincount(codes, minlength=width)
        sums = np.bincount(codes, weights=targets, minlength=width)
        present = np.nonzero(counts)[0]
        if len(present) < 2:
            return None
        means = sums[present] / counts[present]
        # Classic CART reduction: order levels by within-node mean target,
        # then scan as if ordinal. Mean ties break on level code.
        order = present[np.lexsort((present, means))]
        cn = np.cumsum(counts[order])[:-1]
        cs = np.cumsum(sums[order])[:-1]
        ok = (cn >= min_node_rows) & (n - cn >= min_node_rows)
        if not ok.any():
            return None
        imp = np.where(ok, cs**2 / np.maximum(cn, 1) + (total - cs) ** 2 / np.maximum(n - cn, 1) - base, -np.inf)
        g = int(np.argmax(imp))
        spec = SplitSpec(variable=-1, left_levels=frozenset(int(c) for c in order[: g + 1]))
        return spec, float(imp[g])

    order = np.argsort(values, kind="stable")
    sv = values[order]
    st = targets[order]
    cs = np.cumsum(st)[:-1]
    n_left = np.arange(1, n)
    distinct = sv[1:] > sv[:-1]
    ok = distinct & (n_left >= min_node_rows) & (n - n_left >= min_node_rows)
    if not ok.any():
        return None
    imp = np.where(ok, cs**2 / n_left + (total - cs) ** 2 / (n - n_left) - base, -np.inf)
    i = int(np.argmax(imp))  # first max = smallest threshold
    thr = (sv[i] + sv[i + 1]) / 2.0
    return SplitSpec(variable=-1, threshold=float(thr)), float(imp[i])


def _best_candidate(data: Dataset, rows, targets, path_vars, cfg: TreeGrowthConfig):
    """Best kappa-weighted split over all variables for one leaf."""
    best = None
    X = data.matrix
    for j in range(data.n_cols):
        res = best_split(X[rows, j], data.columns[j].kind, targets[rows], cfg.min_node_rows)
        if res is None:
            continue
        spec, imp = res
        weight = cfg.kappa if j in path_vars else 1.0
        priority = weight * imp
        if best is None or priority > best[0]:
            spec = SplitSpec(variable=j, threshold=spec.threshold, left_levels=spec.left_levels)
            best = (priority, spec, imp)
    return best


def _route_left(spec: SplitSpec, values):
    if spec.is_categorical:
        return np.isin(values.astype(np.int64), sorted(spec.left_levels))
    return values <= spec.threshold


def grow_tree(data: Dataset, targets, rows, cfg: TreeGrowthConfig) -> TreeNode:
    """Best-first growth to cfg.target_terminals leaves (or until unsplittable).

    The frontier leaf with the largest kappa-weighted improvement is split
    next; kappa applies to variables already used on the leaf's root path.
    """
    targets = np.asarray(targets, dtype=float)
    rows = np.asarray(rows)
    if len(rows) == 0:
        raise ValueError("grow_tree on empty row set")
    root = TreeNode(depth=0, n_rows=len(rows), path_vars=frozenset(), value=float(targets[rows].mean()))
    frontier = [(root, rows, _best_candidate(data, rows, targets, frozenset(), cfg))]
    n_terminals = 1
    while n_terminals < cfg.target_terminals:
        pick = None
        for idx, (_, _, cand) in enumerate(frontier):
            if cand is not None and (pick is None or cand[0] > frontier[pick][2][0]):
                pick = idx
        if pick is None:
            break
        node, node_rows, (_, spec, imp) = frontier.pop(pick)
        X = data.matrix
        mask = _route_left(spec, X[node_rows, spec.variable])
        lrows, rrows = node_rows[mask], node_rows[~mask]
        child_path = node.path_vars | {spec.variable}
        node.split = spec
        node.improvement = imp
        node.left = TreeNode(node.depth + 1, len(lrows), child_path, float(targets[lrows].mean()))
        node.right = TreeNode(node.depth + 1, len(rrows), child_path, float(targets[rrows].mean()))
        frontier.append((node.left, lrows, _best_candidate(data, lrows, targets, child_path, cfg)))
        frontier.append((node.right, rrows, _best_candidate(data, rrows, targets, child_path, cfg)))
        n_terminals += 1
    return root


def predict_tree(node: TreeNode, x) -> float:
    """Prediction for a single row (1-D array of feature values)."""
    x = np.asarray(x)
    while not node.is_terminal:
        spec = node.split
        v = x[spec.variable]
        if spec.is_categorical:
            node = node.left if int(v) in spec.left_levels else node.right
        else:
            node = node.left if v <= spec.threshold else node.right
    return node.value


def predict_tree_batch(node: TreeNode, X) -> np.ndarray:
    """Vectorized predictions for a feature matrix (rows x variables)."""
    X = np.asarray(X)
    out = np.empty(len(X))

    def recurse(nd, idx):
        if nd.is_terminal:
            out[idx] = nd.value
            return
        mask = _route_left(nd.split, X[idx, nd.split.variable])
        recurse(nd.left, idx[mask])
        recurse(nd.right, idx[~mask])

    recurse(node, np.arange(len(X)))
    return out
