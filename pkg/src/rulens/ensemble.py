"""Sequential tree-ensemble generation with subsampling, shrinkage and size randomization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .data import Dataset
from .losses import HUBER, RAMP, SQUARED, LossSpec, constant_minimizer, huber_delta, negative_gradient, eval_loss
from .tree import TreeGrowthConfig, TreeNode, grow_tree, predict_tree_batch


def default_eta(n_rows: int) -> int:
    """Default subsample size min(N/2, 100 + 6*sqrt(N)), floored."""
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    return int(np.floor(min(n_rows / 2.0, 100.0 + 6.0 * np.sqrt(n_rows))))


@dataclass
class EnsembleConfig:
    n_trees: int = 333
    nu: float = 0.01
    eta: int | None = None  # None -> default_eta(N)
    lbar: float = 4.0
    kappa: float = 1.0
    min_node_rows: int = 10
    loss: LossSpec = field(default_factory=LossSpec)
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError("nu must lie in [0, 1]")
        if self.lbar < 2.0:
            raise ValueError("lbar must be >= 2")

    def resolved_eta(self, n_rows: int) -> int:
        eta = default_eta(n_rows) if self.eta is None else self.eta
        if not 1 <= eta <= n_rows:
            raise ValueError(f"eta {eta} outside [1, {n_rows}]")
        return eta


@dataclass
class TreeEnsemble:
    f0: float
    trees: list[TreeNode]
    sizes: list[int]
    loss: LossSpec  # with the last huber delta used during generation


def _leaf_rows(node: TreeNode, X: np.ndarray, rows: np.ndarray):
    """Yield (leaf, subset of rows routed to it)."""
    if node.is_terminal:
        yield node, rows
        return
    from .tree import _route_left

    mask = _route_left(node.split, X[rows, node.split.variable])
    yield from _leaf_rows(node.left, X, rows[mask])
    yield from _leaf_rows(node.right, X, rows[~mask])


def _line_search(loss: LossSpec, y_leaf: np.ndarray, f_leaf: np.ndarray) -> float:
    """1-D minimizer of sum L(y_i, f_i + c) over the leaf's subsample rows."""
    r = y_leaf - f_leaf
    if loss.kind == SQUARED:
        return float(r.mean())
    lo, hi = float(r.min()), float(r.max())
    if loss.kind == RAMP:
        lo, hi = lo - 2.0, hi + 2.0
    if lo == hi:
        return lo
    res = optimize.minimize_scalar(
        lambda c: float(np.sum(eval_loss(loss, y_leaf, f_leaf + c))),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-8},
    )
    return float(res.x)


def generate_ensemble(data: Dataset, cfg: EnsembleConfig) -> TreeEnsemble:
    """Run the sequential generation loop: subsample, fit working responses,
    randomize tree size, line-search the leaves, update the memory function."""
    cfg.loss.validate_task(data.task)
    n = data.n_rows
    eta = cfg.resolved_eta(n)
    rng = np.random.default_rng(cfg.seed)
    X = data.matrix
    y = data.response

    loss = cfg.loss
    if loss.kind == HUBER:
        loss = loss.with_delta(huber_delta(y - np.median(y), loss.alpha))
    f0 = constant_minimizer(loss, y)
    memory = np.full(n, f0)

    trees, sizes = [], []
    grow_cfg_base = dict(min_node_rows=cfg.min_node_rows, kappa=cfg.kappa)
    for _ in range(cfg.n_trees):
        if loss.kind == HUBER:
            loss = loss.with_delta(huber_delta(y - memory, loss.alpha))
        sub = rng.choice(n, size=eta, replace=False)
        sub.sort()
        targets = np.zeros(n)
        targets[sub] = negative_gradient(loss, y[sub], memory[sub])
        t_m = _sample_size(cfg, rng)
        # If the target size is unreachable the tree is kept at whatever
        # size it managed; sizes records the achieved terminal count.
        tree = grow_tree(data, targets, sub, TreeGrowthConfig(target_terminals=t_m, **grow_cfg_base))
        for leaf, leaf_rows in _leaf_rows(tree, X, sub):
            leaf.value = _line_search(loss, y[leaf_rows], memory[leaf_rows])
        trees.append(tree)
        sizes.append(tree.n_terminals())
        memory += cfg.nu * predict_tree_batch(tree, X)
    return TreeEnsemble(f0=f0, trees=trees, sizes=sizes, loss=loss)


def _sample_size(cfg: EnsembleConfig, rng: np.random.Generator) -> int:
    from .tree import sample_tree_size

    return sample_tree_size(cfg.lbar, rng)


def memory_predict(ens: TreeEnsemble, nu: float, X, m: int | None = None) -> np.ndarray:
    """Memory-function prediction f0 + nu * sum of the first m trees."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if m is None:
        m = len(ens.trees)
    if not 0 <= m <= len(ens.trees):
        raise ValueError(f"prefix count {m} outside [0, {len(ens.trees)}]")
    out = np.full(len(X), ens.f0)
    for tree in ens.trees[:m]:
        out += nu * predict_tree_batch(tree, X)
    return out
