import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rulens.data import CATEGORICAL, NUMERIC, Column, Dataset, compute_winsor_limits
from rulens.ensemble import EnsembleConfig, generate_ensemble
from rulens.rules import (
    RULE_REFERENCE_STD,
    Conjunct,
    Rule,
    build_basis,
    compute_support,
    eval_rule,
    eval_rule_batch,
    extract_rules,
)
from rulens.tree import TreeGrowthConfig, grow_tree, predict_tree_batch
from tests.conftest import make_mixed_dataset, make_numeric_dataset


def grown_tree(seed=0, terminals=5, n=150):
    data = make_numeric_dataset(n=n, seed=seed)
    tree = grow_tree(data, data.response, np.arange(n), TreeGrowthConfig(terminals, min_node_rows=5))
    return data, tree


class TestConjunct:
    def test_interval_open_closed(self):
        c = Conjunct(0, "in_interval", lo=1.0, hi=2.0)
        vals = np.array([1.0, 1.5, 2.0, 2.5])
        np.testing.assert_array_equal(c.evaluate(vals), [False, True, True, False])

    def test_set_membership(self):
        c = Conjunct(0, "in_set", levels=frozenset({0, 2}))
        np.testing.assert_array_equal(c.evaluate(np.array([0, 1, 2, 3])), [True, False, True, False])

    def test_not_in_set_admits_unseen_codes(self):
        c = Conjunct(0, "not_in_set", levels=frozenset({1}))
        np.testing.assert_array_equal(c.evaluate(np.array([0, 1, -1])), [True, False, True])


class TestEvalRule:
    def test_empty_rule_raises(self):
        r = Rule(conjuncts=())
        with pytest.raises(ValueError):
            eval_rule(r, np.zeros(2))
        with pytest.raises(ValueError):
            eval_rule_batch(r, np.zeros((2, 2)))

    def test_product_of_indicators(self):
        r = Rule((Conjunct(0, "in_interval", lo=0.0), Conjunct(1, "in_interval", hi=1.0)))
        assert eval_rule(r, np.array([0.5, 0.5])) == 1
        assert eval_rule(r, np.array([-0.5, 0.5])) == 0
        X = np.array([[0.5, 0.5], [-0.5, 0.5], [0.5, 2.0]])
        np.testing.assert_array_equal(eval_rule_batch(r, X), [1.0, 0.0, 0.0])


class TestExtract:
    def test_count_is_two_per_internal_node(self):
        data, tree = grown_tree(terminals=5)
        rules = extract_rules(tree)
        assert len(rules) == 2 * (tree.n_terminals() - 1) == 8

    def test_stump_gives_complement_pair(self):
        data, tree = grown_tree(terminals=2)
        r1, r2 = extract_rules(tree)
        X = data.matrix
        np.testing.assert_array_equal(eval_rule_batch(r1, X) + eval_rule_batch(r2, X), np.ones(len(X)))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_terminal_rules_match_routing(self, seed):
        # Oracle: the rule of a terminal must fire exactly on the rows the
        # tree routes there; internal-node rules on the union of their leaves.
        data = make_mixed_dataset(n=100, seed=seed % 13)
        rng = np.random.default_rng(seed)
        t = rng.normal(size=100)
        tree = grow_tree(data, t, np.arange(100), TreeGrowthConfig(2 + seed % 6, min_node_rows=4))
        if tree.n_terminals() < 2:
            return
        X = data.matrix
        # Tag each leaf with a unique value so routing is readable off predictions.
        for i, leaf in enumerate(tree.terminals()):
            leaf.value = float(i)
        routed = predict_tree_batch(tree, X)
        rules = extract_rules(tree)

        def leaves_under(node):
            return {leaf.value for leaf in node.terminals()}

        # Walk in the same preorder as extract_rules to pair nodes with rules.
        nodes = []

        def walk(nd):
            nodes.append(nd)
            if nd.split is not None:
                walk(nd.left)
                walk(nd.right)

        walk(tree)
        for node, rule in zip(nodes[1:], rules):
            member = np.isin(routed, sorted(leaves_under(node)))
            np.testing.assert_array_equal(eval_rule_batch(rule, X).astype(bool), member)

    def test_repeated_numeric_splits_intersect(self):
        # Handmade depth-2 chain on one variable: conjuncts must merge.
        from rulens.tree import SplitSpec, TreeNode

        leaf = lambda: TreeNode(depth=2, n_rows=1, path_vars=frozenset({0}))
        mid = TreeNode(depth=1, n_rows=2, path_vars=frozenset({0}),
                       split=SplitSpec(0, threshold=1.0), left=leaf(), right=leaf())
        root = TreeNode(depth=0, n_rows=4, path_vars=frozenset(),
                        split=SplitSpec(0, threshold=3.0), left=mid,
                        right=TreeNode(depth=1, n_rows=2, path_vars=frozenset({0})))
        rules = extract_rules(root)
        inner_left = rules[1]  # x <= 3 then x <= 1
        assert len(inner_left.conjuncts) == 1
        assert inner_left.conjuncts[0].hi == 1.0
        inner_right = rules[2]  # x <= 3 then x > 1
        (c,) = inner_right.conjuncts
        assert (c.lo, c.hi) == (1.0, 3.0)

    def test_categorical_branches(self):
        from rulens.tree import SplitSpec, TreeNode

        left = TreeNode(depth=1, n_rows=2, path_vars=frozenset({0}))
        right = TreeNode(depth=1, n_rows=2, path_vars=frozenset({0}))
        root = TreeNode(depth=0, n_rows=4, path_vars=frozenset(),
                        split=SplitSpec(0, left_levels=frozenset({0, 2})), left=left, right=right)
        r_left, r_right = extract_rules(root)
        assert r_left.conjuncts[0].op == "in_set"
        assert r_left.conjuncts[0].levels == frozenset({0, 2})
        assert r_right.conjuncts[0].op == "not_in_set"
        # An unseen code must satisfy the complement branch only.
        assert eval_rule(r_right, np.array([7.0])) == 1
        assert eval_rule(r_left, np.array([7.0])) == 0

    def test_single_node_tree_rejected(self):
        from rulens.tree import TreeNode

        with pytest.raises(ValueError):
            extract_rules(TreeNode(depth=0, n_rows=3, path_vars=frozenset()))


class TestSupport:
    def test_support_and_scale(self):
        data, tree = grown_tree(terminals=3)
        rule = extract_rules(tree)[0]
        s = compute_support(rule, data)
        assert s == eval_rule_batch(rule, data.matrix).mean()
        assert rule.scale == pytest.approx(math.sqrt(s * (1.0 - s)))


class TestBuildBasis:
    def make_basis(self, seed=0, **kw):
        data = make_numeric_dataset(n=150, seed=seed)
        ens = generate_ensemble(data, EnsembleConfig(n_trees=12, seed=seed))
        limits = compute_winsor_limits(data, 0.025)
        return data, ens, build_basis(ens, data, limits, **kw)

    def test_pre_dedup_count(self):
        data, ens, basis = self.make_basis()
        assert basis.n_rules_pre_dedup == sum(2 * (s - 1) for s in ens.sizes if s >= 2)

    def test_dedup_and_support_filter(self):
        data, ens, basis = self.make_basis()
        keys = [r.key() for r in basis.rules]
        assert len(keys) == len(set(keys))
        assert all(0.0 < r.support < 1.0 for r in basis.rules)

    def test_linear_columns_scaled_to_reference_std(self):
        data, ens, basis = self.make_basis()
        M = basis.matrix(data.matrix)
        n_rules = len(basis.rules)
        for i in range(len(basis.linear_terms)):
            assert float(np.std(M[:, n_rules + i])) == pytest.approx(RULE_REFERENCE_STD, abs=1e-10)

    def test_rule_columns_are_binary(self):
        data, ens, basis = self.make_basis()
        M = basis.matrix(data.matrix)
        assert set(np.unique(M[:, : len(basis.rules)])) <= {0.0, 1.0}

    def test_include_flags(self):
        data, ens, b_rules = self.make_basis(include_linear=False)
        assert b_rules.linear_terms == []
        limits = compute_winsor_limits(data, 0.025)
        b_lin = build_basis(None, data, limits, include_rules=False)
        assert b_lin.rules == [] and b_lin.n_rules_pre_dedup == 0
        assert len(b_lin.linear_terms) == data.n_cols

    def test_constant_numeric_column_dropped(self):
        cols = [Column("x0", NUMERIC, np.arange(20.0)), Column("c", NUMERIC, np.ones(20))]
        data = Dataset(cols, np.arange(20.0), "regression")
        limits = compute_winsor_limits(data, 0.0)
        basis = build_basis(None, data, limits, include_rules=False)
        assert [t.var for t in basis.linear_terms] == [0]

    def test_categorical_gets_no_linear_term(self):
        data = make_mixed_dataset(n=100, seed=1)
        ens = generate_ensemble(data, EnsembleConfig(n_trees=5, seed=0))
        basis = build_basis(ens, data, compute_winsor_limits(data, 0.025))
        assert {t.var for t in basis.linear_terms} == {0, 1}
