import json

import numpy as np
import pytest

from rulens.data import compute_winsor_limits
from rulens.ensemble import EnsembleConfig, generate_ensemble
from rulens.losses import HUBER, SQUARED, LossSpec, eval_loss
from rulens.pipeline import PipelineConfig, fit_rule_ensemble
from rulens.rules import build_basis
from rulens.sparsefit import (
    FitConfig,
    _solve_one,
    assemble_model,
    fit_path,
    fit_path_matrix,
    lambda_grid,
    lambda_max,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    save_model,
    select_lambda,
)
from tests.conftest import make_numeric_dataset


def soft(g, lam):
    return np.sign(g) * max(abs(g) - lam, 0.0)


def objective(Z, y, lam, coef, intercept):
    r = y - intercept - Z @ coef
    return float(np.mean(r**2) + lam * np.abs(coef).sum())


def orthogonal_design(n=64, p=5, seed=0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, p + 1)))
    # Drop any component along the all-ones direction so the intercept
    # stays decoupled from the slopes.
    ones = np.ones(n) / np.sqrt(n)
    Q = Q - np.outer(ones, ones @ Q)
    Z = Q[:, :p] * rng.uniform(0.5, 2.0, p)
    y = rng.normal(size=n) + 3.0
    return Z, y


def ista(Z, y, lam, iters=30_000):
    """Slow reference solver: proximal gradient on the centered problem."""
    n = len(y)
    zc = Z - Z.mean(axis=0)
    yc = y - y.mean()
    step = 1.0 / (2.0 / n * np.linalg.eigvalsh(zc.T @ zc).max())
    c = np.zeros(Z.shape[1])
    for _ in range(iters):
        g = -2.0 / n * zc.T @ (yc - zc @ c)
        c = np.array([soft(v, step * lam) for v in c - step * g])
    b0 = float(np.mean(y - Z @ c))
    return c, b0


class TestClosedForm:
    def test_orthogonal_soft_threshold(self):
        # With mutually orthogonal mean-free columns the lasso decouples:
        # c_j = S((2/n) z_j . y, lam) / ((2/n) z_j . z_j).
        Z, y = orthogonal_design(seed=1)
        n = len(y)
        lam = 0.05
        cfg = FitConfig(lambda_values=[lam], cv_folds=2, tol=1e-10)
        (point,) = fit_path_matrix(Z, y, cfg)
        for j in range(Z.shape[1]):
            b = 2.0 / n * float(Z[:, j] @ y)
            v = 2.0 / n * float(Z[:, j] @ Z[:, j])
            assert point.coef[j] == pytest.approx(soft(b, lam) / v, abs=1e-8)
        assert point.intercept == pytest.approx(y.mean(), abs=1e-8)


class TestAgainstIsta:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_objective_not_worse(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 50, 8
        Z = rng.normal(size=(n, p))
        Z[:, 3] = Z[:, 0] + 0.01 * rng.normal(size=n)  # correlated pair
        y = Z[:, 0] - 2.0 * Z[:, 1] + 0.1 * rng.normal(size=n) + 1.5
        lam = 0.1
        cfg = FitConfig(lambda_values=[lam], cv_folds=2, tol=1e-9)
        (point,) = fit_path_matrix(Z, y, cfg)
        ref_c, ref_b0 = ista(Z, y, lam)
        ours = objective(Z, y, lam, point.coef, point.intercept)
        ref = objective(Z, y, lam, ref_c, ref_b0)
        assert ours <= ref + 1e-6


class TestKkt:
    @pytest.mark.parametrize("seed", [0, 7])
    def test_every_path_point(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 40, 12
        Z = rng.normal(size=(n, p))
        y = Z @ rng.normal(size=p) + 0.2 * rng.normal(size=n)
        cfg = FitConfig(n_lambdas=25, cv_folds=2, tol=1e-8)
        for point in fit_path_matrix(Z, y, cfg):
            r = y - point.intercept - Z @ point.coef
            grad = -2.0 / n * Z.T @ r
            for j in range(p):
                if point.coef[j] != 0.0:
                    assert grad[j] + point.lam * np.sign(point.coef[j]) == pytest.approx(0.0, abs=1e-5)
                else:
                    assert abs(grad[j]) <= point.lam + 1e-5
            assert abs(r.mean()) < 1e-7  # unpenalized intercept stationarity


class TestPath:
    def test_lambda_grid_geometric(self):
        g = lambda_grid(2.0, FitConfig(n_lambdas=5, min_ratio=1e-2, cv_folds=2))
        assert g[0] == 2.0 and g[-1] == pytest.approx(0.02)
        ratios = g[1:] / g[:-1]
        np.testing.assert_allclose(ratios, ratios[0])

    def test_explicit_lambdas_sorted_descending(self):
        g = lambda_grid(1.0, FitConfig(lambda_values=[0.1, 1.0, 0.5], cv_folds=2))
        np.testing.assert_array_equal(g, [1.0, 0.5, 0.1])

    def test_first_point_all_zero(self, numeric_data):
        ens = generate_ensemble(numeric_data, EnsembleConfig(n_trees=8, seed=0))
        basis = build_basis(ens, numeric_data, compute_winsor_limits(numeric_data))
        cfg = FitConfig(n_lambdas=10, cv_folds=2)
        path = fit_path(basis, numeric_data, cfg)
        assert path[0].lam == pytest.approx(lambda_max(basis, numeric_data, cfg.loss))
        assert path[0].n_nonzero == 0

    def test_training_risk_non_increasing(self, numeric_data):
        ens = generate_ensemble(numeric_data, EnsembleConfig(n_trees=8, seed=0))
        basis = build_basis(ens, numeric_data, compute_winsor_limits(numeric_data))
        path = fit_path(basis, numeric_data, FitConfig(n_lambdas=20, cv_folds=2, tol=1e-7))
        risks = [p.risk for p in path]
        assert all(b <= a + 1e-6 for a, b in zip(risks, risks[1:]))

    def test_trace_objective_monotone(self):
        rng = np.random.default_rng(4)
        Z = rng.normal(size=(60, 10))
        y = Z[:, 0] + rng.normal(size=60)
        from scipy import sparse

        trace = []
        _solve_one(sparse.csc_matrix(Z), y, LossSpec(SQUARED), 0.05,
                   np.zeros(10), 0.0, 500, 1e-9, trace=trace)
        assert len(trace) > 1
        assert all(b <= a + 1e-10 for a, b in zip(trace, trace[1:]))

    def test_huber_majorization_reduces_risk(self):
        rng = np.random.default_rng(8)
        Z = rng.normal(size=(80, 6))
        y = Z[:, 0] + 0.1 * rng.normal(size=80)
        y[:4] += 20.0  # outliers
        cfg = FitConfig(lambda_values=[0.01], cv_folds=2, loss=LossSpec(HUBER))
        (point,) = fit_path_matrix(Z, y, cfg)
        start = float(np.mean(eval_loss(point.loss, y, np.median(y))))
        assert point.risk < start
        # The outliers cap the achievable risk but must not drag the slope.
        assert point.coef[0] == pytest.approx(1.0, abs=0.1)


class TestSelectLambda:
    def build(self, signal, seed=0):
        data = make_numeric_dataset(n=120, seed=seed, signal=signal)
        ens = generate_ensemble(data, EnsembleConfig(n_trees=20, seed=seed))
        basis = build_basis(ens, data, compute_winsor_limits(data))
        cfg = FitConfig(n_lambdas=30, cv_folds=5, seed=seed)
        path = fit_path(basis, data, cfg)
        return data, basis, cfg, path

    def test_signal_selects_interior_lambda(self):
        data, basis, cfg, path = self.build(signal=True)
        lam = select_lambda(path, basis, data, cfg)
        assert lam < path[0].lam
        point = next(p for p in path if p.lam == lam)
        assert point.n_nonzero > 0

    def test_pure_noise_prefers_sparse(self):
        data, basis, cfg, path = self.build(signal=False, seed=3)
        lam = select_lambda(path, basis, data, cfg)
        point = next(p for p in path if p.lam == lam)
        dense = path[-1]
        assert point.n_nonzero <= dense.n_nonzero

    def test_deterministic(self):
        data, basis, cfg, path = self.build(signal=True)
        assert select_lambda(path, basis, data, cfg) == select_lambda(path, basis, data, cfg)

    def test_holdout_mode(self):
        data, basis, _, _ = self.build(signal=True)
        cfg = FitConfig(n_lambdas=15, cv_folds=0, holdout_fraction=0.3)
        path = fit_path(basis, data, cfg)
        lam = select_lambda(path, basis, data, cfg)
        assert any(p.lam == lam for p in path)

    def test_config_requires_estimator(self):
        with pytest.raises(ValueError):
            FitConfig(cv_folds=0, holdout_fraction=0.0)

    def test_too_many_folds(self):
        data, basis, cfg, path = self.build(signal=True)
        bad = FitConfig(n_lambdas=5, cv_folds=1000)
        with pytest.raises(ValueError):
            select_lambda(fit_path(basis, data, bad), basis, data, bad)


class TestModel:
    def fitted(self, seed=0):
        data = make_numeric_dataset(n=130, seed=seed)
        cfg = PipelineConfig(seed=seed, ensemble=EnsembleConfig(n_trees=15),
                             fit=FitConfig(n_lambdas=25, cv_folds=4))
        return data, fit_rule_ensemble(data, cfg)

    def test_denormalized_predictions_match_basis(self):
        # The de-normalized slopes applied to raw winsorized values must
        # reproduce intercept + Z c with the normalized columns exactly.
        data = make_numeric_dataset(n=130, seed=1)
        ens = generate_ensemble(data, EnsembleConfig(n_trees=15, seed=1))
        basis = build_basis(ens, data, compute_winsor_limits(data))
        cfg = FitConfig(n_lambdas=20, cv_folds=3)
        path = fit_path(basis, data, cfg)
        point = path[-1]
        model = assemble_model(basis, data, point)
        via_basis = point.intercept + basis.matrix(data.matrix) @ point.coef
        np.testing.assert_allclose(predict(model, data.matrix), via_basis, atol=1e-10)

    def test_json_round_trip(self, tmp_path):
        data, model = self.fitted()
        p = tmp_path / "m.json"
        save_model(model, p)
        loaded = load_model(p)
        np.testing.assert_allclose(predict(loaded, data.matrix), predict(model, data.matrix), atol=0)
        assert model_to_json(loaded) == model_to_json(model)

    def test_json_is_plain_data(self):
        _, model = self.fitted()
        json.dumps(model_to_json(model))  # must not need custom encoders

    def test_unbounded_intervals_serialize_as_null(self):
        _, model = self.fitted()
        doc = model_to_json(model)
        sides = [c.get("lo") for r in doc["rules"] for c in r["conjuncts"] if c["op"] == "in_interval"]
        assert None in sides  # extracted rules always include one-sided intervals
        again = model_to_json(model_from_json(doc))
        assert again == doc

    def test_diagnostics_recorded(self):
        _, model = self.fitted()
        d = model.diagnostics
        assert d["n_nonzero"] == model.n_nonzero
        assert d["n_rules_pre_dedup"] >= d["n_rules_retained"]
        assert len(d["path"]) == 25

    def test_predict_shape_check(self):
        _, model = self.fitted()
        with pytest.raises(ValueError):
            predict(model, np.zeros((3, 2)))

    def test_atomic_write_replaces(self, tmp_path):
        from rulens.sparsefit import atomic_write_text

        p = tmp_path / "out.txt"
        p.write_text("old")
        atomic_write_text(p, "new")
        assert p.read_text() == "new"
        assert list(tmp_path.iterdir()) == [p]
