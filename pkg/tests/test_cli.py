import csv
import json

import numpy as np
import pytest

from rulens.cli import RUNTIME_ERROR, USAGE_ERROR, matrix_from_csv, run
from rulens.sparsefit import load_model, predict

FAST_FIT = ["--trees", "12", "--lambdas", "15", "--cv", "3", "--seed", "5"]


def read_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.reader(lines))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run(["gen-synth", "--kind", "eq51", "--n-rows", "150", "--n-cols", "8",
                "--seed", "3", "--out", str(d / "train.csv"),
                "--with-truth", str(d / "truth.csv")]) == 0
    assert run(["fit", "--input", str(d / "train.csv"), "--out", str(d / "model.json")]
               + FAST_FIT) == 0
    return d


class TestExitCodes:
    def test_no_arguments_usage(self):
        assert run([]) == USAGE_ERROR

    def test_unknown_flag_usage(self):
        assert run(["fit", "--frobnicate"]) == USAGE_ERROR

    def test_bad_threads_usage(self, workdir):
        assert run(["--threads", "0", "predict", "--model", str(workdir / "model.json"),
                    "--input", str(workdir / "train.csv"), "--out", "/tmp/x.csv"]) == USAGE_ERROR

    def test_missing_file_runtime(self, tmp_path):
        assert run(["fit", "--input", str(tmp_path / "none.csv"),
                    "--out", str(tmp_path / "m.json")]) == RUNTIME_ERROR

    def test_version_exits_zero(self):
        assert run(["--version"]) == 0


class TestFitPredict:
    def test_predict_round_trip(self, workdir):
        # CLI predictions on the training file must equal the in-memory model.
        out = workdir / "pred.csv"
        assert run(["predict", "--model", str(workdir / "model.json"),
                    "--input", str(workdir / "train.csv"), "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["prediction"]
        got = np.array([float(r[0]) for r in rows[1:]])
        model = load_model(workdir / "model.json")
        X = matrix_from_csv(workdir / "train.csv", model)
        np.testing.assert_allclose(got, predict(model, X), atol=1e-10)

    def test_refit_is_byte_identical(self, workdir, tmp_path):
        out = tmp_path / "model2.json"
        assert run(["fit", "--input", str(workdir / "train.csv"), "--out", str(out)]
                   + FAST_FIT) == 0
        assert out.read_bytes() == (workdir / "model.json").read_bytes()

    def test_model_stores_config(self, workdir):
        doc = json.loads((workdir / "model.json").read_text())
        cfg = doc["diagnostics"]["config"]
        assert cfg["trees"] == 12 and cfg["seed"] == 5

    def test_provenance_header(self, workdir):
        first = (workdir / "pred.csv").read_text().splitlines()[0] \
            if (workdir / "pred.csv").exists() else None
        out = workdir / "pred2.csv"
        run(["predict", "--model", str(workdir / "model.json"),
             "--input", str(workdir / "train.csv"), "--out", str(out)])
        line = out.read_text().splitlines()[0]
        assert line.startswith("# rulens predict")


class TestDiagnostics:
    def test_importance_global(self, workdir):
        out = workdir / "imp.csv"
        assert run(["importance", "--model", str(workdir / "model.json"),
                    "--out", str(out)]) == 0
        rows = read_rows(out)
        kinds = {r[0] for r in rows[1:]}
        assert kinds == {"term", "variable"}
        rel = [float(r[3]) for r in rows[1:] if r[0] == "variable"]
        assert max(rel) == pytest.approx(100.0)

    def test_importance_region(self, workdir):
        out = workdir / "imp_region.csv"
        assert run(["importance", "--model", str(workdir / "model.json"),
                    "--input", str(workdir / "train.csv"),
                    "--region", "top:0.2", "--out", str(out)]) == 0
        assert len(read_rows(out)) > 1

    def test_pdp_table(self, workdir):
        out = workdir / "pdp.csv"
        assert run(["pdp", "--model", str(workdir / "model.json"),
                    "--input", str(workdir / "train.csv"),
                    "--vars", "x1", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["x1", "partial_dependence"]
        vals = np.array([float(r[1]) for r in rows[1:]])
        assert vals.mean() == pytest.approx(0.0, abs=1e-9)  # centered

    def test_pdp_var_limit(self, workdir):
        assert run(["pdp", "--model", str(workdir / "model.json"),
                    "--input", str(workdir / "train.csv"),
                    "--vars", "x1,x2,x3,x4", "--out", "/tmp/x.csv"]) == RUNTIME_ERROR

    def test_interactions_raw(self, workdir):
        out = workdir / "h.csv"
        assert run(["interactions", "--model", str(workdir / "model.json"),
                    "--input", str(workdir / "train.csv"), "--order", "2",
                    "--vars", "x1,x2,x3", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert [r[0] for r in rows[1:]] == ["x1+x2", "x1+x3", "x2+x3"]
        assert all(float(r[1]) >= 0.0 for r in rows[1:])

    def test_eval_metrics(self, workdir, capsys):
        out = workdir / "eval.csv"
        assert run(["eval", "--model", str(workdir / "model.json"),
                    "--test", str(workdir / "train.csv"),
                    "--truth", str(workdir / "truth.csv"),
                    "--metrics", "aae,target", "--out", str(out)]) == 0
        rows = {r[0]: float(r[1]) for r in read_rows(out)[1:]}
        assert 0.0 <= rows["aae"] < 1.0  # fits training data better than the median
        assert "target" in rows
        assert "aae:" in capsys.readouterr().out

    def test_eval_unknown_metric(self, workdir):
        assert run(["eval", "--model", str(workdir / "model.json"),
                    "--test", str(workdir / "train.csv"),
                    "--metrics", "mse", "--out", "/tmp/x.csv"]) == RUNTIME_ERROR


class TestGenSynth:
    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["gen-synth", "--kind", "bumps", "--n-rows", "30", "--n-cols", "35", "--seed", "2"]
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        # Bodies match; the provenance line differs only by output path.
        assert a.read_text().splitlines()[1:] == b.read_text().splitlines()[1:]

    def test_loadable(self, tmp_path):
        from rulens.data import load_csv

        p = tmp_path / "g.csv"
        run(["gen-synth", "--kind", "eq51", "--n-rows", "25", "--n-cols", "8",
             "--out", str(p)])
        d = load_csv(p)
        assert d.n_rows == 25 and d.n_cols == 8


class TestCategoricalFlow:
    def test_unseen_level_maps_to_sentinel(self, tmp_path):
        train = tmp_path / "t.csv"
        train.write_text("c,x,y\n" + "".join(
            f"{lv},{i},{v}\n" for i, (lv, v) in enumerate(
                [("a", 1.0), ("b", 5.0), ("a", 1.2), ("b", 5.5)] * 8)))
        model_p = tmp_path / "m.json"
        assert run(["fit", "--input", str(train), "--categorical", "c",
                    "--out", str(model_p), "--trees", "6", "--lambdas", "8",
                    "--cv", "2", "--min-node-rows", "2"]) == 0
        model = load_model(model_p)
        test = tmp_path / "new.csv"
        test.write_text("c,x,y\nzzz,0,0\na,0,0\n")
        X = matrix_from_csv(test, model)
        assert X[0, 0] == -1.0  # unseen level
        assert X[1, 0] == 0.0
        predict(model, X)  # must evaluate without error
