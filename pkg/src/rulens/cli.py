"""Command-line front end: fit, predict, diagnose and generate with reproducible seeds."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .bench import (DISCRETE_TARGET, LINEAR_PLUS_BUMPS, SynthSpec, generate, metric_aae,
                    metric_error_rate, metric_target_error)
from .data import BINARY, CATEGORICAL, ParseError, SchemaError, load_csv
from .ensemble import EnsembleConfig
from .interpret import (GLOBAL, InteractionBudget, StatRequest, compute_statistic,
                        excess_statistics, global_term_importance, local_term_importance,
                        null_distribution, partial_dependence, prediction_region,
                        region_importance)
from .losses import LossSpec
from .pipeline import PipelineConfig, fit_rule_ensemble
from .sparsefit import FitConfig, atomic_write_text, load_model, predict, save_model

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _provenance(argv) -> str:
    return "# rulens " + " ".join(argv) + "\n"


def _write_csv(path, argv, header, rows):
    buf = io.StringIO()
    buf.write(_provenance(argv))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _add_fit_flags(p: argparse.ArgumentParser):
    p.add_argument("--loss", choices=["squared", "huber", "ramp"], default="squared")
    p.add_argument("--huber-alpha", type=float, default=0.9)
    p.add_argument("--trees", type=int, default=333)
    p.add_argument("--nu", type=float, default=0.01)
    p.add_argument("--eta", type=int, default=None)
    p.add_argument("--lbar", type=float, default=4.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--min-node-rows", type=int, default=10)
    p.add_argument("--beta", type=float, default=0.025)
    p.add_argument("--basis", choices=["both", "rules", "linear"], default="both")
    p.add_argument("--cv", type=int, default=10, help="k-fold CV for lambda selection; 0 for holdout")
    p.add_argument("--holdout", type=float, default=0.0)
    p.add_argument("--lambdas", type=int, default=100)
    p.add_argument("--min-ratio", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)


def _pipeline_config(args) -> PipelineConfig:
    loss = LossSpec(kind=args.loss, alpha=args.huber_alpha)
    return PipelineConfig(
        loss=loss, seed=args.seed, beta=args.beta, basis_kind=args.basis,
        ensemble=EnsembleConfig(n_trees=args.trees, nu=args.nu, eta=args.eta,
                                lbar=args.lbar, kappa=args.kappa,
                                min_node_rows=args.min_node_rows),
        fit=FitConfig(n_lambdas=args.lambdas, min_ratio=args.min_ratio,
                      cv_folds=args.cv, holdout_fraction=args.holdout,
                      max_iter=args.max_iter, tol=args.tol))


def _config_to_json(args) -> dict:
    keys = ["loss", "huber_alpha", "trees", "nu", "eta", "lbar", "kappa", "min_node_rows",
            "beta", "basis", "cv", "holdout", "lambdas", "min_ratio", "tol", "max_iter",
            "seed", "categorical", "target"]
    return {k: getattr(args, k, None) for k in keys}


def _config_from_json(doc: dict) -> PipelineConfig:
    ns = argparse.Namespace(
        loss=doc["loss"], huber_alpha=doc["huber_alpha"], trees=doc["trees"], nu=doc["nu"],
        eta=doc["eta"], lbar=doc["lbar"], kappa=doc["kappa"], min_node_rows=doc["min_node_rows"],
        beta=doc["beta"], basis=doc["basis"], cv=doc["cv"], holdout=doc["holdout"],
        lambdas=doc["lambdas"], min_ratio=doc["min_ratio"], tol=doc["tol"],
        max_iter=doc["max_iter"], seed=doc["seed"])
    return _pipeline_config(ns)


def _split_names(text):
    return [t for t in (text or "").split(",") if t]


def matrix_from_csv(path, model) -> np.ndarray:
    """Feature matrix for a model from a CSV file, mapped by column name.

    Categorical strings map to training-time level codes; unseen levels get
    code -1 (member of no enumerated subset).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        while header and header[0].startswith("#"):
            header = next(reader)
        rows = list(reader)
    pos = {}
    for name in model.column_names:
        if name not in header:
            raise SchemaError(f"{path}: model variable {name!r} missing from file")
        pos[name] = header.index(name)
    X = np.empty((len(rows), len(model.column_names)))
    for j, (name, kind, levels) in enumerate(
            zip(model.column_names, model.column_kinds, model.column_levels)):
        codes = {lv: i for i, lv in enumerate(levels)}
        for i, row in enumerate(rows):
            cell = row[pos[name]]
            if kind == CATEGORICAL:
                X[i, j] = codes.get(cell, -1)
            else:
                try:
                    X[i, j] = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: row {i + 2}: non-numeric value {cell!r} "
                                     f"in column {name!r}") from None
    return X


def cmd_fit(args, argv) -> int:
    data = load_csv(args.input, categorical=_split_names(args.categorical), target=args.target)
    cfg = _pipeline_config(args)
    model = fit_rule_ensemble(data, cfg)
    model.diagnostics["config"] = _config_to_json(args)
    save_model(model, args.out)
    print(f"fit: {model.n_nonzero} nonzero terms, lambda={model.selected_lambda:.6g}, "
          f"model written to {args.out}")
    return 0


def cmd_predict(args, argv) -> int:
    model = load_model(args.model)
    X = matrix_from_csv(args.input, model)
    f = predict(model, X)
    if model.task == BINARY:
        rows = [(fi, 1 if fi >= 0 else -1) for fi in f]
        _write_csv(args.out, argv, ["prediction", "label"], rows)
    else:
        _write_csv(args.out, argv, ["prediction"], [(fi,) for fi in f])
    return 0


def _parse_region(text):
    which, _, frac = text.partition(":")
    if which not in ("top", "bottom") or not frac:
        raise ValueError(f"bad region spec {text!r}; expected top:F or bottom:F")
    return which, float(frac)


def cmd_importance(args, argv) -> int:
    model = load_model(args.model)
    if args.at:
        X = matrix_from_csv(args.at, model)
        report = local_term_importance(model, X[0])
    elif args.region:
        which, frac = _parse_region(args.region)
        X = matrix_from_csv(args.input, model)
        rows = prediction_region(model, X, which, frac)
        report = region_importance(model, X[rows])
    else:
        report = global_term_importance(model)
    term_rows = list(zip(report.term_labels, report.term_values, report.scaled_terms()))
    term_rows.sort(key=lambda r: -r[1])
    var_rows = sorted(zip(model.column_names, report.variable_values, report.scaled_variables()),
                      key=lambda r: -r[1])
    _write_csv(args.out, argv, ["kind", "name", "importance", "relative"],
               [("term", n, v, s) for n, v, s in term_rows]
               + [("variable", n, v, s) for n, v, s in var_rows])
    return 0


def cmd_pdp(args, argv) -> int:
    model = load_model(args.model)
    X = matrix_from_csv(args.input, model)
    names = _split_names(args.vars)
    if not 1 <= len(names) <= 3:
        raise ValueError("pdp supports 1 to 3 variables")
    vars_ = [model.column_names.index(n) for n in names]
    budget = InteractionBudget(max_eval_points=args.max_eval, max_integration_rows=args.max_int,
                               exact=args.exact, seed=args.seed)
    _, x_int = budget.sample(X)
    grids = [np.unique(X[:, v]) for v in vars_]
    if len(vars_) == 1:
        pts = grids[0][:, None]
    else:
        mesh = np.meshgrid(*grids, indexing="ij")
        pts = np.column_stack([m.ravel() for m in mesh])
    vals = partial_dependence(model, vars_, pts, x_int, center=True)
    _write_csv(args.out, argv, names + ["partial_dependence"],
               [tuple(p) + (v,) for p, v in zip(pts, vals)])
    return 0


def _interaction_requests(order, vars_, n_cols):
    import itertools

    pool = vars_ if vars_ else list(range(n_cols))
    if order == 1:
        return [StatRequest("total", (j,)) for j in pool]
    if order == 2:
        return [StatRequest("pair", t) for t in itertools.combinations(pool, 2)]
    return [StatRequest("triple", t) for t in itertools.combinations(pool, 3)]


def cmd_interactions(args, argv) -> int:
    model = load_model(args.model)
    X = matrix_from_csv(args.input, model)
    vars_ = [model.column_names.index(n) for n in _split_names(args.vars)]
    requests = _interaction_requests(args.order, vars_, len(model.column_names))
    budget = InteractionBudget(max_eval_points=args.max_eval, max_integration_rows=args.max_int,
                               exact=args.exact, seed=args.seed)
    x_eval, x_int = budget.sample(X)
    raw = [(req, compute_statistic(model, req, x_eval, x_int,
                                   importance_weighted=args.importance_weighted))
           for req in requests]
    if args.null_reps > 0:
        if "config" not in model.diagnostics:
            raise ValueError("model file has no stored fit configuration for null refits")
        cfg_doc = model.diagnostics["config"]
        cfg = _config_from_json(cfg_doc)
        data = load_csv(args.train, categorical=_split_names(cfg_doc.get("categorical")),
                        target=cfg_doc.get("target") or "y")
        null = null_distribution(data, cfg, requests, reps=args.null_reps, budget=budget,
                                 importance_weighted=args.importance_weighted)
        reports = excess_statistics(raw, null)
        rows = [("+".join(model.column_names[v] for v in r.variables),
                 r.h, r.null_mean, r.null_std, r.excess) for r in reports]
    else:
        rows = [("+".join(model.column_names[v] for v in req.variables), h, "", "", "")
                for req, h in raw]
    _write_csv(args.out, argv, ["tuple", "H", "null_mean", "null_std", "excess"], rows)
    return 0


def cmd_null_calibrate(args, argv) -> int:
    model = load_model(args.model)
    if "config" not in model.diagnostics:
        raise ValueError("model file has no stored fit configuration for null refits")
    cfg_doc = model.diagnostics["config"]
    cfg = _config_from_json(cfg_doc)
    data = load_csv(args.train, categorical=_split_names(cfg_doc.get("categorical")),
                    target=cfg_doc.get("target") or "y")
    vars_ = [model.column_names.index(n) for n in _split_names(args.vars)]
    requests = _interaction_requests(args.order, vars_, len(model.column_names))
    budget = InteractionBudget(max_eval_points=args.max_eval, max_integration_rows=args.max_int,
                               exact=args.exact, seed=args.seed)
    null = null_distribution(data, cfg, requests, reps=args.null_reps, budget=budget)
    rows = [("+".join(model.column_names[v] for v in n.request.variables), n.mean, n.std)
            for n in null]
    _write_csv(args.out, argv, ["tuple", "null_mean", "null_std"], rows)
    return 0


def cmd_gen_synth(args, argv) -> int:
    kind = {"eq51": DISCRETE_TARGET, "discrete": DISCRETE_TARGET,
            "eq27": LINEAR_PLUS_BUMPS, "bumps": LINEAR_PLUS_BUMPS}[args.kind]
    spec = SynthSpec(kind, args.n_rows, args.n_cols, signal_to_noise=args.snr,
                     seed=args.seed, second_term=args.second_term)
    data, f_star = generate(spec)
    names = [c.name for c in data.columns]
    rows = [tuple(data.matrix[i]) + (data.response[i],) for i in range(data.n_rows)]
    _write_csv(args.out, argv, names + ["y"], rows)
    if args.with_truth:
        _write_csv(args.with_truth, argv, ["f_star"], [(v,) for v in f_star])
    return 0


def cmd_eval(args, argv) -> int:
    model = load_model(args.model)
    test = load_csv(args.test, categorical=[n for n, k in zip(model.column_names, model.column_kinds)
                                            if k == CATEGORICAL],
                    target=args.target)
    X = matrix_from_csv(args.test, model)
    f = predict(model, X)
    metrics = _split_names(args.metrics) or ["aae"]
    rows = []
    for m in metrics:
        if m == "aae":
            rows.append(("aae", metric_aae(f, test.response)))
        elif m == "target":
            if not args.truth:
                raise ValueError("--truth file required for the target metric")
            truth = np.loadtxt(args.truth, delimiter=",", skiprows=_skip_rows(args.truth))
            rows.append(("target", metric_target_error(f, truth)))
        elif m == "errrate":
            rows.append(("errrate", metric_error_rate(f, test.response)))
        else:
            raise ValueError(f"unknown metric {m!r}")
    _write_csv(args.out, argv, ["metric", "value"], rows)
    for name, val in rows:
        print(f"{name}: {val:.6g}")
    return 0


def _skip_rows(path) -> int:
    skip = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.strip() == "f_star":
                skip += 1
            else:
                break
    return skip


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rulens",
                                description="rule-ensemble fitting and interpretation")
    p.add_argument("--version", action="version", version=f"rulens {__version__}")
    p.add_argument("--threads", type=int, default=1,
                   help="worker-parallelism bound; output is identical for any value")
    sub = p.add_subparsers(dest="command")

    f = sub.add_parser("fit", help="fit a rule-ensemble model")
    f.add_argument("--input", required=True)
    f.add_argument("--target", default="y")
    f.add_argument("--categorical", default="")
    f.add_argument("--out", required=True)
    _add_fit_flags(f)
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="predict with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    im = sub.add_parser("importance", help="term and variable importances")
    im.add_argument("--model", required=True)
    im.add_argument("--input", help="data file for region importances")
    im.add_argument("--at", help="single-row file for a local importance")
    im.add_argument("--region", help="top:F or bottom:F prediction region")
    im.add_argument("--out", required=True)
    im.set_defaults(func=cmd_importance)

    pd = sub.add_parser("pdp", help="partial dependence tables")
    pd.add_argument("--model", required=True)
    pd.add_argument("--input", required=True)
    pd.add_argument("--vars", required=True)
    pd.add_argument("--out", required=True)
    _add_budget_flags(pd)
    pd.set_defaults(func=cmd_pdp)

    it = sub.add_parser("interactions", help="interaction strength statistics")
    it.add_argument("--model", required=True)
    it.add_argument("--input", required=True)
    it.add_argument("--train", help="training file, needed with --null-reps")
    it.add_argument("--order", type=int, choices=[1, 2, 3], required=True)
    it.add_argument("--vars", default="")
    it.add_argument("--null-reps", type=int, default=0)
    it.add_argument("--importance-weighted", action="store_true")
    it.add_argument("--out", required=True)
    _add_budget_flags(it)
    it.set_defaults(func=cmd_interactions)

    nc = sub.add_parser("null-calibrate", help="bootstrap null means and stds")
    nc.add_argument("--model", required=True)
    nc.add_argument("--train", required=True)
    nc.add_argument("--order", type=int, choices=[1, 2, 3], required=True)
    nc.add_argument("--vars", default="")
    nc.add_argument("--null-reps", type=int, default=10)
    nc.add_argument("--out", required=True)
    _add_budget_flags(nc)
    nc.set_defaults(func=cmd_null_calibrate)

    gs = sub.add_parser("gen-synth", help="generate synthetic benchmark data")
    gs.add_argument("--kind", choices=["eq51", "eq27", "discrete", "bumps"], required=True)
    gs.add_argument("--n-rows", type=int, required=True)
    gs.add_argument("--n-cols", type=int, required=True)
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--snr", type=float, default=2.0)
    gs.add_argument("--second-term", choices=["verbatim", "squared"], default="verbatim")
    gs.add_argument("--out", required=True)
    gs.add_argument("--with-truth")
    gs.set_defaults(func=cmd_gen_synth)

    ev = sub.add_parser("eval", help="evaluate a model on a test file")
    ev.add_argument("--model", required=True)
    ev.add_argument("--test", required=True)
    ev.add_argument("--target", default="y")
    ev.add_argument("--truth")
    ev.add_argument("--metrics", default="aae")
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)
    return p


def _add_budget_flags(p):
    p.add_argument("--max-eval", type=int, default=500)
    p.add_argument("--max-int", type=int, default=500)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--seed", type=int, default=0)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else USAGE_ERROR
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args, argv)
    except (ParseError, SchemaError, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return RUNTIME_ERROR


def main() -> None:
    sys.exit(run())
