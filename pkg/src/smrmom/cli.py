"""Command-line interface: fit, cv, predict, viz, simulate, benchmark.

Exit codes: 0 success (including non-converged fits, which are flagged in
the output), 2 usage errors, 3 data errors.  Failures emit one
machine-readable JSON line on stderr.  SMRMOM_SEED provides a fallback
master seed; explicit flags win over config-file values, which win over
the environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import fit_full_simultaneous, fit_full_tandem, fit_mom_tandem
from .binary import BinaryProblem, fit_binary
from .continuous import ContinuousProblem, fit_continuous
from .core import predict_binary_prob, predict_continuous
from .crossval import CvPlan, select_lambdas
from .dataio import CsvDataError, CsvSchema, FitFileError, load_csv, load_fit, save_fit
from .diagram import export_path_diagram
from .glm import fit_gsmr
from .simulate import (
    DEFAULT_BENCH_HYPER,
    DEFAULT_BENCH_PLAN,
    ESTIMATOR_NAMES,
    KINDS,
    run_benchmark,
    run_scenario,
)
from .types import FactorModel, Hyperparameters, Problem

_USAGE_EXIT = 2
_DATA_EXIT = 3

_HYPER_KEYS = (
    "d", "omega", "lambda_a", "lambda_gamma", "step_a", "step_gamma",
    "max_sweeps", "tol", "prox_scaling", "lambda_d",
)


def _read_config(path: str | None) -> dict:
    """Flat key=value file; '#' starts a comment."""
    if path is None:
        return {}
    cfg = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CsvDataError(f"config line {lineno} is not key=value: {line!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _coerce_step(value):
    if value is None or value == "auto":
        return "auto"
    return float(value)


def _resolve_hyper(args, cfg: dict) -> Hyperparameters:
    def pick(key, cast, default):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        if key in cfg:
            return cast(cfg[key])
        return default

    lam_d = pick("lambda_d", float, None)
    return Hyperparameters(
        d=int(pick("d", int, 2)),
        omega=float(pick("omega", float, 0.1)),
        lambda_a=float(pick("lambda_a", float, 0.0)),
        lambda_gamma=float(pick("lambda_gamma", float, 0.0)),
        step_a=_coerce_step(pick("step_a", _coerce_step, "auto")),
        step_gamma=_coerce_step(pick("step_gamma", _coerce_step, "auto")),
        max_sweeps=int(pick("max_sweeps", int, 1000)),
        tol=float(pick("tol", float, 1e-6)),
        prox_scaling=str(pick("prox_scaling", str, "paper")),
        lambda_d=None if lam_d is None else float(lam_d),
    )


def _resolve_seed(args, cfg: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get("SMRMOM_SEED")
    if env is not None:
        return int(env)
    return 0


def _schema_from_args(args, cfg: dict) -> CsvSchema:
    def pick_list(key):
        flag = getattr(args, key, None)
        if flag is not None:
            return tuple(s.strip() for s in flag.split(",") if s.strip())
        if key in cfg:
            return tuple(s.strip() for s in cfg[key].split(",") if s.strip())
        return None

    covariates = pick_list("covariates")
    outcomes = pick_list("outcomes")
    treatment = getattr(args, "treatment", None) or cfg.get("treatment")
    if not covariates or not outcomes or not treatment:
        raise CsvDataError("need --covariates, --outcomes and --treatment (flags or config)")
    return CsvSchema(
        covariates=covariates,
        outcomes=outcomes,
        treatment=treatment,
        outcome_kind=getattr(args, "kind", None) or cfg.get("kind", "continuous"),
        standardize=bool(getattr(args, "standardize", False)),
    )


def _problem_for(dataset, hyper: Hyperparameters) -> Problem:
    kind = dataset.Y.kind
    if kind == "continuous":
        return ContinuousProblem(X=dataset.X, t=dataset.t, Y=dataset.Y, hyper=hyper)
    if kind == "binary":
        return BinaryProblem(X=dataset.X, t=dataset.t, Y=dataset.Y, hyper=hyper)
    return Problem(X=dataset.X, t=dataset.t, Y=dataset.Y, hyper=hyper)


_FITTERS = {
    "smr-mom": None,  # dispatched by outcome kind below
    "full-tandem": fit_full_tandem,
    "full-simultaneous": fit_full_simultaneous,
    "mom-tandem": fit_mom_tandem,
}


def _run_fit(args) -> int:
    cfg = _read_config(args.config)
    hyper = _resolve_hyper(args, cfg)
    seed = _resolve_seed(args, cfg)
    schema = _schema_from_args(args, cfg)
    dataset = load_csv(args.data, schema)
    prob = _problem_for(dataset, hyper)
    estimator = args.estimator
    if estimator == "smr-mom":
        if dataset.Y.kind == "continuous":
            result = fit_continuous(prob, seed=seed)
        elif dataset.Y.kind == "binary":
            result = fit_binary(prob, seed=seed)
        else:
            result = fit_gsmr(prob, _GLM_LOSS[dataset.Y.kind], seed=seed)
    else:
        if dataset.Y.kind not in ("continuous", "binary"):
            raise CsvDataError(f"estimator {estimator} supports continuous/binary outcomes")
        result = _FITTERS[estimator](prob, seed=seed)
    save_fit(result, args.out)
    print(f"wrote {args.out} (converged={result.converged}, "
          f"objective={result.objective:.6g})")
    return 0


_GLM_LOSS = {"multiclass": "multinomial", "count": "poisson"}


def _run_cv(args) -> int:
    cfg = _read_config(args.config)
    hyper = _resolve_hyper(args, cfg)
    seed = _resolve_seed(args, cfg)
    schema = _schema_from_args(args, cfg)
    dataset = load_csv(args.data, schema)
    prob = _problem_for(dataset, hyper)
    plan_kwargs = dict(k=args.folds, seed=seed, n_gamma=args.n_gamma)
    if args.lambda_a_grid:
        plan_kwargs["lambda_a_grid"] = tuple(float(v) for v in args.lambda_a_grid.split(","))
    if args.lambda_gamma_grid:
        plan_kwargs["lambda_gamma_grid"] = tuple(
            float(v) for v in args.lambda_gamma_grid.split(",")
        )
    plan = CvPlan(**plan_kwargs)
    lam_a, lam_g, table = select_lambdas(prob, plan)
    Path(args.out).write_text(table.to_csv())
    selected = {"lambda_a": lam_a, "lambda_gamma": lam_g, "seed": seed, "k": plan.k}
    if args.selected_out:
        Path(args.selected_out).write_text(json.dumps(selected, sort_keys=True) + "\n")
    print(json.dumps(selected, sort_keys=True))
    return 0


def _run_predict(args) -> int:
    fit = load_fit(args.fit)
    cfg = _read_config(args.config)
    covariates = getattr(args, "covariates", None) or cfg.get("covariates")
    if not covariates:
        raise CsvDataError("need --covariates (flags or config)")
    names = tuple(s.strip() for s in covariates.split(",") if s.strip())
    # parse covariates only; treatment optional for arm-specific predictions
    import csv as _csv

    path = Path(args.data)
    if not path.exists():
        raise CsvDataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = list(reader)
    index = {name: i for i, name in enumerate(header)}
    for name in names:
        if name not in index:
            raise CsvDataError("missing column", column=name)
    raw = np.empty((len(rows), len(names)))
    for i, row in enumerate(rows):
        for j, name in enumerate(names):
            cell = row[index[name]] if index[name] < len(row) else ""
            if cell.strip() == "":
                raise CsvDataError("missing value", row=i + 1, column=name)
            try:
                raw[i, j] = float(cell)
            except ValueError:
                raise CsvDataError(f"non-numeric value {cell!r}", row=i + 1, column=name) from None

    from .core import build_design
    from .types import TreatmentAssignment

    X = build_design(raw, standardize=False)
    effect = X.values @ fit.model.A @ fit.model.Gamma
    out_lines = [",".join(f"effect_{j + 1}" for j in range(effect.shape[1]))]
    extra = None
    if args.treatment:
        tcol = index.get(args.treatment)
        if tcol is None:
            raise CsvDataError("missing column", column=args.treatment)
        t_raw = np.array([float(row[tcol]) for row in rows])
        from .dataio import _map_treatment

        t = TreatmentAssignment(_map_treatment(t_raw, args.treatment))
        if fit.kind == "binary":
            extra = predict_binary_prob(X, t, fit.model)
            label = "prob"
        else:
            extra = predict_continuous(X, t, fit.model)
            label = "pred"
        out_lines[0] += "," + ",".join(f"{label}_{j + 1}" for j in range(extra.shape[1]))
    for i in range(effect.shape[0]):
        cells = [repr(float(v)) for v in effect[i]]
        if extra is not None:
            cells += [repr(float(v)) for v in extra[i]]
        out_lines.append(",".join(cells))
    Path(args.out).write_text("\n".join(out_lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def _run_viz(args) -> int:
    fit = load_fit(args.fit)
    cov_names = None
    out_names = None
    if args.covariate_names:
        cov_names = tuple(s.strip() for s in args.covariate_names.split(","))
    if args.outcome_names:
        out_names = tuple(s.strip() for s in args.outcome_names.split(","))
    dot = export_path_diagram(
        fit.model,
        covariate_names=cov_names,
        outcome_names=out_names,
        threshold=args.threshold,
        kind=fit.kind,
        edge_labels=not args.no_edge_labels,
    )
    Path(args.out).write_text(dot)
    print(f"wrote {args.out}")
    return 0


def _parse_settings(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    bad = [s for s in out if s not in (1, 2, 3, 4)]
    if bad:
        raise CsvDataError(f"unknown settings {bad}; expected 1-4")
    return tuple(out)


def _bench_config(args):
    hyper = DEFAULT_BENCH_HYPER
    if args.prox_scaling:
        hyper = replace(hyper, prox_scaling=args.prox_scaling)
    plan = None if args.no_cv else DEFAULT_BENCH_PLAN
    return hyper, plan


def _run_simulate(args) -> int:
    seed = _resolve_seed(args, {})
    hyper, plan = _bench_config(args)
    result = run_scenario(
        args.setting, args.estimator, args.reps, seed,
        kind=args.kind, base_hyper=hyper, plan=plan, n_jobs=args.jobs,
    )
    payload = {
        "setting": result.setting,
        "kind": result.kind,
        "estimator": result.estimator,
        "median": result.median,
        "iqr": list(result.iqr),
        "mses": result.mses,
        "failures": [list(f) for f in result.failures],
        "lambda_a": result.lambda_a,
        "lambda_gamma": result.lambda_gamma,
        "seed": seed,
    }
    Path(f"{args.out_prefix}.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
    lines = ["rep,mse"] + [f"{i},{float(v)!r}" for i, v in enumerate(result.mses)]
    Path(f"{args.out_prefix}.csv").write_text("\n".join(lines) + "\n")
    print(f"median={result.median:.3f} iqr=[{result.iqr[0]:.3f}, {result.iqr[1]:.3f}]")
    return 0


def _run_benchmark(args) -> int:
    seed = _resolve_seed(args, {})
    hyper, plan = _bench_config(args)
    settings = _parse_settings(args.settings)
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    for k in kinds:
        if k not in KINDS:
            raise CsvDataError(f"unknown outcome kind {k!r}")
    estimators = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    for e in estimators:
        if e not in ESTIMATOR_NAMES:
            raise CsvDataError(f"unknown estimator {e!r}")
    result = run_benchmark(
        settings=settings, estimators=estimators, reps=args.reps, seed=seed,
        kinds=kinds, base_hyper=hyper, plan=plan, n_jobs=args.jobs,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "benchmark.csv").write_text(result.to_csv())
    (out_dir / "benchmark.json").write_text(
        json.dumps(result.to_json_dict(), sort_keys=True) + "\n"
    )
    (out_dir / "tables.txt").write_text(result.tables_text())
    print(result.tables_text())
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smrmom",
        description="Treatment-effect estimation for multiple outcomes in two-arm trials",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--data", required=True, help="trial CSV with a header row")
        p.add_argument("--covariates", help="comma-separated covariate columns")
        p.add_argument("--outcomes", help="comma-separated outcome columns")
        p.add_argument("--treatment", help="treatment column ({0,1} or {-1,1} coded)")
        p.add_argument("--kind", default=None,
                       choices=["continuous", "binary", "multiclass", "count"])
        p.add_argument("--standardize", action="store_true",
                       help="standardize covariates (divisor n-1)")
        p.add_argument("--config", default=None, help="key=value config file")

    def add_hyper_flags(p):
        p.add_argument("--d", type=int, default=None, help="component count")
        p.add_argument("--omega", type=float, default=None)
        p.add_argument("--lambda-a", dest="lambda_a", type=float, default=None)
        p.add_argument("--lambda-gamma", dest="lambda_gamma", type=float, default=None)
        p.add_argument("--lambda-d", dest="lambda_d", type=float, default=None)
        p.add_argument("--step-a", dest="step_a", default=None)
        p.add_argument("--step-gamma", dest="step_gamma", default=None)
        p.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--prox-scaling", dest="prox_scaling", default=None,
                       choices=["paper", "standard"])

    p_fit = sub.add_parser("fit", help="fit an estimator to a trial CSV")
    add_data_flags(p_fit)
    add_hyper_flags(p_fit)
    p_fit.add_argument("--estimator", default="smr-mom",
                       choices=list(ESTIMATOR_NAMES))
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--out", required=True, help="output fit JSON")
    p_fit.set_defaults(func=_run_fit)

    p_cv = sub.add_parser("cv", help="cross-validate the penalty weights")
    add_data_flags(p_cv)
    add_hyper_flags(p_cv)
    p_cv.add_argument("--folds", type=int, default=5)
    p_cv.add_argument("--n-gamma", dest="n_gamma", type=int, default=5)
    p_cv.add_argument("--lambda-a-grid", dest="lambda_a_grid", default=None)
    p_cv.add_argument("--lambda-gamma-grid", dest="lambda_gamma_grid", default=None)
    p_cv.add_argument("--seed", type=int, default=None)
    p_cv.add_argument("--out", required=True, help="cv table CSV")
    p_cv.add_argument("--selected-out", dest="selected_out", default=None)
    p_cv.set_defaults(func=_run_cv)

    p_pred = sub.add_parser("predict", help="apply a saved fit to new covariates")
    p_pred.add_argument("--fit", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--covariates", default=None)
    p_pred.add_argument("--treatment", default=None,
                        help="optional treatment column for arm-specific predictions")
    p_pred.add_argument("--config", default=None)
    p_pred.add_argument("--out", required=True)
    p_pred.set_defaults(func=_run_predict)

    p_viz = sub.add_parser("viz", help="export a DOT path diagram from a saved fit")
    p_viz.add_argument("--fit", required=True)
    p_viz.add_argument("--threshold", type=float, default=0.0)
    p_viz.add_argument("--no-edge-labels", dest="no_edge_labels", action="store_true")
    p_viz.add_argument("--covariate-names", dest="covariate_names", default=None)
    p_viz.add_argument("--outcome-names", dest="outcome_names", default=None)
    p_viz.add_argument("--out", required=True)
    p_viz.set_defaults(func=_run_viz)

    p_sim = sub.add_parser("simulate", help="run one synthetic scenario cell")
    p_sim.add_argument("--setting", type=int, required=True, choices=[1, 2, 3, 4])
    p_sim.add_argument("--kind", default="continuous", choices=list(KINDS))
    p_sim.add_argument("--estimator", default="smr-mom", choices=list(ESTIMATOR_NAMES))
    p_sim.add_argument("--reps", type=int, default=100)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--jobs", type=int, default=1)
    p_sim.add_argument("--no-cv", dest="no_cv", action="store_true")
    p_sim.add_argument("--prox-scaling", dest="prox_scaling", default=None,
                       choices=["paper", "standard"])
    p_sim.add_argument("--out-prefix", dest="out_prefix", required=True)
    p_sim.set_defaults(func=_run_simulate)

    p_bench = sub.add_parser("benchmark", help="run the full synthetic benchmark")
    p_bench.add_argument("--settings", default="1-4", help="e.g. 1-4 or 1,3")
    p_bench.add_argument("--kinds", default="continuous,binary")
    p_bench.add_argument("--estimators", default=",".join(ESTIMATOR_NAMES))
    p_bench.add_argument("--reps", type=int, default=100)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--no-cv", dest="no_cv", action="store_true")
    p_bench.add_argument("--prox-scaling", dest="prox_scaling", default=None,
                         choices=["paper", "standard"])
    p_bench.add_argument("--out-dir", dest="out_dir", required=True)
    p_bench.set_defaults(func=_run_benchmark)

    return parser


def cli_dispatch(argv) -> int:
    """Parse and run one command, mapping failures to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (CsvDataError, FitFileError, FileNotFoundError) as exc:
        print(json.dumps({"error": str(exc), "exit_code": _DATA_EXIT}), file=sys.stderr)
        return _DATA_EXIT
    except ValueError as exc:
        print(json.dumps({"error": str(exc), "exit_code": _DATA_EXIT}), file=sys.stderr)
        return _DATA_EXIT
    except Exception as exc:  # unexpected: still one machine-readable line
        print(
            json.dumps({"error": f"{type(exc).__name__}: {exc}", "exit_code": 1}),
            file=sys.stderr,
        )
        return 1


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
