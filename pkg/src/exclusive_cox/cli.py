"""Command-line front end.

Each subcommand reads CSV input, writes its primary artifact atomically and
exits 0 only after the artifact is written and validated.  Library errors
map to their ``exit_code``; unreadable files exit 5.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .benchmark import BenchmarkConfig, format_summary, run_benchmark, summarize
from .errors import ExclusiveCoxError, InvalidConfig, SchemaError
from .model_selection import cv_fit, make_folds, two_step_ipf_factors
from .penalty import Family, GroupStructure, PenaltySpec, read_groups_csv
from .simulate import SimulationScenario, scenario_presets, train_validation_pair
from .solver import SolverConfig, fit_path, fit_penalized, lambda_grid, lambda_max
from .survival_core import predict_survival

log = logging.getLogger("exclusive_cox")

EXIT_IO = 5


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _add_data(p, groups=True):
    p.add_argument("--data", required=True, help="survival CSV: time,status,<variables>")
    if groups:
        p.add_argument("--groups", help="variable,group CSV (default: one group per variable)")


def _add_solver(p):
    p.add_argument("--tolerance", type=float, default=1e-7)
    p.add_argument("--max-sweeps", type=int, default=1000)
    p.add_argument("--newton-correction", type=_on_off, default=True, metavar="{on,off}")


def _add_penalty(p, default_family="exclusive"):
    p.add_argument("--family", default=default_family,
                   choices=[f.value for f in Family])
    p.add_argument("--alpha", type=float, default=0.5,
                   help="elastic-net mixing weight (elastic only)")
    p.add_argument("--factors", type=_floats,
                   help="IPF per-group factors; derived by the two-step method if omitted")


def _add_grid(p):
    p.add_argument("--lambda", dest="lambdas", type=_floats,
                   help="explicit descending lambda grid, comma separated")
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--grid-min-ratio", type=float, default=1e-3)


def _add_cv(p):
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--repeats", type=int, default=None,
                   help="CV repeats (default 1; 10 for ipf)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help="process pool size (default: logical cores)")
    p.add_argument("--patience", type=int, default=None,
                   help="stop the CV grid walk after this many non-improving lambdas")


def _solver(args):
    return SolverConfig(tolerance=args.tolerance, max_sweeps=args.max_sweeps,
                        newton_correction=args.newton_correction)


def _load(args):
    data = io.read_survival_csv(args.data)
    inputs = {"data": io.input_record(args.data)}
    if getattr(args, "groups", None):
        groups = read_groups_csv(args.groups, data.feature_names)
        inputs["groups"] = io.input_record(args.groups)
    else:
        groups = GroupStructure.singletons(data.p)
        groups = GroupStructure(groups.group_of, tuple(data.feature_names))
    return data, groups, inputs


def _repeats(args, fam):
    if args.repeats is not None:
        return args.repeats
    return 10 if fam is Family.IPF else 1


def _spec_template(args, data, groups, solver, plan=None):
    """Penalty template; IPF factors come from the flag or the two-step method."""
    fam = Family.parse(args.family)
    if fam is Family.ELASTIC:
        return PenaltySpec(fam, alpha=args.alpha)
    if fam is Family.IPF:
        if args.factors is not None:
            return PenaltySpec(fam, group_factors=tuple(args.factors))
        plan = plan or make_folds(data, args.k, 1, args.seed)
        factors = two_step_ipf_factors(data, groups, solver, "ridge", plan,
                                       grid_size=args.grid_size,
                                       grid_min_ratio=args.grid_min_ratio,
                                       workers=args.workers, patience=args.patience)
        return PenaltySpec(fam, group_factors=tuple(factors))
    return PenaltySpec(fam)


def _grid(args, data, groups, spec):
    if args.lambdas:
        return np.asarray(args.lambdas, dtype=float)
    return lambda_grid(lambda_max(data, groups, spec), args.grid_size, args.grid_min_ratio)


def _config(args, **extra):
    """Resolved configuration: every flag except output locations."""
    skip = {"func", "out", "model_out", "truth", "groups_out", "summary", "validation_out",
            "verbose"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    for k in ("data", "groups", "model"):
        if cfg.get(k):
            cfg[k] = Path(cfg[k]).name
    cfg.update(extra)
    return cfg


def _model_doc(model, data, args, inputs, seed, **extra):
    return io.make_artifact("model", _config(args, **extra), seed, inputs,
                            io.model_body(model, data.feature_names))


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args):
    data, groups, inputs = _load(args)
    solver = _solver(args)
    spec = _spec_template(args, data, groups, solver).with_lambda(args.lam)
    model = fit_penalized(data, groups, spec, solver)
    doc = _model_doc(model, data, args, inputs, args.seed, penalty=spec.to_dict())
    io.write_artifact(doc, args.out, io.MODEL_SCHEMA)


def cmd_cv(args):
    data, groups, inputs = _load(args)
    solver = _solver(args)
    fam = Family.parse(args.family)
    first = make_folds(data, args.k, 1, args.seed)
    spec = _spec_template(args, data, groups, solver, first)
    repeats = _repeats(args, fam)
    plan = first if repeats == 1 else make_folds(data, args.k, repeats, args.seed)
    lambdas = _grid(args, data, groups, spec)
    cv, model = cv_fit(data, groups, spec, solver, plan, lambdas, workers=args.workers,
                       patience=args.patience)
    extra = dict(penalty=spec.with_lambda(cv.best_lambda).to_dict(), repeats=repeats)
    body = cv.to_dict()
    body.update(family=fam.value, k=plan.k, repeats=plan.repeats)
    cv_doc = io.make_artifact("cv", _config(args, **extra), args.seed, inputs, body)
    model_doc = _model_doc(model, data, args, inputs, args.seed, **extra)
    model_out = args.model_out or _sibling(args.out, ".model.json")
    io.write_artifact(model_doc, model_out, io.MODEL_SCHEMA)
    io.write_artifact(cv_doc, args.out, io.CV_SCHEMA)


def _sibling(path, suffix):
    p = Path(path)
    stem = p.name[:-len(p.suffix)] if p.suffix else p.name
    return p.with_name(stem + suffix)


def _scenario(args):
    overrides = dict(seed=args.seed)
    if args.n is not None:
        overrides["n"] = args.n
    if args.censor_rate is not None:
        overrides["censor_rate"] = args.censor_rate
    if args.group_sizes is not None:
        if args.signals_per_group is None:
            raise InvalidConfig("--group-sizes needs --signals-per-group")
        base = dict(n=500, group_sizes=tuple(args.group_sizes),
                    signals_per_group=tuple(args.signals_per_group))
        base.update(overrides)
        scn = SimulationScenario(**base)
    else:
        scn = scenario_presets(args.scenario, args.signals, **overrides)
    if args.p is not None and args.p != scn.p:
        raise InvalidConfig(f"group sizes sum to {scn.p}, not p={args.p}")
    return scn


def cmd_simulate(args):
    scn = _scenario(args)
    train, valid = train_validation_pair(scn, args.replicate)
    data = train.dataset
    names = data.feature_names
    gnames = tuple(f"g{g + 1}" for g in range(len(scn.group_sizes)))
    groups = GroupStructure(train.groups.group_of, gnames)
    body = {
        "scenario": scn.to_dict(),
        "replicate": args.replicate,
        "true_beta": {v: float(b) for v, b in zip(names, train.true_beta)},
        "true_support": [names[j] for j in train.true_support],
        "groups": {v: gnames[g] for v, g in zip(names, groups.group_of)},
        "n_events": data.n_events,
    }
    doc = io.make_artifact("truth", _config(args), args.seed, {}, body)
    io.write_survival_csv(data, args.out)
    io.write_groups_csv(groups, names, args.groups_out or _sibling(args.out, ".groups.csv"))
    if args.validation_out:
        io.write_survival_csv(valid.dataset, args.validation_out)
    io.write_artifact(doc, args.truth or _sibling(args.out, ".truth.json"), io.TRUTH_SCHEMA)


def cmd_benchmark(args):
    cfg = BenchmarkConfig(
        families=tuple(Family.parse(f).value for f in args.families.split(",")),
        k=args.k, ipf_repeats=args.ipf_repeats, elastic_alpha=args.alpha,
        grid_size=args.grid_size, grid_min_ratio=args.grid_min_ratio,
        cv_patience=None if args.patience == 0 else args.patience,
        solver=SolverConfig(tolerance=args.tolerance, max_sweeps=args.max_sweeps,
                            newton_correction=args.newton_correction))
    if args.replicates < 1:
        raise InvalidConfig("replicates must be >= 1")
    rows, summaries = [], []
    for sid in args.scenario:
        for sig in args.signals:
            scn = scenario_presets(sid, sig, seed=args.seed)
            results = run_benchmark(scn, args.replicates, cfg, args.workers)
            label = f"{sid}/{sig}"
            for rep, per_family in results:
                for fam in cfg.families:
                    vals = per_family.get(fam, {})
                    if "error" in vals:
                        rows.append([label, fam, "error", rep, ""])
                        continue
                    for metric, value in vals.items():
                        rows.append([label, fam, metric, rep, repr(float(value))])
            summaries.append(f"Scenario {sid}, {sig} signal variables, "
                             f"{args.replicates} replicates\n"
                             + format_summary(summarize(results)))
    io.write_csv(args.out, ["scenario", "model", "metric", "replicate", "value"], rows)
    summary_path = args.summary or _sibling(args.out, ".summary.txt")
    with io.atomic_writer(summary_path) as fh:
        fh.write("\n\n".join(summaries) + "\n")


def cmd_path(args):
    data, groups, inputs = _load(args)
    solver = _solver(args)
    spec = _spec_template(args, data, groups, solver)
    lambdas = _grid(args, data, groups, spec)
    if args.include_zero and (lambdas.size == 0 or lambdas[-1] > 0):
        lambdas = np.append(lambdas, 0.0)
    models = fit_path(data, groups, spec, solver, lambdas)
    rows = ([repr(float(lam)), v, repr(float(b))]
            for lam, m in zip(lambdas, models) for v, b in zip(data.feature_names, m.beta))
    io.write_csv(args.out, ["lambda", "variable", "coefficient"], rows)


def cmd_filter_variance(args):
    table = io.read_raw_csv(args.data)
    data = io.table_to_dataset(table)
    names = list(data.feature_names)
    protected = set()
    if args.protected:
        if not args.groups:
            raise SchemaError("--protected needs --groups")
        groups = read_groups_csv(args.groups, data.feature_names)
        gnames = io.group_names(groups)
        unknown = set(args.protected) - set(gnames)
        if unknown:
            raise SchemaError(f"protected group {sorted(unknown)[0]!r} not in groups file")
        protected = {v for v, g in zip(names, groups.group_of) if gnames[g] in args.protected}
    var = data.X.var(axis=0, ddof=1) if data.n > 1 else np.zeros(data.p)
    candidates = [j for j, v in enumerate(names) if v not in protected]
    if args.min_var is not None:
        candidates = [j for j in candidates if var[j] >= args.min_var]
    if args.top_k is not None:
        if not 0 <= args.top_k <= data.p - len(protected):
            raise SchemaError(f"top-k {args.top_k} exceeds the {data.p - len(protected)} "
                              "unprotected covariates")
        # stable sort on -variance keeps column order among ties
        candidates = sorted(candidates, key=lambda j: -var[j])[:args.top_k]
    keep = set(candidates) | {j for j, v in enumerate(names) if v in protected}
    cols = [0, 1] + [j + 2 for j in range(data.p) if j in keep]
    io.write_csv(args.out, [table.header[c] for c in cols],
                 ([row[c] for c in cols] for row in table.rows))


def _stratified_split(data, fraction, rng):
    train = []
    for flag in (True, False):
        idx = rng.permutation(np.flatnonzero(data.event == flag))
        train.extend(idx[:int(round(fraction * idx.size))])
    return np.sort(np.asarray(train, dtype=np.int64))


def cmd_select_frequency(args):
    data, groups, inputs = _load(args)
    if not 0 < args.fraction <= 1:
        raise InvalidConfig("--fraction must lie in (0, 1]")
    if args.repeats is None:
        args.repeats = 100
    solver = _solver(args)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 4243]))
    counts = np.zeros(data.p, dtype=np.int64)
    for r in range(args.repeats):
        rows = _stratified_split(data, args.fraction, rng)
        train = data.subset(rows)
        seed = int(rng.integers(2**31))
        plan = make_folds(train, args.k, 1, seed)
        sub = argparse.Namespace(**{**vars(args), "seed": seed})
        spec = _spec_template(sub, train, groups, solver, plan)
        if spec.family is Family.IPF and args.cv_repeats > 1:
            plan = make_folds(train, args.k, args.cv_repeats, seed)
        lambdas = _grid(args, train, groups, spec)
        _, model = cv_fit(train, groups, spec, solver, plan, lambdas,
                          workers=args.workers, patience=args.patience)
        counts[model.support()] += 1
    gnames = io.group_names(groups)
    order = sorted(range(data.p), key=lambda j: -counts[j])
    rows = ([data.feature_names[j], gnames[groups.group_of[j]], int(counts[j]),
             repr(float(counts[j] / args.repeats))] for j in order)
    io.write_csv(args.out, ["variable", "group", "count", "frequency"], rows)


def cmd_predict(args):
    model = io.load_model(args.model)
    table = io.read_raw_csv(args.data)
    header = table.header
    missing = [v for v in model.variables if v not in header]
    if missing:
        raise SchemaError(f"data is missing model variable {missing[0]!r}")
    cols = [header.index(v) for v in model.variables]
    X = np.empty((len(table.rows), len(cols)))
    for i, row in enumerate(table.rows):
        for k, c in enumerate(cols):
            X[i, k] = io._parse_float(row[c], i + 2, header[c])
    times = np.asarray(args.times, dtype=float)
    if times.size == 0 or np.any(times < 0):
        raise InvalidConfig("--times must list non-negative times")
    surv = np.atleast_2d(predict_survival(model, X, times)).reshape(X.shape[0], times.size)
    rows = ([i, repr(float(t)), repr(float(surv[i, k]))]
            for i in range(X.shape[0]) for k, t in enumerate(times))
    io.write_csv(args.out, ["row", "time", "survival"], rows)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    ap = argparse.ArgumentParser(prog="exclusive-cox",
                                 description="Penalized Cox regression with Exclusive Lasso.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model at a fixed lambda")
    _add_data(p)
    _add_penalty(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--seed", type=int, default=0, help="seeds the IPF two-step CV")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--grid-min-ratio", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--patience", type=int, default=None)
    _add_solver(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="choose lambda by cross-validation and refit")
    _add_data(p)
    _add_penalty(p)
    _add_grid(p)
    _add_cv(p)
    _add_solver(p)
    p.add_argument("--out", required=True, help="CV result JSON")
    p.add_argument("--model-out", help="model JSON (default: <out>.model.json)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="draw a simulated training set")
    p.add_argument("--scenario", type=int, default=1)
    p.add_argument("--signals", type=int, default=5)
    p.add_argument("--group-sizes", type=_ints)
    p.add_argument("--signals-per-group", type=_ints)
    p.add_argument("--p", type=int, help="expected total covariate count (checked)")
    p.add_argument("--n", type=int)
    p.add_argument("--censor-rate", type=float)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="training data CSV")
    p.add_argument("--truth", help="truth JSON (default: <out>.truth.json)")
    p.add_argument("--groups-out", help="groups CSV (default: <out>.groups.csv)")
    p.add_argument("--validation-out", help="also write the paired validation CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="simulation benchmark over replicates")
    p.add_argument("--scenario", type=_ints, default=[1])
    p.add_argument("--signals", type=_ints, default=[5])
    p.add_argument("--families", default="elastic,exclusive,group,ipf")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--ipf-repeats", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--grid-size", type=int, default=30)
    p.add_argument("--grid-min-ratio", type=float, default=0.02)
    p.add_argument("--patience", type=int, default=3, help="0 walks the full grid")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--max-sweeps", type=int, default=1000)
    p.add_argument("--newton-correction", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--out", required=True, help="long-format results CSV")
    p.add_argument("--summary", help="summary table (default: <out>.summary.txt)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("path", help="coefficients along a lambda path")
    _add_data(p)
    _add_penalty(p)
    _add_grid(p)
    p.add_argument("--include-zero", action="store_true", help="append lambda = 0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--patience", type=int, default=None)
    _add_solver(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("filter-variance", help="keep the highest-variance covariates")
    _add_data(p)
    p.add_argument("--top-k", type=int)
    p.add_argument("--min-var", type=float)
    p.add_argument("--protected", action="append", default=[],
                   help="group name whose variables always survive (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter_variance)

    p = sub.add_parser("select-frequency", help="selection counts over random splits")
    _add_data(p)
    _add_penalty(p)
    _add_grid(p)
    _add_cv(p)
    _add_solver(p)
    p.add_argument("--fraction", type=float, default=0.7)
    p.add_argument("--cv-repeats", type=int, default=1, help="CV repeats for ipf")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select_frequency)

    p = sub.add_parser("predict", help="survival probabilities from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV holding the model's variables")
    p.add_argument("--times", type=_floats, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ExclusiveCoxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
