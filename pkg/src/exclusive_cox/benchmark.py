"""Simulation benchmark: train/validation replicates, CV fits, metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ExclusiveCoxError
from .metrics import integrated_brier_score, selection_metrics
from .model_selection import cv_fit, make_folds, parallel_map, two_step_ipf_factors
from .penalty import Family, PenaltySpec
from .simulate import SimulationScenario, train_validation_pair
from .solver import SolverConfig
from .survival_core import predict_survival

log = logging.getLogger(__name__)

METRICS = ("accuracy", "f1", "fdr", "ibs")
LABELS = {
    Family.ELASTIC: "Elastic Net",
    Family.EXCLUSIVE: "Exclusive Lasso",
    Family.GROUP: "Group Lasso",
    Family.IPF: "IPF",
    Family.LASSO: "Lasso",
    Family.RIDGE: "Ridge",
}


@dataclass(frozen=True)
class BenchmarkConfig:
    families: tuple = ("elastic", "exclusive", "group", "ipf")
    k: int = 5
    ipf_repeats: int = 10
    elastic_alpha: float = 0.5
    grid_size: int = 30
    grid_min_ratio: float = 0.02
    step_one_min_ratio: float = 1e-3
    horizon_quantile: float = 0.8
    cv_patience: int | None = 3
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(tolerance=1e-6))

    def to_dict(self):
        d = asdict(self)
        d["families"] = list(self.families)
        d["solver"] = self.solver.to_dict()
        return d


def fit_family(train, groups, family, config: BenchmarkConfig, seed=0, workers=1):
    """CV-tuned fit of one family on ``train``; returns ``(cv_result, model)``."""
    fam = Family.parse(family)
    plan = make_folds(train, config.k, 1, seed)
    if fam is Family.IPF:
        factors = two_step_ipf_factors(train, groups, config.solver, "ridge", plan,
                                       grid_size=config.grid_size,
                                       grid_min_ratio=config.step_one_min_ratio,
                                       workers=workers, patience=config.cv_patience)
        spec = PenaltySpec(fam, group_factors=tuple(factors))
        plan = make_folds(train, config.k, config.ipf_repeats, seed)
    elif fam is Family.ELASTIC:
        spec = PenaltySpec(fam, alpha=config.elastic_alpha)
    else:
        spec = PenaltySpec(fam)
    return cv_fit(train, groups, spec, config.solver, plan, grid_size=config.grid_size,
                  grid_min_ratio=config.grid_min_ratio, workers=workers,
                  patience=config.cv_patience)


def evaluate(model, sim_train, valid, config: BenchmarkConfig):
    """Selection metrics against the truth plus validation IBS."""
    out = {}
    if model.spec.family is not Family.RIDGE:
        rep = selection_metrics(model.support(), sim_train.true_support, sim_train.dataset.p)
        out.update(accuracy=rep.accuracy, f1=rep.f1, fdr=rep.fdr)
    vdata = valid.dataset
    horizon = float(np.quantile(vdata.time, config.horizon_quantile))
    bs = integrated_brier_score(lambda ts: predict_survival(model, vdata.X, ts), vdata,
                                horizon=horizon)
    out["ibs"] = bs.ibs
    out["lambda"] = model.lam
    out["n_selected"] = float(np.count_nonzero(model.beta))
    return out


def run_replicate(args):
    scenario, replicate, config = args
    train, valid = train_validation_pair(scenario, replicate)
    results = {}
    for fam in config.families:
        try:
            _, model = fit_family(train.dataset, train.groups, fam, config,
                                  seed=scenario.seed * 1000 + replicate)
            results[Family.parse(fam).value] = evaluate(model, train, valid, config)
        except ExclusiveCoxError as exc:
            log.warning("replicate %d, %s failed: %s", replicate, fam, exc)
            results[Family.parse(fam).value] = {"error": str(exc)}
    return replicate, results


def run_benchmark(scenario: SimulationScenario, replicates: int,
                  config: BenchmarkConfig = BenchmarkConfig(), workers=1, progress=None):
    """All replicates, returned in replicate order regardless of ``workers``."""
    jobs = [(scenario, r, config) for r in range(replicates)]
    if progress is None:
        return parallel_map(run_replicate, jobs, workers)
    out = []
    for job in jobs:
        out.append(run_replicate(job))
        progress(out[-1])
    return out


def long_rows(results, scenario_label=""):
    """``(model, metric, replicate, value)`` rows in (replicate, family) order."""
    rows = []
    for rep, per_family in results:
        for fam, vals in per_family.items():
            for metric, value in vals.items():
                if metric == "error":
                    continue
                rows.append((fam, metric, rep, value))
    return rows


def summarize(results, metrics=METRICS):
    """Mean and standard error per (family, metric) over successful replicates."""
    table = {}
    for _, per_family in results:
        for fam, vals in per_family.items():
            for metric in metrics:
                if metric in vals:
                    table.setdefault(fam, {}).setdefault(metric, []).append(vals[metric])
    summary = {}
    for fam, by_metric in table.items():
        summary[fam] = {}
        for metric, values in by_metric.items():
            v = np.asarray(values, dtype=float)
            se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
            summary[fam][metric] = (float(v.mean()), se, int(v.size))
    return summary


def format_summary(summary, metrics=METRICS):
    """Plain-text table: one row per metric, ``mean (se)`` per family."""
    fams = list(summary)
    names = {"accuracy": "Selection Accuracy", "f1": "F1 score",
             "fdr": "False discovery rate", "ibs": "Integrated Brier score"}
    header = ["Metric"] + [LABELS.get(Family.parse(f), f) for f in fams]
    lines = [" | ".join(header)]
    for m in metrics:
        cells = [names.get(m, m)]
        for f in fams:
            if m in summary[f]:
                mean, se, _ = summary[f][m]
                cells.append(f"{mean:.2f} ({se:.3f})")
            else:
                cells.append("-")
        lines.append(" | ".join(cells))
    return "\n".join(lines)
