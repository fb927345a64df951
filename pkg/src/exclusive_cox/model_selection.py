"""Cross-validated choice of lambda and two-step IPF penalty factors."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroStepOne, ExclusiveCoxError, InvalidConfig, TooFewEvents
from .penalty import Family, GroupStructure, PenaltySpec
from .solver import SolverConfig, check_grid, fit_path, fit_penalized, lambda_grid, lambda_max
from .survival_core import SurvivalDataset, partial_log_likelihood

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CvPlan:
    k: int
    repeats: int
    fold_assignments: tuple  # one int array per repeat, fold id per observation
    seed: int

    def folds(self, repeat):
        a = self.fold_assignments[repeat]
        return [np.flatnonzero(a == f) for f in range(self.k)]


@dataclass(frozen=True, eq=False)
class CvResult:
    lambdas: np.ndarray
    mean_cv_loglik: np.ndarray
    se_cv_loglik: np.ndarray
    best_lambda: float
    fold_scores: np.ndarray  # (repeats, k, n_lambdas)

    @property
    def best_index(self):
        return int(np.flatnonzero(self.lambdas == self.best_lambda)[0])

    def to_dict(self):
        return {
            "lambdas": self.lambdas.tolist(),
            "mean_cv_loglik": [None if not np.isfinite(v) else float(v) for v in self.mean_cv_loglik],
            "se_cv_loglik": [None if not np.isfinite(v) else float(v) for v in self.se_cv_loglik],
            "best_lambda": self.best_lambda,
        }


def make_folds(data: SurvivalDataset, k: int, repeats: int = 1, seed: int = 0) -> CvPlan:
    """Event-stratified fold assignment.

    Events and censored observations are shuffled separately and dealt
    round-robin, the censored deal continuing where the events stopped, so
    fold sizes differ by at most one and every fold holds an event.
    """
    n = data.n
    if k < 2:
        raise InvalidConfig(f"k must be >= 2, got {k}")
    if repeats < 1:
        raise InvalidConfig("repeats must be >= 1")
    events = np.flatnonzero(data.event)
    censored = np.flatnonzero(~data.event)
    # k <= n_events <= n, so this also rules out k > n
    if events.size < k:
        raise TooFewEvents(f"{events.size} events cannot populate {k} folds")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7919]))
    plans = []
    for _ in range(repeats):
        a = np.empty(n, dtype=np.int64)
        ev = rng.permutation(events)
        ce = rng.permutation(censored)
        a[ev] = np.arange(ev.size) % k
        a[ce] = (ev.size + np.arange(ce.size)) % k
        a.setflags(write=False)
        plans.append(a)
    return CvPlan(k, repeats, tuple(plans), int(seed))


def _fold_scores(args):
    data, groups, spec_template, config, train_idx, lambdas = args
    fold = _Fold(data, groups, spec_template, config, train_idx)
    return np.array([fold.score(lam) for lam in lambdas])


class _Fold:
    """One training split walked down the grid with warm starts."""

    def __init__(self, data, groups, spec_template, config, train_idx):
        self.data = data
        self.train = data.subset(train_idx)
        self.groups = groups
        self.spec = spec_template
        self.config = config
        self.beta = None

    def score(self, lam):
        try:
            model = fit_penalized(self.train, self.groups, self.spec.with_lambda(lam),
                                  self.config, self.beta)
        except ExclusiveCoxError as exc:
            log.debug("fold fit failed at lambda=%g: %s", lam, exc)
            self.beta = None
            return np.nan
        self.beta = model.beta
        try:
            return (partial_log_likelihood(self.data, model.beta)
                    - partial_log_likelihood(self.train, model.beta))
        except ExclusiveCoxError:
            return np.nan


def parallel_map(fn, items, workers=None):
    """Ordered map over ``items`` with an optional process pool."""
    items = list(items)
    workers = (os.cpu_count() or 1) if workers is None else int(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _lockstep_scores(data, groups, spec_template, config, splits, lambdas, patience):
    folds = [_Fold(data, groups, spec_template, config, idx) for idx in splits]
    scores = np.full((len(folds), lambdas.size), np.nan)
    best = -np.inf
    since_best = 0
    for i, lam in enumerate(lambdas):
        scores[:, i] = [f.score(lam) for f in folds]
        total = scores[:, i].sum()
        if total > best:
            best, since_best = total, 0
        elif np.isfinite(best):
            since_best += 1
            if since_best >= patience:
                break
    return scores


def cv_predictive_loglik(data: SurvivalDataset, groups: GroupStructure,
                         spec_template: PenaltySpec, config: SolverConfig, plan: CvPlan,
                         lambdas, workers=1, patience=None) -> CvResult:
    """Cross-validated partial likelihood over a descending grid.

    Fold ``f`` contributes ``l(beta_-f) - l_-f(beta_-f)``: the full-data
    partial likelihood minus the training-fold partial likelihood at the
    training-fold estimate.  Contributions are summed over folds and averaged
    over repeats.  A lambda with any non-finite fold score is left out of the
    argmax; ties go to the larger lambda.

    With ``patience`` set, all folds advance down the grid together and the
    walk stops once the summed score has failed to improve on its best for
    ``patience`` consecutive lambdas; the unvisited lambdas score NaN.
    """
    lambdas = check_grid(lambdas)
    if lambdas.size == 0:
        raise InvalidConfig("lambda grid is empty")
    splits = []
    for r in range(plan.repeats):
        a = plan.fold_assignments[r]
        splits.extend(np.flatnonzero(a != f) for f in range(plan.k))
    if patience is None:
        jobs = [(data, groups, spec_template, config, idx, lambdas) for idx in splits]
        scores = np.array(parallel_map(_fold_scores, jobs, workers))
    else:
        scores = _lockstep_scores(data, groups, spec_template, config, splits, lambdas,
                                  int(patience))
    scores = scores.reshape(plan.repeats, plan.k, lambdas.size)
    per_repeat = scores.sum(axis=1)
    mean = per_repeat.mean(axis=0)
    # standard error of a k-term sum, averaged over repeats
    se = (np.sqrt(plan.k) * scores.std(axis=1, ddof=1)).mean(axis=0)
    valid = np.isfinite(mean)
    if not valid.any():
        raise ExclusiveCoxError("no lambda produced finite cross-validation scores")
    best_val = mean[valid].max()
    # grid is descending, so the first index attaining the max is the largest lambda
    best = int(np.flatnonzero(valid & (mean == best_val))[0])
    return CvResult(lambdas, mean, se, float(lambdas[best]), scores)


def default_grid(data, groups, spec_template, size=50, min_ratio=1e-3):
    return lambda_grid(lambda_max(data, groups, spec_template), size, min_ratio)


def cv_fit(data, groups, spec_template, config, plan, lambdas=None, grid_size=50,
           grid_min_ratio=1e-3, workers=1, patience=None):
    """Cross-validate, then refit on all of ``data`` at the selected lambda."""
    if lambdas is None:
        lambdas = default_grid(data, groups, spec_template, grid_size, grid_min_ratio)
    cv = cv_predictive_loglik(data, groups, spec_template, config, plan, lambdas, workers,
                              patience)
    # warm path down to the chosen lambda keeps the refit on the same branch as CV
    path = fit_path(data, groups, spec_template, config, cv.lambdas[:cv.best_index + 1])
    return cv, path[-1]


def two_step_ipf_factors(data: SurvivalDataset, groups: GroupStructure,
                         config: SolverConfig = SolverConfig(), step_one="ridge",
                         plan: CvPlan | None = None, lambdas=None, cap=1e4,
                         grid_size=50, grid_min_ratio=1e-3, workers=1,
                         patience=None) -> np.ndarray:
    """Per-group IPF factors from a first-stage Ridge (or Lasso) fit.

    Factors are inversely proportional to each group's mean absolute
    first-stage coefficient, scaled so the first group with a non-zero mean
    gets factor 1.  Groups whose mean is zero get ``cap``.
    """
    if groups.n_groups < 2:
        raise InvalidConfig("two-step IPF needs at least two groups")
    fam = Family.parse(step_one)
    if fam not in (Family.RIDGE, Family.LASSO):
        raise InvalidConfig("step one must be 'ridge' or 'lasso'")
    spec = PenaltySpec(fam)
    if plan is None:
        plan = make_folds(data, min(5, data.n_events), 1, 0)
    _, model = cv_fit(data, groups, spec, config, plan, lambdas, grid_size,
                      grid_min_ratio, workers, patience)
    means = np.array([np.abs(model.beta[m]).mean() for m in groups.members])
    return factors_from_means(means, cap)


def factors_from_means(means, cap=1e4):
    means = np.asarray(means, dtype=float)
    nz = np.flatnonzero(means > 0)
    if nz.size == 0:
        raise AllZeroStepOne("every group has zero mean first-stage coefficient")
    ref = means[nz[0]]
    out = np.full(means.shape, float(cap))
    out[nz] = ref / means[nz]
    return out
