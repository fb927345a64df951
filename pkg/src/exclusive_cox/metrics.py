"""Selection quality against ground truth and censoring-weighted Brier scores."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import IndexOutOfRange, ZeroCensorWeight
from .survival_core import KaplanMeierCurve, SurvivalDataset, kaplan_meier


@dataclass(frozen=True)
class SelectionReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    f1: float
    fdr: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class BrierReport:
    eval_times: np.ndarray
    brier_at: np.ndarray
    ibs: float

    def to_dict(self):
        return {"eval_times": self.eval_times.tolist(), "brier_at": self.brier_at.tolist(),
                "ibs": self.ibs}


def _as_index_set(idx, p):
    idx = np.unique(np.asarray(list(idx), dtype=np.int64))
    if idx.size and (idx.min() < 0 or idx.max() >= p):
        raise IndexOutOfRange(f"support index outside [0, {p})")
    return idx


def selection_metrics(estimated_support, true_support, p: int) -> SelectionReport:
    est = _as_index_set(estimated_support, p)
    true = _as_index_set(true_support, p)
    tp = int(np.intersect1d(est, true).size)
    fp = int(est.size - tp)
    fn = int(true.size - tp)
    tn = int(p - tp - fp - fn)
    f1_den = 2 * tp + fp + fn
    return SelectionReport(
        tp=tp, fp=fp, tn=tn, fn=fn,
        accuracy=(tp + tn) / p,
        f1=2 * tp / f1_den if f1_den else 0.0,
        fdr=fp / (tp + fp) if tp + fp else 0.0,
    )


def censoring_curve(data: SurvivalDataset) -> KaplanMeierCurve:
    """Kaplan-Meier estimate of the censoring survival function."""
    return kaplan_meier(data.time, ~data.event)


def brier_score(predictions, test_data: SurvivalDataset, t: float,
                censor_curve: KaplanMeierCurve | None = None) -> float:
    """Graf et al. inverse-probability-of-censoring weighted Brier score at ``t``.

    ``predictions[i]`` is the predicted survival probability of test subject
    ``i`` at ``t``.  Events by ``t`` are weighted by ``1 / G(t_i-)``, subjects
    still at risk after ``t`` by ``1 / G(t)``, and subjects censored by ``t``
    drop out of the numerator but not the denominator ``n``.
    """
    S = np.asarray(predictions, dtype=float).reshape(-1)
    if S.shape[0] != test_data.n:
        raise IndexOutOfRange(f"{S.shape[0]} predictions for {test_data.n} subjects")
    if censor_curve is None:
        censor_curve = censoring_curve(test_data)
    time, event = test_data.time, test_data.event
    died = event & (time <= t)
    alive = time > t
    total = 0.0
    if died.any():
        g = censor_curve.left_limit(time[died])
        if np.any(g <= 0):
            raise ZeroCensorWeight(f"censoring survival is zero before an event at or before t={t}")
        total += np.sum(S[died] ** 2 / g)
    if alive.any():
        g_t = censor_curve(t)
        if g_t <= 0:
            raise ZeroCensorWeight(f"censoring survival is zero at t={t}")
        total += np.sum((1.0 - S[alive]) ** 2) / g_t
    return float(total / test_data.n)


def default_eval_times(test_data: SurvivalDataset, horizon=None, horizon_quantile=0.8):
    """Distinct test event times up to ``horizon``.

    Without an explicit horizon, the ``horizon_quantile`` quantile of the
    observed test times is used, which keeps the censoring weights away from
    the unstable tail.
    """
    if horizon is None:
        horizon = float(np.quantile(test_data.time, horizon_quantile))
    times = np.unique(test_data.time[test_data.event])
    return times[times <= horizon]


def integrated_brier_score(predict, test_data: SurvivalDataset, eval_times=None,
                           horizon=None, censor_curve=None) -> BrierReport:
    """Brier scores over a grid and their trapezoidal average.

    ``predict`` is either a callable ``times -> (n_subjects, n_times)``
    survival matrix or the matrix itself (columns aligned to ``eval_times``).
    The integral is divided by the grid span; a one-point grid returns the
    score at that point.
    """
    if eval_times is None:
        eval_times = default_eval_times(test_data, horizon)
    eval_times = np.asarray(eval_times, dtype=float).reshape(-1)
    if eval_times.size == 0:
        raise ValueError("evaluation grid is empty")
    if np.any(np.diff(eval_times) <= 0):
        raise ValueError("evaluation times must be strictly ascending")
    surv = predict(eval_times) if callable(predict) else np.asarray(predict, dtype=float)
    surv = np.asarray(surv, dtype=float).reshape(test_data.n, eval_times.size)
    if censor_curve is None:
        censor_curve = censoring_curve(test_data)
    scores = np.array([brier_score(surv[:, k], test_data, t, censor_curve)
                       for k, t in enumerate(eval_times)])
    return BrierReport(eval_times, scores, integrate(eval_times, scores))


def integrate(times, values) -> float:
    """Trapezoidal integral of ``values`` over ``times`` divided by the span."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 1:
        return float(values[0])
    span = times[-1] - times[0]
    area = np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return float(area / span)


def write_long_csv(rows, path):
    """Rows of ``(model, metric, replicate, value)`` to a headed CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "metric", "replicate", "value"])
        for model, metric, rep, value in rows:
            w.writerow([model, metric, rep, repr(float(value))])


def report_json(report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True)
