"""Survival data, the Cox partial likelihood, and nonparametric estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    AllCensored,
    DimensionMismatch,
    EmptyData,
    IndexOutOfRange,
    LengthMismatch,
    NonFiniteValue,
    RaggedCovariates,
)


@dataclass(frozen=True)
class Observation:
    time: float
    event: bool
    covariates: tuple


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Right-censored survival data with a precomputed time-sorted view.

    ``time``, ``event`` and ``X`` keep the caller's row order.  The sorted
    view (``sort_order``, ``risk_start``) follows the Breslow convention:
    the risk set of a sorted position ``k`` is every position from
    ``risk_start[k]`` onwards, so tied times share one risk set.
    """

    time: np.ndarray
    event: np.ndarray
    X: np.ndarray
    feature_names: tuple = ()
    sort_order: np.ndarray = field(init=False, repr=False)
    risk_start: np.ndarray = field(init=False, repr=False)
    block_end: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).reshape(-1)
        event = np.asarray(self.event).reshape(-1).astype(bool)
        X = np.asarray(self.X, dtype=float)
        n = time.shape[0]
        if n == 0:
            raise EmptyData("dataset has no observations")
        if X.ndim == 1:
            X = X.reshape(n, -1)
        if X.ndim != 2 or X.shape[0] != n or event.shape[0] != n:
            raise LengthMismatch(
                f"time ({n}), event ({event.shape[0]}) and X ({X.shape}) disagree")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise NonFiniteValue("times must be finite and non-negative")
        if not np.all(np.isfinite(X)):
            raise NonFiniteValue("covariates contain non-finite values")
        if not event.any():
            raise AllCensored("at least one observation must have an event")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionMismatch(
                f"{len(names)} feature names for {X.shape[1]} covariates")

        order = np.argsort(time, kind="stable")
        ts = time[order]
        # first / last sorted position sharing each time
        starts = np.searchsorted(ts, ts, side="left")
        ends = np.searchsorted(ts, ts, side="right") - 1

        set_ = object.__setattr__
        set_(self, "time", _readonly(time))
        set_(self, "event", _readonly(event))
        set_(self, "X", _readonly(X))
        set_(self, "feature_names", names)
        set_(self, "sort_order", _readonly(order))
        set_(self, "risk_start", _readonly(starts.astype(np.int64)))
        set_(self, "block_end", _readonly(ends.astype(np.int64)))
        set_(self, "_Xs", np.asfortranarray(X[order]))
        set_(self, "_delta", np.ascontiguousarray(event[order], dtype=float))
        set_(self, "_hdiag", None)

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def n_events(self):
        return int(self.event.sum())

    def risk_set_sizes(self):
        """Size of R(t_k) for each position in sorted order."""
        return self.n - self.risk_start

    def subset(self, rows):
        rows = np.asarray(rows)
        return SurvivalDataset(self.time[rows], self.event[rows], self.X[rows],
                               self.feature_names)

    def _check_beta(self, beta):
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.shape[0] != self.p:
            raise DimensionMismatch(f"beta has length {beta.shape[0]}, expected {self.p}")
        if not np.all(np.isfinite(beta)):
            raise NonFiniteValue("beta contains non-finite values")
        return beta

    def _check_index(self, j):
        if not 0 <= j < self.p:
            raise IndexOutOfRange(f"covariate index {j} not in [0, {self.p})")

    def linear_predictor(self, beta):
        return self.X @ self._check_beta(beta)


def build_dataset(rows: Iterable[Sequence], feature_names=()) -> SurvivalDataset:
    """Build a dataset from ``(time, event, covariates)`` rows."""
    rows = list(rows)
    if not rows:
        raise EmptyData("no rows supplied")
    widths = {len(r[2]) for r in rows}
    if len(widths) != 1:
        raise RaggedCovariates(f"covariate lengths differ: {sorted(widths)}")
    time = np.array([r[0] for r in rows], dtype=float)
    event = np.array([bool(r[1]) for r in rows])
    X = np.array([list(r[2]) for r in rows], dtype=float).reshape(len(rows), widths.pop())
    return SurvivalDataset(time, event, X, feature_names)


def _sorted_eta(data, beta):
    return np.ascontiguousarray(data._Xs @ beta)


def partial_log_likelihood(data: SurvivalDataset, beta) -> float:
    """Breslow log partial likelihood, stabilised per risk set."""
    beta = data._check_beta(beta)
    ll = _kernels.log_likelihood(_sorted_eta(data, beta), data._delta,
                                 data.risk_start, data.block_end)
    if not np.isfinite(ll):
        raise NonFiniteValue("partial log-likelihood is not finite")
    return float(ll)


def gradient(data: SurvivalDataset, beta) -> np.ndarray:
    """Score vector of the log partial likelihood."""
    beta = data._check_beta(beta)
    return _kernels.score(data._Xs, _sorted_eta(data, beta), data._delta,
                          data.risk_start, data.block_end)


def gradient_component(data: SurvivalDataset, beta, j: int) -> float:
    data._check_index(j)
    beta = data._check_beta(beta)
    Xj = np.asfortranarray(data._Xs[:, j:j + 1])
    return float(_kernels.score(Xj, _sorted_eta(data, beta), data._delta,
                                data.risk_start, data.block_end)[0])


def hessian_diag(data: SurvivalDataset) -> np.ndarray:
    """``sum_i delta_i x_ij^2`` for every column (cached per dataset)."""
    if data._hdiag is None:
        ev = data.X[data.event]
        h = np.einsum("ij,ij->j", ev, ev)
        h.setflags(write=False)
        object.__setattr__(data, "_hdiag", h)
    return data._hdiag


def hessian_diag_approx(data: SurvivalDataset, j: int) -> float:
    data._check_index(j)
    return float(hessian_diag(data)[j])


@dataclass(frozen=True, eq=False)
class BaselineHazardTable:
    """Cumulative baseline hazard as a right-continuous step function."""

    times: np.ndarray
    cumhaz: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        out = np.where(idx >= 0, self.cumhaz[np.maximum(idx, 0)], 0.0)
        return out if out.ndim else float(out)

    def to_dict(self):
        return {"times": self.times.tolist(), "cumulative_hazard": self.cumhaz.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["times"], float), np.asarray(d["cumulative_hazard"], float))


def breslow_baseline(data: SurvivalDataset, beta) -> BaselineHazardTable:
    """Breslow estimator of the cumulative baseline hazard, ties pooled."""
    beta = data._check_beta(beta)
    eta = data.X @ beta
    shift = eta.max()
    w = np.exp(eta - shift)
    order = data.sort_order
    ts = data.time[order]
    ws = w[order]
    ev = data.event[order]
    suffix = np.cumsum(ws[::-1])[::-1]
    uniq, first = np.unique(ts, return_index=True)
    d = np.add.reduceat(ev.astype(float), first)
    keep = d > 0
    denom = suffix[first][keep]
    # sum_l exp(eta_l) = exp(shift) * denom
    inc = d[keep] / denom * np.exp(-shift)
    return BaselineHazardTable(_readonly(uniq[keep]), _readonly(np.cumsum(inc)))


def predict_survival(model, covariates, t):
    """``exp(-H0(t) exp(x'beta))`` for a fitted model.

    ``covariates`` may be one row or a matrix; ``t`` a scalar or array.  With
    a matrix and an array of times the result has shape ``(rows, times)``.
    """
    beta = np.asarray(model.beta, dtype=float)
    x = np.asarray(covariates, dtype=float)
    if x.shape[-1] != beta.shape[0]:
        raise DimensionMismatch(f"covariates have {x.shape[-1]} columns, expected {beta.shape[0]}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("prediction time must be non-negative")
    risk = np.exp(x @ beta)
    H0 = np.asarray(model.baseline(t_arr), dtype=float)
    out = np.exp(-np.multiply.outer(risk, H0))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True, eq=False)
class KaplanMeierCurve:
    """Product-limit survival estimate as a right-continuous step function."""

    times: np.ndarray
    survival: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self._step(t, "right")

    def left_limit(self, t):
        """Value just before ``t``."""
        return self._step(t, "left")

    def _step(self, t, side):
        t = np.asarray(t, dtype=float)
        if self.times.size == 0:
            # no drops observed: the curve is identically one
            out = np.ones_like(t)
        else:
            idx = np.searchsorted(self.times, t, side=side) - 1
            out = np.where(idx >= 0, self.survival[np.maximum(idx, 0)], 1.0)
        return out if out.ndim else float(out)


def kaplan_meier(times, event_flags) -> KaplanMeierCurve:
    times = np.asarray(times, dtype=float).reshape(-1)
    flags = np.asarray(event_flags).reshape(-1).astype(bool)
    if times.shape != flags.shape:
        raise LengthMismatch(f"{times.shape[0]} times but {flags.shape[0]} flags")
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise NonFiniteValue("times must be finite and non-negative")
    uniq, inverse = np.unique(times, return_inverse=True)
    d = np.bincount(inverse, weights=flags.astype(float), minlength=uniq.size)
    count = np.bincount(inverse, minlength=uniq.size)
    at_risk = count[::-1].cumsum()[::-1]
    keep = d > 0
    factors = 1.0 - d[keep] / at_risk[keep]
    surv = np.clip(np.cumprod(factors), 0.0, 1.0)
    return KaplanMeierCurve(_readonly(uniq[keep]), _readonly(surv))
