"""Penalized Cox fitting by coordinate descent.

All families minimise ``-loglik(beta) + lam * P(beta)`` with one compiled
coordinate-descent loop.  Each coordinate update minimises a quadratic model
of the likelihood with curvature ``H_j = sum_i delta_i x_ij^2``:

* Lasso / Elastic Net / IPF / Ridge: soft-threshold at ``lam * alpha * f_g``
  with ``lam * (1 - alpha)`` added to the curvature;
* Exclusive Lasso: soft-threshold at ``lam * sum_{l in g, l != j} |beta_l|``
  with ``lam`` added to the curvature;
* Group Lasso: block update with the vector soft-threshold at
  ``lam * sqrt(p_g)`` and step ``1 / (max_{j in g} H_j + lam)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, InvalidConfig, NonFiniteObjective
from .penalty import Family, GroupStructure, PenaltySpec, penalty_value
from .survival_core import (
    BaselineHazardTable,
    SurvivalDataset,
    breslow_baseline,
    gradient,
    hessian_diag,
)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and numerical safeguards.

    ``lam`` is only read by :func:`fit_exclusive_lasso`; :func:`fit_penalized`
    takes the penalty level from its :class:`PenaltySpec`.
    """

    tolerance: float = 1e-7
    max_sweeps: int = 1000
    lam: float = 0.0
    newton_correction: bool = True
    hessian_floor: float = 1e-8

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidConfig("tolerance must be positive")
        if int(self.max_sweeps) < 1:
            raise InvalidConfig("max_sweeps must be >= 1")
        if not self.hessian_floor > 0:
            raise InvalidConfig("hessian_floor must be positive")
        if not self.lam >= 0:
            raise InvalidConfig("lambda must be >= 0")

    def to_dict(self):
        return {"tolerance": self.tolerance, "max_sweeps": int(self.max_sweeps),
                "newton_correction": bool(self.newton_correction),
                "hessian_floor": self.hessian_floor}


@dataclass(frozen=True, eq=False)
class FittedModel:
    beta: np.ndarray
    converged: bool
    sweeps_used: int
    final_change: float
    objective_trace: np.ndarray
    initial_objective: float
    likelihood_evaluations: int
    baseline: BaselineHazardTable
    spec: PenaltySpec
    groups: GroupStructure
    feature_names: tuple = ()

    @property
    def lam(self):
        return self.spec.lam

    def support(self):
        return np.flatnonzero(self.beta != 0.0)

    def predict_survival(self, covariates, t):
        from .survival_core import predict_survival
        return predict_survival(self, covariates, t)


def soft_threshold(z: float, threshold: float) -> float:
    """``sign(z) * max(|z| - threshold, 0)``."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return math.copysign(max(abs(z) - threshold, 0.0), z) if abs(z) > threshold else 0.0


def _mode_and_weights(spec: PenaltySpec, groups: GroupStructure):
    fam = spec.family
    if fam is Family.EXCLUSIVE:
        return _kernels.MODE_EXCLUSIVE, 0.0, 0.0, np.ones(groups.p)
    if fam is Family.GROUP:
        return _kernels.MODE_GROUP, 0.0, 0.0, np.ones(groups.p)
    coord_factors = spec.factors(groups)[groups.group_of]
    return _kernels.MODE_COORDINATE, spec.alpha, 1.0 - spec.alpha, coord_factors


def _run(data, groups, spec, config, beta0):
    if groups.p != data.p:
        raise DimensionMismatch(f"groups cover {groups.p} covariates, data has {data.p}")
    if beta0 is None:
        beta = np.zeros(data.p)
    else:
        beta = np.array(beta0, dtype=float).reshape(-1)
        if beta.shape[0] != data.p:
            raise DimensionMismatch(f"beta0 has length {beta.shape[0]}, expected {data.p}")
    mode, l1w, ridgew, factors = _mode_and_weights(spec, groups)
    order, ptr = groups.sweep_order()
    trace = np.empty(int(config.max_sweeps))
    sweeps, change, obj0, status, evals = _kernels.coordinate_descent(
        data._Xs, data._delta, data.risk_start, data.block_end,
        np.ascontiguousarray(hessian_diag(data)), beta, order, ptr,
        mode, float(spec.lam), float(l1w), float(ridgew),
        np.ascontiguousarray(factors, dtype=float), bool(config.newton_correction),
        float(config.hessian_floor), float(config.tolerance), int(config.max_sweeps),
        trace)
    if status != _kernels.STATUS_OK or not np.all(np.isfinite(beta)):
        raise NonFiniteObjective(
            f"objective became non-finite after {sweeps} sweeps "
            f"({spec.family.value}, lambda={spec.lam:g})")
    beta.setflags(write=False)
    trace = trace[:sweeps].copy()
    trace.setflags(write=False)
    return FittedModel(
        beta=beta,
        converged=bool(change <= config.tolerance),
        sweeps_used=int(sweeps),
        final_change=float(change),
        objective_trace=trace,
        initial_objective=float(obj0),
        likelihood_evaluations=int(evals),
        baseline=breslow_baseline(data, beta),
        spec=spec,
        groups=groups,
        feature_names=data.feature_names,
    )


def fit_exclusive_lasso(data: SurvivalDataset, groups: GroupStructure,
                        config: SolverConfig, beta0=None) -> FittedModel:
    """Exclusive Lasso Cox fit at ``config.lam``, starting from ``beta0``."""
    spec = PenaltySpec(Family.EXCLUSIVE, lam=config.lam)
    return _run(data, groups, spec, config, beta0)


def fit_penalized(data: SurvivalDataset, groups: GroupStructure, spec: PenaltySpec,
                  config: SolverConfig = SolverConfig(), beta0=None) -> FittedModel:
    if spec.family is Family.EXCLUSIVE:
        return fit_exclusive_lasso(data, groups, replace(config, lam=spec.lam), beta0)
    return _run(data, groups, spec, config, beta0)


def objective(data: SurvivalDataset, groups: GroupStructure, spec: PenaltySpec, beta) -> float:
    """Penalized objective ``-loglik + lam * P`` (the quantity being minimised)."""
    from .survival_core import partial_log_likelihood
    return -partial_log_likelihood(data, beta) + spec.lam * penalty_value(spec, groups, beta)


def lambda_max(data: SurvivalDataset, groups: GroupStructure, spec: PenaltySpec) -> float:
    """Top of the regularization path, from the score at ``beta = 0``.

    For thresholding families this is the smallest ``lam`` whose first sweep
    from zero leaves every coefficient at zero.  Ridge and Exclusive Lasso
    never zero everything; Ridge uses the elastic-net value at
    ``alpha = 0.01`` and Exclusive Lasso the Lasso value, where it already
    keeps a single variable per group.
    """
    r = gradient(data, np.zeros(data.p))
    fam = spec.family
    if fam is Family.GROUP:
        return float(max(np.linalg.norm(r[m]) / math.sqrt(m.size) for m in groups.members))
    if fam is Family.EXCLUSIVE:
        return float(np.abs(r).max())
    if fam is Family.RIDGE:
        return float(np.abs(r).max() / 1e-2)
    f = spec.factors(groups)[groups.group_of] * spec.alpha
    live = f > 0
    if not live.any():
        return float(np.abs(r).max() / 1e-2)
    return float((np.abs(r[live]) / f[live]).max())


def lambda_grid(lam_max: float, size: int = 50, min_ratio: float = 1e-3) -> np.ndarray:
    """``size`` log-spaced values from ``lam_max`` down to ``lam_max * min_ratio``."""
    if size < 1:
        raise InvalidConfig("grid size must be >= 1")
    if size == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * min_ratio, size)


def check_grid(lambdas):
    lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
    if np.any(lambdas < 0) or not np.all(np.isfinite(lambdas)):
        raise InvalidConfig("lambdas must be finite and >= 0")
    if np.any(np.diff(lambdas) >= 0):
        raise InvalidConfig("lambdas must be strictly descending")
    return lambdas


def fit_path(data: SurvivalDataset, groups: GroupStructure, spec_template: PenaltySpec,
             config: SolverConfig, lambdas, beta0=None) -> list:
    """Warm-started fits along a strictly descending ``lambdas`` grid."""
    lambdas = check_grid(lambdas)
    models = []
    beta = beta0
    for lam in lambdas:
        model = fit_penalized(data, groups, spec_template.with_lambda(lam), config, beta)
        models.append(model)
        beta = model.beta
    return models
