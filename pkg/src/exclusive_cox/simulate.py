"""Grouped, correlated survival data from a Cox model with exponential baseline."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import CovarianceNotPD, InvalidConfig, UnknownScenario
from .penalty import GroupStructure
from .survival_core import SurvivalDataset

_PRESETS = {
    1: ((100, 100, 100, 100, 100),
        {5: (1, 1, 1, 1, 1), 10: (2, 2, 2, 2, 2), 20: (4, 4, 4, 4, 4)}),
    2: ((15, 20, 85, 180, 200),
        {5: (1, 1, 1, 1, 1), 10: (1, 2, 1, 4, 2), 20: (2, 2, 1, 10, 5)}),
    3: ((5, 295, 10, 90, 100),
        {5: (1, 1, 1, 1, 1), 10: (1, 2, 1, 2, 4), 20: (2, 6, 4, 6, 2)}),
}


@dataclass(frozen=True)
class SimulationScenario:
    n: int
    group_sizes: tuple
    signals_per_group: tuple
    within_rho: float = 0.6
    between_rho: float = 0.3
    coef_low: float = 0.5
    coef_high: float = 1.5
    censor_rate: float = 0.02
    baseline_median: float = 8.0
    sign_mode: str = "random"
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.group_sizes)
        signals = tuple(int(s) for s in self.signals_per_group)
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "signals_per_group", signals)
        if len(sizes) != len(signals):
            raise InvalidConfig("group_sizes and signals_per_group differ in length")
        if any(s < 1 for s in sizes):
            raise InvalidConfig("every group needs at least one variable")
        if any(not 0 <= k <= s for k, s in zip(signals, sizes)):
            raise InvalidConfig("signals per group must lie in [0, group size]")
        if self.n < 1:
            raise InvalidConfig("n must be positive")
        if not 0 <= self.between_rho <= self.within_rho < 1:
            raise InvalidConfig("need 0 <= between_rho <= within_rho < 1")
        if not (self.censor_rate > 0 and self.baseline_median > 0):
            raise InvalidConfig("censor_rate and baseline_median must be positive")
        if not 0 <= self.coef_low <= self.coef_high:
            raise InvalidConfig("need 0 <= coef_low <= coef_high")
        if self.sign_mode not in ("random", "positive"):
            raise InvalidConfig("sign_mode must be 'random' or 'positive'")

    @property
    def p(self):
        return sum(self.group_sizes)

    @property
    def baseline_hazard(self):
        return math.log(2.0) / self.baseline_median

    def to_dict(self):
        d = asdict(self)
        d["group_sizes"] = list(self.group_sizes)
        d["signals_per_group"] = list(self.signals_per_group)
        d["cross_group_correlation"] = "between_rho ** |i - j| with global column indices"
        return d


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    dataset: SurvivalDataset
    true_beta: np.ndarray
    true_support: np.ndarray
    groups: GroupStructure
    scenario: SimulationScenario


def scenario_presets(scenario_id: int, n_signals: int, **overrides) -> SimulationScenario:
    """The five-group, p = 500 designs with 5, 10 or 20 signal variables."""
    try:
        sizes, by_count = _PRESETS[int(scenario_id)]
        signals = by_count[int(n_signals)]
    except (KeyError, ValueError):
        raise UnknownScenario(
            f"no preset for scenario {scenario_id!r} with {n_signals!r} signals") from None
    fields = dict(n=500, group_sizes=sizes, signals_per_group=signals)
    fields.update(overrides)
    return SimulationScenario(**fields)


def covariance(group_sizes, within_rho=0.6, between_rho=0.3) -> np.ndarray:
    """``within_rho**|i-j|`` inside a group, ``between_rho**|i-j|`` across groups."""
    labels = np.repeat(np.arange(len(group_sizes)), group_sizes)
    idx = np.arange(labels.size)
    dist = np.abs(idx[:, None] - idx[None, :])
    same = labels[:, None] == labels[None, :]
    return np.where(same, within_rho ** dist, between_rho ** dist)


def cholesky_factor(scenario: SimulationScenario) -> np.ndarray:
    sigma = covariance(scenario.group_sizes, scenario.within_rho, scenario.between_rho)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise CovarianceNotPD(
            f"covariance with within_rho={scenario.within_rho}, "
            f"between_rho={scenario.between_rho} is not positive definite") from None


def _child_rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def draw_coefficients(scenario: SimulationScenario, rng=None) -> np.ndarray:
    """Signal positions uniformly within each group; magnitudes uniform, signs per ``sign_mode``."""
    rng = _child_rng(scenario.seed, 0) if rng is None else rng
    beta = np.zeros(scenario.p)
    offset = 0
    for size, k in zip(scenario.group_sizes, scenario.signals_per_group):
        pos = offset + rng.choice(size, size=k, replace=False)
        mags = rng.uniform(scenario.coef_low, scenario.coef_high, size=k)
        if scenario.sign_mode == "random":
            mags = mags * rng.choice([-1.0, 1.0], size=k)
        beta[np.sort(pos)] = mags[np.argsort(pos)]
        offset += size
    return beta


def generate(scenario: SimulationScenario, true_beta=None, chol=None) -> SimulatedDataset:
    """Draw one dataset; deterministic given ``scenario.seed``.

    ``true_beta`` overrides the coefficient draw (used to pair a training set
    with a validation set sharing the same model).
    """
    chol = cholesky_factor(scenario) if chol is None else chol
    if true_beta is None:
        beta = draw_coefficients(scenario)
    else:
        beta = np.asarray(true_beta, dtype=float).copy()
        if beta.shape != (scenario.p,):
            raise InvalidConfig(f"true_beta must have length {scenario.p}")
    rng = _child_rng(scenario.seed, 1)
    Z = rng.standard_normal((scenario.n, scenario.p))
    X = Z @ chol.T
    h0 = scenario.baseline_hazard
    u = rng.uniform(size=scenario.n)
    # -log(1 - u) keeps the draw strictly positive for u in [0, 1)
    event_time = -np.log1p(-u) / (h0 * np.exp(X @ beta))
    censor_time = rng.exponential(1.0 / scenario.censor_rate, size=scenario.n)
    time = np.minimum(event_time, censor_time)
    event = event_time <= censor_time
    sizes = scenario.group_sizes
    names = tuple(f"g{g + 1}_v{k + 1}" for g, s in enumerate(sizes) for k in range(s))
    data = SurvivalDataset(time, event, X, names)
    beta.setflags(write=False)
    support = np.flatnonzero(beta != 0)
    return SimulatedDataset(data, beta, support, GroupStructure.from_sizes(sizes), scenario)


def train_validation_pair(scenario: SimulationScenario, replicate: int = 0, n_validation=None):
    """Training and independent validation sets for one replicate.

    The coefficients are drawn once per replicate and shared by both sets;
    each set gets its own child seed derived from ``(seed, replicate)``.
    """
    chol = cholesky_factor(scenario)
    base = np.random.SeedSequence([int(scenario.seed), int(replicate)])
    coef_seed, train_seed, valid_seed = (int(s.generate_state(1)[0]) for s in base.spawn(3))
    beta = draw_coefficients(scenario, np.random.default_rng(coef_seed))
    train = generate(replace(scenario, seed=train_seed), beta, chol)
    valid_scn = replace(scenario, seed=valid_seed,
                        n=scenario.n if n_validation is None else int(n_validation))
    valid = generate(valid_scn, beta, chol)
    return train, valid
