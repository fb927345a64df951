import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exclusive_cox.errors import IndexOutOfRange, ZeroCensorWeight
from exclusive_cox.metrics import (
    brier_score,
    censoring_curve,
    integrate,
    integrated_brier_score,
    selection_metrics,
    write_long_csv,
)
from exclusive_cox.survival_core import SurvivalDataset, kaplan_meier

HAND = SurvivalDataset([1.0, 2.0, 3.0, 4.0], [1, 0, 1, 1], np.zeros((4, 1)))


def test_selection_perfect_and_all():
    r = selection_metrics(range(5), range(5), 500)
    assert (r.accuracy, r.f1, r.fdr) == (1.0, 1.0, 0.0)
    r = selection_metrics(range(500), range(5), 500)
    assert r.accuracy == pytest.approx(0.01) and r.fdr == pytest.approx(0.99)


def test_selection_small_counts():
    r = selection_metrics([0, 1], [0], 4)
    assert (r.tp, r.fp, r.fn, r.tn) == (1, 1, 0, 2)
    assert r.fdr == 0.5 and r.f1 == pytest.approx(2 / 3)
    empty = selection_metrics([], [0], 4)
    assert empty.fdr == 0.0 and empty.f1 == 0.0
    with pytest.raises(IndexOutOfRange):
        selection_metrics([5], [0], 4)


@settings(max_examples=100)
@given(p=st.integers(1, 40), data=st.data())
def test_fdr_plus_precision_is_one(p, data):
    est = data.draw(st.sets(st.integers(0, p - 1)))
    true = data.draw(st.sets(st.integers(0, p - 1)))
    r = selection_metrics(est, true, p)
    assert r.tp + r.fp + r.tn + r.fn == p
    if r.tp + r.fp:
        assert r.fdr + r.tp / (r.tp + r.fp) == pytest.approx(1.0)


def test_brier_hand_case():
    # G(2.5) = 2/3 (censoring at 2 with three at risk); the event at 1 uses G(1-) = 1
    # (0.81 + 0 + 0.16 * 1.5 + 0.25 * 1.5) / 4
    s = brier_score([0.9, 0.8, 0.6, 0.5], HAND, 2.5)
    assert s == pytest.approx(0.35625, abs=1e-12)


def test_brier_without_censoring_is_mse():
    d = SurvivalDataset([1.0, 2.0, 3.0, 5.0], [1, 1, 1, 1], np.zeros((4, 1)))
    pred = np.array([0.2, 0.4, 0.7, 0.9])
    t = 2.5
    assert brier_score(pred, d, t) == pytest.approx(np.mean(((d.time > t) - pred) ** 2))
    assert brier_score(np.full(4, 0.5), d, t) == pytest.approx(0.25)
    perfect = (d.time > t).astype(float)
    assert brier_score(perfect, d, t) == 0.0


def test_brier_is_order_invariant(rng):
    t = rng.exponential(1, 30)
    e = rng.uniform(size=30) > 0.3
    e[0] = True
    s = rng.uniform(size=30)
    d = SurvivalDataset(t, e, np.zeros((30, 1)))
    perm = rng.permutation(30)
    dp = SurvivalDataset(t[perm], e[perm], np.zeros((30, 1)))
    tq = float(np.quantile(t, 0.5))
    assert brier_score(s, d, tq) == pytest.approx(brier_score(s[perm], dp, tq), abs=1e-14)


def test_zero_censor_weight():
    d = SurvivalDataset([1.0, 2.0], [1, 0], np.zeros((2, 1)))
    assert censoring_curve(d)(2.0) == 0.0
    # a censoring curve from elsewhere that has already reached zero
    dead = kaplan_meier([0.5], [1])
    with pytest.raises(ZeroCensorWeight):
        brier_score([0.5, 0.5], d, 1.5, dead)
    with pytest.raises(ZeroCensorWeight):
        brier_score([0.5, 0.5], d, 0.7, dead)


def test_integrated_brier():
    d = SurvivalDataset([1.0, 2.0, 3.0, 5.0], [1, 1, 1, 1], np.zeros((4, 1)))
    rep = integrated_brier_score(np.full((4, 3), 0.5), d, eval_times=[1.0, 2.0, 3.0])
    assert rep.ibs == pytest.approx(0.25)
    one = integrated_brier_score(np.full((4, 1), 0.3), d, eval_times=[2.0])
    assert one.ibs == pytest.approx(one.brier_at[0])
    # three-point trapezoid by hand: (0.5*(1+2)*1 + 0.5*(2+4)*3) / 4
    assert integrate([0, 1, 4], [1, 2, 4]) == pytest.approx(10.5 / 4)


def test_integrated_brier_default_grid_and_bounds(rng):
    t = rng.exponential(1, 60)
    e = rng.uniform(size=60) > 0.3
    e[0] = True
    d = SurvivalDataset(t, e, np.zeros((60, 1)))
    rep = integrated_brier_score(lambda ts: np.tile(np.exp(-ts), (60, 1)), d)
    assert rep.eval_times.max() <= np.quantile(t, 0.8)
    assert np.all(np.isin(rep.eval_times, t[e]))
    assert rep.brier_at.min() - 1e-15 <= rep.ibs <= rep.brier_at.max() + 1e-15
    assert np.all(rep.brier_at >= 0)


def test_long_csv(tmp_path):
    f = tmp_path / "r.csv"
    write_long_csv([("exclusive", "f1", 0, 0.5)], f)
    assert f.read_text() == "model,metric,replicate,value\nexclusive,f1,0,0.5\n"
