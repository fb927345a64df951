import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_grad_hess, brute_loglik, random_dataset
from exclusive_cox.errors import (
    AllCensored,
    DimensionMismatch,
    EmptyData,
    IndexOutOfRange,
    LengthMismatch,
    NonFiniteValue,
    RaggedCovariates,
)
from exclusive_cox.survival_core import (
    BaselineHazardTable,
    SurvivalDataset,
    breslow_baseline,
    build_dataset,
    gradient,
    gradient_component,
    hessian_diag,
    hessian_diag_approx,
    kaplan_meier,
    partial_log_likelihood,
    predict_survival,
)


def test_sorted_view_and_risk_sets():
    d = SurvivalDataset([3.0, 1.0, 2.0, 2.0], [1, 0, 1, 1], np.zeros((4, 1)))
    assert d.sort_order.tolist() == [1, 2, 3, 0]
    # tied times share the risk set starting at the first of the tie
    assert d.risk_start.tolist() == [0, 1, 1, 3]
    assert d.risk_set_sizes().tolist() == [4, 3, 3, 1]


def test_validation_errors():
    with pytest.raises(EmptyData):
        SurvivalDataset([], [], np.zeros((0, 2)))
    with pytest.raises(LengthMismatch):
        SurvivalDataset([1.0, 2.0], [1], np.zeros((2, 1)))
    with pytest.raises(NonFiniteValue):
        SurvivalDataset([1.0, np.inf], [1, 1], np.zeros((2, 1)))
    with pytest.raises(NonFiniteValue):
        SurvivalDataset([1.0, 2.0], [1, 1], [[0.0], [np.nan]])
    with pytest.raises(NonFiniteValue):
        SurvivalDataset([-1.0, 2.0], [1, 1], np.zeros((2, 1)))
    with pytest.raises(AllCensored):
        SurvivalDataset([1.0, 2.0], [0, 0], np.zeros((2, 1)))
    with pytest.raises(DimensionMismatch):
        SurvivalDataset([1.0, 2.0], [1, 0], np.zeros((2, 2)), ("a",))
    with pytest.raises(RaggedCovariates):
        build_dataset([(1.0, 1, [0.0]), (2.0, 0, [0.0, 1.0])])


def test_zero_beta_closed_form():
    # at beta = 0 each event contributes -log |R(t_i)|
    d = SurvivalDataset([1.0, 2.0, 2.0, 4.0, 5.0], [1, 1, 0, 1, 0], np.ones((5, 2)))
    expected = -(np.log(5) + np.log(4) + np.log(2))
    assert partial_log_likelihood(d, np.zeros(2)) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("ties", [False, True])
def test_loglik_and_gradient_match_brute_force(rng, ties):
    for _ in range(20):
        d = random_dataset(rng, 30, 4, ties=ties)
        beta = rng.normal(0, 0.7, 4)
        ll = brute_loglik(d.time, d.event, d.X, beta)
        g, _ = brute_grad_hess(d.time, d.event, d.X, beta)
        assert partial_log_likelihood(d, beta) == pytest.approx(ll, abs=1e-10)
        np.testing.assert_allclose(gradient(d, beta), g, atol=1e-10)
        j = int(rng.integers(4))
        assert gradient_component(d, beta, j) == pytest.approx(g[j], abs=1e-10)


def test_large_linear_predictor_is_stable():
    d = SurvivalDataset([1.0, 2.0, 3.0], [1, 1, 1], [[400.0], [0.0], [-400.0]])
    ll = partial_log_likelihood(d, np.array([2.0]))
    # eta = (800, 0, -800): each event dominates its own risk set, so ll ~ -exp(-800)
    assert ll == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(3, 25), p=st.integers(1, 5))
def test_gradient_matches_central_difference(seed, n, p):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, n, p, ties=bool(seed % 2))
    beta = rng.normal(0, 0.5, p)
    g = gradient(d, beta)
    h = 1e-5
    for j in range(p):
        e = np.zeros(p)
        e[j] = h
        fd = (partial_log_likelihood(d, beta + e) - partial_log_likelihood(d, beta - e)) / (2 * h)
        assert abs(fd - g[j]) <= 1e-6 * max(1.0, abs(g[j]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_loglik_invariant_to_row_order(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, 15, 3, ties=True)
    perm = rng.permutation(d.n)
    e = SurvivalDataset(d.time[perm], d.event[perm], d.X[perm])
    beta = rng.normal(size=3)
    assert partial_log_likelihood(e, beta) == pytest.approx(partial_log_likelihood(d, beta),
                                                            abs=1e-11)


def test_loglik_is_nonpositive_and_concave(rng):
    d = random_dataset(rng, 25, 3)
    a, b = rng.normal(size=3), rng.normal(size=3)
    la, lb = partial_log_likelihood(d, a), partial_log_likelihood(d, b)
    lm = partial_log_likelihood(d, 0.5 * (a + b))
    assert la <= 0 and lb <= 0
    assert lm >= 0.5 * (la + lb) - 1e-12


def test_hessian_diag():
    d = SurvivalDataset([1.0, 2.0, 3.0], [1, 0, 1], [[1.0, 2.0], [5.0, 5.0], [-3.0, 0.0]])
    np.testing.assert_array_equal(hessian_diag(d), [10.0, 4.0])
    assert hessian_diag_approx(d, 1) == 4.0
    with pytest.raises(IndexOutOfRange):
        hessian_diag_approx(d, 2)


def test_kaplan_meier_hand_case():
    km = kaplan_meier([1, 2, 3, 4], [1, 0, 1, 1])
    assert km(0.5) == 1.0
    assert km(1) == pytest.approx(3 / 4)
    assert km(2.5) == pytest.approx(3 / 4)
    assert km(3) == pytest.approx(3 / 8)
    assert km(4) == 0.0
    assert km.left_limit(3) == pytest.approx(3 / 4)
    with pytest.raises(LengthMismatch):
        kaplan_meier([1, 2], [1])


def test_kaplan_meier_without_censoring_is_empirical():
    t = np.array([3.0, 1.0, 2.0, 2.0, 5.0])
    km = kaplan_meier(t, np.ones(5))
    for s in (0.0, 1.0, 2.0, 4.0, 5.0):
        assert km(s) == pytest.approx(np.mean(t > s))


def test_breslow_hand_case():
    # beta = 0: increments d_k / |R(t_k)|
    d = SurvivalDataset([1.0, 2.0, 2.0, 3.0], [1, 1, 1, 0], np.zeros((4, 1)))
    H = breslow_baseline(d, np.zeros(1))
    np.testing.assert_allclose(H.times, [1.0, 2.0])
    np.testing.assert_allclose(H.cumhaz, [1 / 4, 1 / 4 + 2 / 3])
    assert H(0.5) == 0.0 and H(2.5) == pytest.approx(1 / 4 + 2 / 3)


def test_breslow_weights_and_shift_invariance(rng):
    d = random_dataset(rng, 20, 2)
    beta = np.array([0.4, -0.3])
    H = breslow_baseline(d, beta)
    w = np.exp(d.X @ beta)
    expected = [sum(d.event[d.time == t]) / w[d.time >= t].sum() for t in H.times]
    np.testing.assert_allclose(np.diff(np.concatenate([[0], H.cumhaz])), expected, rtol=1e-12)


def test_baseline_round_trip():
    H = BaselineHazardTable(np.array([1.0, 2.0]), np.array([0.1, 0.3]))
    G = BaselineHazardTable.from_dict(H.to_dict())
    np.testing.assert_array_equal(G.cumhaz, H.cumhaz)


def test_predict_survival_shapes():
    class M:
        beta = np.array([1.0])
        baseline = BaselineHazardTable(np.array([1.0, 2.0]), np.array([0.5, 1.0]))

    assert predict_survival(M, [0.0], 1.5) == pytest.approx(np.exp(-0.5))
    out = predict_survival(M, [[0.0], [np.log(2)]], [0.5, 2.0])
    assert out.shape == (2, 2)
    np.testing.assert_allclose(out, [[1.0, np.exp(-1.0)], [1.0, np.exp(-2.0)]])
    with pytest.raises(DimensionMismatch):
        predict_survival(M, [[0.0, 1.0]], 1.0)
