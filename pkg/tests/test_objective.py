import numpy as np
import pytest

from opsa.model import generate_ground_truth, materialize
from opsa.objective import LossContext, l1_loss, optimal_value, subgradient
from opsa.rip import estimate_mixed_rip
from opsa.rng import substream
from opsa.sensing import Measurements, corrupt, forward, make_gaussian_ensemble

from test_sensing import explicit_ensemble


def make_context(m=12, n=10, r=2, d=4, p=300, fraction=0.0, seed=0):
    gt = generate_ground_truth(m=m, n=n, r=r, d=d, kappa=3.0, seed=seed)
    ens = make_gaussian_ensemble(m, n, p, seed=seed)
    y_clean = forward(ens, materialize(gt))
    meas = corrupt(y_clean, fraction=fraction, seed=seed)
    return gt, LossContext(ensemble=ens, meas=meas)


def test_loss_zero_at_planted_noiseless():
    gt, ctx = make_context()
    assert l1_loss(ctx, materialize(gt)) == 0.0


def test_loss_equals_corruption_l1_at_planted():
    gt, ctx = make_context(fraction=0.2, seed=3)
    s_l1 = np.sum(np.abs(ctx.meas.s))
    assert l1_loss(ctx, materialize(gt)) == pytest.approx(s_l1, rel=1e-12)


def test_loss_scalar_hand_value():
    ens = explicit_ensemble([[[1.0]]])
    meas = Measurements(y=np.array([2.0]), s=np.zeros(1),
                        support=np.empty(0, dtype=np.int64),
                        outlier_fraction=0.0)
    ctx = LossContext(ensemble=ens, meas=meas)
    assert l1_loss(ctx, np.array([[3.0]])) == pytest.approx(1.0)


def test_subgradient_zero_on_exact_fit():
    gt, ctx = make_context(seed=5)
    S = subgradient(ctx, materialize(gt))
    assert np.all(S == 0)


def test_subgradient_scalar_hand_value():
    ens = explicit_ensemble([[[1.0]]])
    meas = Measurements(y=np.array([0.0]), s=np.zeros(1),
                        support=np.empty(0, dtype=np.int64),
                        outlier_fraction=0.0)
    ctx = LossContext(ensemble=ens, meas=meas)
    S = subgradient(ctx, np.array([[2.0]]))
    np.testing.assert_allclose(S, [[1.0]])


def test_subgradient_inequality():
    gt, ctx = make_context(fraction=0.1, seed=7)
    rng = substream(7, 9)
    for _ in range(50):
        X = rng.standard_normal((gt.m, gt.n))
        Z = rng.standard_normal((gt.m, gt.n))
        S = subgradient(ctx, X)
        lhs = l1_loss(ctx, Z)
        rhs = l1_loss(ctx, X) + np.sum(S * (Z - X))
        assert lhs >= rhs - 1e-10


def test_convexity_along_segments():
    gt, ctx = make_context(fraction=0.1, seed=11)
    rng = substream(11, 9)
    for _ in range(25):
        X1 = rng.standard_normal((gt.m, gt.n))
        X2 = rng.standard_normal((gt.m, gt.n))
        alpha = rng.uniform()
        mix = l1_loss(ctx, alpha * X1 + (1 - alpha) * X2)
        assert mix <= alpha * l1_loss(ctx, X1) + (1 - alpha) * l1_loss(ctx, X2) + 1e-10


def test_optimal_value():
    gt, ctx = make_context(fraction=0.0, seed=2)
    assert optimal_value(ctx) == 0.0
    meas = Measurements(y=np.array([1.0, 4.0, -3.0, 0.5]),
                        s=np.array([0.0, 3.0, -4.0, 0.0]),
                        support=np.array([1, 2]), outlier_fraction=0.5)
    ens = make_gaussian_ensemble(2, 2, 4, seed=0)
    assert optimal_value(LossContext(ensemble=ens, meas=meas)) == 7.0


def test_optimal_value_matches_loss_at_planted():
    gt, ctx = make_context(fraction=0.3, seed=13, p=400)
    opt = optimal_value(ctx)
    loss_at_star = l1_loss(ctx, materialize(gt))
    s_l1 = np.sum(np.abs(ctx.meas.s))
    assert abs(opt - loss_at_star) <= 1e-12 * (1 + s_l1)


def test_optimal_value_unavailable_blind():
    ens = make_gaussian_ensemble(2, 2, 4, seed=0)
    meas = Measurements(y=np.ones(4), s=None, support=np.empty(0, dtype=int),
                        outlier_fraction=0.0)
    ctx = LossContext(ensemble=ens, meas=meas)
    with pytest.raises(ValueError):
        optimal_value(ctx)


def test_empirical_lipschitz_and_sharpness():
    # loss increments against the sampled two-sided measurement constants
    m = n = 20
    d = 3
    gt = generate_ground_truth(m=m, n=n, r=2, d=d, kappa=2.0, seed=17)
    ens = make_gaussian_ensemble(m, n, 2000, seed=17)
    X_star = materialize(gt)
    meas = corrupt(forward(ens, X_star), fraction=0.0, seed=17)
    ctx = LossContext(ensemble=ens, meas=meas)
    est = estimate_mixed_rip(ens, two_d=2 * d, trials=200, seed=17)
    loss_star = l1_loss(ctx, X_star)
    rng = substream(17, 9)
    for _ in range(50):
        G1 = rng.standard_normal((m, d))
        G2 = rng.standard_normal((n, d))
        X = G1 @ G2.T
        diff = np.linalg.norm(X - X_star)
        gap = l1_loss(ctx, X) - loss_star
        assert abs(gap) <= 1.05 * est.delta_plus * diff
        assert gap >= 0.95 * est.delta_minus * diff - 1e-9
