import math

import numpy as np
import pytest

from opsa.rip import (estimate_mixed_rip, estimate_outlier_bound,
                      mixed_rip_trials, outlier_bound_trials,
                      predicted_iterations, rip_trials_csv)
from opsa.rng import substream
from opsa.sensing import make_gaussian_ensemble

SQRT_2_OVER_PI = math.sqrt(2 / math.pi)


@pytest.fixture(scope="module")
def probe_ensemble():
    return make_gaussian_ensemble(100, 100, 2000, seed=11)


def test_single_trial_collapses_bounds():
    ens = make_gaussian_ensemble(12, 12, 50, seed=1)
    est = estimate_mixed_rip(ens, two_d=4, trials=1, seed=1)
    assert est.delta_minus == est.delta_plus


def test_ratio_band_and_mean(probe_ensemble):
    ratios = mixed_rip_trials(probe_ensemble, two_d=10, trials=500, seed=11)
    assert ratios.min() >= 0.6
    assert ratios.max() <= 1.0
    assert abs(ratios.mean() - SQRT_2_OVER_PI) <= 0.02
    est = estimate_mixed_rip(probe_ensemble, two_d=10, trials=500, seed=11)
    assert est.delta_minus == ratios.min()
    assert est.delta_plus == ratios.max()
    assert 0 <= est.delta_minus <= est.delta_plus


def test_ratio_scale_invariance():
    ens = make_gaussian_ensemble(10, 8, 60, seed=3)
    from opsa.rip import _trial_matrix
    from opsa.sensing import forward
    X = _trial_matrix(ens, 3, seed=3, t=0)
    r1 = np.sum(np.abs(forward(ens, X))) / np.linalg.norm(X)
    r2 = np.sum(np.abs(forward(ens, 10 * X))) / np.linalg.norm(10 * X)
    assert r2 == pytest.approx(r1, rel=1e-12)


def test_determinism():
    ens = make_gaussian_ensemble(14, 9, 80, seed=5)
    a = mixed_rip_trials(ens, two_d=4, trials=20, seed=5)
    b = mixed_rip_trials(ens, two_d=4, trials=20, seed=5)
    assert np.array_equal(a, b)


def test_outlier_bound_empty_and_full_support():
    ens = make_gaussian_ensemble(16, 12, 100, seed=7)
    ratios = mixed_rip_trials(ens, two_d=4, trials=25, seed=7)
    empty = estimate_outlier_bound(ens, np.empty(0, dtype=int), 4, 25, seed=7)
    assert empty == pytest.approx(float(ratios.min()), rel=1e-12)
    full = estimate_outlier_bound(ens, np.arange(100), 4, 25, seed=7)
    assert full == pytest.approx(float(-ratios.max()), rel=1e-12)


def test_outlier_bound_expected_level(probe_ensemble):
    support = np.sort(substream(11, 3).choice(2000, size=200, replace=False))
    est = estimate_outlier_bound(probe_ensemble, support, two_d=10,
                                 trials=100, seed=11)
    assert abs(est - 0.8 * SQRT_2_OVER_PI) <= 0.05


def test_outlier_bound_monotone_in_support(probe_ensemble):
    rng = substream(11, 4)
    perm = rng.permutation(2000)
    small, large = np.sort(perm[:100]), np.sort(perm[:400])
    est_small = estimate_outlier_bound(probe_ensemble, small, 10, 50, seed=11)
    est_large = estimate_outlier_bound(probe_ensemble, large, 10, 50, seed=11)
    assert est_large <= est_small


def test_predicted_iterations_values():
    assert predicted_iterations(1.0, 1.0, math.exp(-1)) == 9
    base_eps = 0.01
    base = predicted_iterations(0.9, 0.6, base_eps)
    halved = predicted_iterations(0.9, 0.6, base_eps / 2)
    ratio_sq = (0.9 / 0.6) ** 2
    assert halved == math.ceil(ratio_sq / 0.12 * math.log(2 / base_eps))
    assert halved > base


def test_predicted_iterations_rejects_bad_inputs():
    with pytest.raises(ValueError):
        predicted_iterations(1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        predicted_iterations(1.0, -0.2, 0.1)
    with pytest.raises(ValueError):
        predicted_iterations(1.0, 1.0, 1.5)


def test_trials_csv_shapes():
    ens = make_gaussian_ensemble(10, 10, 40, seed=9)
    ratios = mixed_rip_trials(ens, 3, trials=8, seed=9)
    plain = rip_trials_csv(ratios)
    assert plain.splitlines()[0] == "trial,ratio"
    assert len(plain.strip().splitlines()) == 9
    rows = outlier_bound_trials(ens, np.arange(4), 3, 8, seed=9)
    with_split = rip_trials_csv(ratios, rows)
    header = with_split.splitlines()[0]
    assert header == "trial,ratio,off_support_l1,on_support_l1"
    assert len(with_split.strip().splitlines()) == 9
