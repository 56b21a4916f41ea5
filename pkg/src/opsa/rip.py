"""Empirical mixed-norm isometry constants and iteration-cost predictions.

The probes sample random rank-bounded matrices and record the ratio of the
measurement l1 norm to the matrix Frobenius norm. Because the underlying
definitions quantify over all rank-bounded matrices, sampled minima/maxima
are empirical estimates, not certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import substream
from .sensing import GaussianEnsemble, forward

_TRIAL_STREAM = 0xD1

# Exponent constant from the headline contraction factor 1 - 0.12 / chi^2.
ITERATION_CONSTANT = 1.0 / 0.12


@dataclass(frozen=True)
class RipEstimate:
    delta_minus: float
    delta_plus: float
    delta_zero: float | None
    trials: int
    rank_tested: int
    seed: int


def _trial_matrix(ens: GaussianEnsemble, two_d: int, seed: int, t: int):
    rng = substream(seed, _TRIAL_STREAM, t)
    G1 = rng.standard_normal((ens.m, two_d))
    G2 = rng.standard_normal((ens.n, two_d))
    return G1 @ G2.T


def mixed_rip_trials(ens: GaussianEnsemble, two_d: int, trials: int,
                     seed: int) -> np.ndarray:
    """Per-trial ratios ||A(X)||_1 / ||X||_F over random rank-two_d X."""
    if two_d > min(ens.m, ens.n):
        raise ValueError("two_d exceeds min(m, n)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ratios = np.empty(trials)
    for t in range(trials):
        X = _trial_matrix(ens, two_d, seed, t)
        ratios[t] = np.sum(np.abs(forward(ens, X))) / np.linalg.norm(X)
    return ratios


def estimate_mixed_rip(ens: GaussianEnsemble, two_d: int, trials: int,
                       seed: int) -> RipEstimate:
    """Empirical two-sided bounds on the measurement l1/Frobenius ratio."""
    ratios = mixed_rip_trials(ens, two_d, trials, seed)
    return RipEstimate(delta_minus=float(ratios.min()),
                       delta_plus=float(ratios.max()),
                       delta_zero=None, trials=trials,
                       rank_tested=two_d, seed=seed)


def outlier_bound_trials(ens: GaussianEnsemble, support: np.ndarray,
                         two_d: int, trials: int, seed: int) -> np.ndarray:
    """Per-trial rows (value, off_support_l1, on_support_l1).

    value = (||A_{S^c}(X)||_1 - ||A_S(X)||_1) / ||X||_F, sharing the trial
    matrices of :func:`mixed_rip_trials` for the same seed.
    """
    support = np.asarray(support, dtype=np.int64)
    if support.size and (support.min() < 0 or support.max() >= ens.p):
        raise ValueError("support indices out of range")
    mask = np.zeros(ens.p, dtype=bool)
    mask[support] = True
    rows = np.empty((trials, 3))
    for t in range(trials):
        X = _trial_matrix(ens, two_d, seed, t)
        z = np.abs(forward(ens, X))
        on = float(z[mask].sum())
        off = float(z[~mask].sum())
        rows[t] = ((off - on) / np.linalg.norm(X), off, on)
    return rows


def estimate_outlier_bound(ens: GaussianEnsemble, support: np.ndarray,
                           two_d: int, trials: int, seed: int) -> float:
    """Empirical corruption-tolerance constant; negative means sharpness fails."""
    rows = outlier_bound_trials(ens, support, two_d, trials, seed)
    return float(rows[:, 0].min())


def predicted_iterations(delta_plus: float, mu_like: float,
                         target_eps: float) -> int:
    """Order-of-magnitude iteration count to reach target_eps accuracy.

    ceil(C * (delta_plus / mu_like)^2 * ln(1 / target_eps)) with C pinned to
    the headline rate exponent; treat as a scaling prediction, not a bound.
    """
    if mu_like <= 0:
        raise ValueError("mu_like must be positive (sharpness failed)")
    if not 0 < target_eps < 1:
        raise ValueError("target_eps must lie in (0, 1)")
    ratio = delta_plus / mu_like
    return math.ceil(ITERATION_CONSTANT * ratio * ratio
                     * math.log(1.0 / target_eps))


def rip_trials_csv(ratios: np.ndarray, split_rows: np.ndarray | None = None) -> str:
    """CSV of per-trial probe results; includes S/S^c splits when given."""
    if split_rows is None:
        lines = ["trial,ratio"]
        lines += [f"{t},{float(r)!r}" for t, r in enumerate(ratios)]
    else:
        lines = ["trial,ratio,off_support_l1,on_support_l1"]
        lines += [f"{t},{float(r)!r},{float(off)!r},{float(on)!r}"
                  for t, (r, (_, off, on)) in enumerate(zip(ratios, split_rows))]
    return "\n".join(lines) + "\n"
