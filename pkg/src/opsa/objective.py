"""The robust l1 data-fit objective and its X-space subgradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sensing import GaussianEnsemble, Measurements, adjoint, forward


@dataclass(frozen=True)
class LossContext:
    """Bundles a measurement ensemble with observations of one instance."""

    ensemble: GaussianEnsemble
    meas: Measurements

    def __post_init__(self):
        if self.ensemble.p != self.meas.p:
            raise ValueError("ensemble and measurements disagree on p")


def l1_loss(ctx: LossContext, X: np.ndarray) -> float:
    """Sum of absolute residuals sum_i |y_i - (A X)_i|."""
    return float(np.sum(np.abs(forward(ctx.ensemble, X) - ctx.meas.y)))


def subgradient(ctx: LossContext, X: np.ndarray) -> np.ndarray:
    """A subgradient of the l1 loss at X, using the sign(0) = 0 selection.

    Returns adjoint(sign(A(X) - y)), which satisfies the convex subgradient
    inequality and vanishes exactly on residual-free iterates.
    """
    residual = forward(ctx.ensemble, X) - ctx.meas.y
    return adjoint(ctx.ensemble, np.sign(residual))


def optimal_value(ctx: LossContext) -> float:
    """The loss attained at the planted matrix: the l1 norm of the corruption.

    Only available when the corruption vector is known (synthetic data);
    otherwise callers must fall back to a geometric step size schedule.
    """
    if ctx.meas.s is None:
        raise ValueError("optimal value unknown without the planted corruption; "
                         "use a geometric step size schedule instead")
    return float(np.sum(np.abs(ctx.meas.s)))
