"""Robust recovery of low-rank asymmetric matrices of unknown rank.

Recovers a planted rank-r matrix from l1-corrupted Gaussian measurements by
factorizing with an overestimated inner dimension d >= r and running
ridge-preconditioned subgradient iterations with optimal-value step sizes.
Ships the solver and baselines, empirical isometry probes, theory checks,
and a config-driven experiment harness.
"""

from .model import (FactorPair, GroundTruth, generate_ground_truth,
                    materialize, planted_factors, truncated_svd_factors)
from .objective import LossContext, l1_loss, optimal_value, subgradient
from .sensing import (GaussianEnsemble, Measurements, adjoint, corrupt,
                      forward, load_ensemble, make_gaussian_ensemble,
                      save_ensemble)
from .solver import (OPSA, SCALED_SM, VANILLA_SUBGD, IterationRecord,
                     SolverConfig, Trace, baseline_step, geometric_stepsize,
                     opsa_step, polyak_stepsize, run, spectral_init)

__all__ = [
    "FactorPair", "GroundTruth", "generate_ground_truth", "materialize",
    "planted_factors", "truncated_svd_factors",
    "GaussianEnsemble", "Measurements", "adjoint", "corrupt", "forward",
    "load_ensemble", "make_gaussian_ensemble", "save_ensemble",
    "LossContext", "l1_loss", "optimal_value", "subgradient",
    "OPSA", "SCALED_SM", "VANILLA_SUBGD", "IterationRecord", "SolverConfig",
    "Trace", "baseline_step", "geometric_stepsize", "opsa_step",
    "polyak_stepsize", "run", "spectral_init",
]

__version__ = "0.1.0"
