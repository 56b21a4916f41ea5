"""Preconditioned subgradient iterations and baselines.

The main method updates both factors simultaneously from the iterate at t:

    L' = L - eta * S R (R^T R + lam I)^-1
    R' = R - eta * S^T L (L^T L + lam I)^-1

with S a subgradient of the l1 data-fit loss at X = L R^T. The ridge lam
keeps the d x d solves well posed when the inner dimension d exceeds the
true rank. Step sizes follow either the optimal-value (Polyak) rule or a
geometrically decaying schedule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import FactorPair, GroundTruth, materialize, truncated_svd_factors
from .objective import LossContext, optimal_value
from .sensing import adjoint, forward

OPSA = "opsa"
SCALED_SM = "scaledsm"
VANILLA_SUBGD = "vanilla"
_METHODS = (OPSA, SCALED_SM, VANILLA_SUBGD)


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 2.0
    method: str = OPSA
    step_policy: str = "polyak"            # "polyak" | "geometric"
    eta0: float = 0.1                      # geometric schedule knobs
    q: float = 0.97
    init: str = "spectral"                 # "spectral" | "factors"
    truncation_quantile: float | None = None   # None: 1 - 1.5 * fraction
    init_split: str = "ridge"              # "ridge" | "balanced"
    init_sv_threshold: float | None = 1.25  # noise-band clearance; None keeps all
    regauge_every: int = 100               # re-split cadence; 0 disables
    init_factors: FactorPair | None = None
    max_iters: int = 2000
    rel_err_stop: float = 1e-12
    dist_every: int = 0                    # 0 disables the dist estimate
    dist_restarts: int = 2
    pinv_cutoff: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == OPSA and self.lam <= 0:
            raise ValueError("the preconditioned method requires lam > 0")
        if self.step_policy not in ("polyak", "geometric"):
            raise ValueError(f"unknown step policy {self.step_policy!r}")
        if self.step_policy == "geometric" and not (self.eta0 > 0 and 0 < self.q < 1):
            raise ValueError("geometric schedule needs eta0 > 0 and 0 < q < 1")
        if self.init not in ("spectral", "factors"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init_split not in ("ridge", "balanced"):
            raise ValueError(f"unknown init split {self.init_split!r}")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    loss: float
    step_size: float
    rel_error: float
    dist_estimate: float | None
    wall_ms: float          # elapsed since the run started


@dataclass(frozen=True)
class Trace:
    config: SolverConfig
    records: list[IterationRecord]
    final: FactorPair
    reason: str             # converged | max_iters | zero_step | stalled | diverged

    @property
    def final_rel_error(self) -> float:
        return self.records[-1].rel_error

    def iterations_to(self, tol: float) -> int | None:
        for rec in self.records:
            if rec.rel_error <= tol:
                return rec.t
        return None


def spectral_init(ctx: LossContext, d: int,
                  truncation_quantile: float = 1.0,
                  split: str = "balanced", lam: float = 0.0,
                  sv_threshold: float | None = None) -> FactorPair:
    """Seed factors from the backprojected (optionally truncated) measurements.

    Measurements whose magnitude exceeds the given quantile of {|y_i|} are
    zeroed (quantile 1 keeps everything), the result is backprojected to
    M = p * adjoint(y~) whose expectation is the planted matrix, and the
    top-d SVD of M is split into factors.

    ``sv_threshold`` zeroes every kept singular value at or below that
    multiple of the (d+1)-th one: the backprojection buries sub-noise
    directions anyway, and seeding them at full noise scale both inflates
    the initial error and risks capture by spurious level sets.

    With ``split="balanced"`` both factors carry the square root of the
    spectrum. With ``split="ridge"`` the column scales are L ~ s/sqrt(s+lam),
    R ~ sqrt(s+lam): the product is unchanged, but noise-level columns keep
    an O(sqrt(lam)) footprint on the R side, which the ridged updates then
    contract multiplicatively instead of stalling on a balanced tail; zeroed
    directions can also regrow through that footprint.
    """
    if not 0 < truncation_quantile <= 1:
        raise ValueError("truncation_quantile must lie in (0, 1]")
    ens = ctx.ensemble
    if d > min(ens.m, ens.n):
        raise ValueError("d exceeds min(m, n)")
    y = ctx.meas.y
    if truncation_quantile < 1:
        cutoff = np.quantile(np.abs(y), truncation_quantile)
        y = np.where(np.abs(y) > cutoff, 0.0, y)
    M = ens.p * adjoint(ens, y)
    if sv_threshold is None and split == "balanced":
        return truncated_svd_factors(M, d)
    U, svals, Vt = np.linalg.svd(M, full_matrices=False)
    kept = svals[:d].copy()
    if sv_threshold is not None and d < min(ens.m, ens.n):
        kept[kept <= sv_threshold * svals[d]] = 0.0
    if split == "balanced":
        root = np.sqrt(kept)
        return FactorPair(L=U[:, :d] * root, R=Vt[:d].T * root)
    if lam <= 0:
        raise ValueError("ridge split needs lam > 0")
    g = np.sqrt(kept + lam)
    return FactorPair(L=U[:, :d] * (kept / g), R=Vt[:d].T * g)


def _spd_solve(G: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve G X = B for symmetric positive definite G (B given transposed)."""
    return cho_solve(cho_factor(G, lower=True), B)


def opsa_step(F: FactorPair, S: np.ndarray, lam: float, eta: float) -> FactorPair:
    """One simultaneous ridged-preconditioner update of both factors."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    d = F.d
    Gl = F.R.T @ F.R + lam * np.eye(d)
    Gr = F.L.T @ F.L + lam * np.eye(d)
    L_new = F.L - eta * _spd_solve(Gl, (S @ F.R).T).T
    R_new = F.R - eta * _spd_solve(Gr, (S.T @ F.L).T).T
    return FactorPair(L=L_new, R=R_new)


def _inv_sqrt_psd(G: np.ndarray, ridge: float = 0.0,
                  pinv_cutoff: float | None = None):
    """(inverse, inverse square root) of G + ridge I via eigendecomposition.

    With a cutoff, eigenvalues below cutoff * max are dropped instead
    (pseudo-inverse semantics for the ridge-free baselines).
    """
    w, V = np.linalg.eigh(G)
    w = w + ridge
    if pinv_cutoff is None:
        inv_w = 1.0 / w
    else:
        keep = w > pinv_cutoff * max(float(w.max()), np.finfo(float).tiny)
        inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return (V * inv_w) @ V.T, (V * np.sqrt(inv_w)) @ V.T


def polyak_stepsize(F: FactorPair, S: np.ndarray, loss: float,
                    opt_value: float, lam: float) -> float:
    """Optimal-value step (loss - opt) / gamma with the ridged-norm gamma.

    gamma is the squared Frobenius norm of the subgradient blocks measured
    in the inverse-square-root ridged Gram metric; the inverse roots come
    from d x d symmetric eigendecompositions (all eigenvalues >= lam).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    gap = loss - opt_value
    if gap <= 0:
        return 0.0
    d = F.d
    _, gl_half = _inv_sqrt_psd(F.R.T @ F.R, ridge=lam)
    _, gr_half = _inv_sqrt_psd(F.L.T @ F.L, ridge=lam)
    gamma = float(np.sum((S @ F.R @ gl_half) ** 2)
                  + np.sum((S.T @ F.L @ gr_half) ** 2))
    if gamma <= 0:
        return 0.0
    return gap / gamma


def geometric_stepsize(t: int, eta0: float, q: float) -> float:
    """Schedule eta0 * q^t."""
    if eta0 <= 0 or not 0 < q < 1 or t < 0:
        raise ValueError("need eta0 > 0, 0 < q < 1, t >= 0")
    return eta0 * q ** t


def baseline_step(F: FactorPair, S: np.ndarray, method: str, eta: float,
                  pinv_cutoff: float = 1e-12) -> FactorPair:
    """One update of the ridge-free scaled baseline or plain subgradient descent.

    The scaled baseline inverts the Gram matrices as eigendecomposition
    pseudo-inverses (eigenvalues below pinv_cutoff * largest are dropped),
    which reproduces its exact-rank behavior without crashing when the
    factors become numerically rank deficient.
    """
    if method == SCALED_SM:
        gl_inv, _ = _inv_sqrt_psd(F.R.T @ F.R, pinv_cutoff=pinv_cutoff)
        gr_inv, _ = _inv_sqrt_psd(F.L.T @ F.L, pinv_cutoff=pinv_cutoff)
        return FactorPair(L=F.L - eta * S @ F.R @ gl_inv,
                          R=F.R - eta * S.T @ F.L @ gr_inv)
    if method == VANILLA_SUBGD:
        return FactorPair(L=F.L - eta * S @ F.R, R=F.R - eta * S.T @ F.L)
    raise ValueError(f"unknown baseline {method!r}")


def _polyak_gamma_baseline(F: FactorPair, S: np.ndarray, method: str,
                           pinv_cutoff: float) -> float:
    if method == SCALED_SM:
        _, gl_half = _inv_sqrt_psd(F.R.T @ F.R, pinv_cutoff=pinv_cutoff)
        _, gr_half = _inv_sqrt_psd(F.L.T @ F.L, pinv_cutoff=pinv_cutoff)
        return float(np.sum((S @ F.R @ gl_half) ** 2)
                     + np.sum((S.T @ F.L @ gr_half) ** 2))
    return float(np.sum((S @ F.R) ** 2) + np.sum((S.T @ F.L) ** 2))


def _ridge_regauge(F: FactorPair, lam: float) -> FactorPair:
    """Re-split the iterate's own SVD with the ridge column scales.

    Leaves the product L R^T unchanged (a pure reparameterization) but
    restores the factor imbalance that keeps sub-ridge columns contracting
    multiplicatively instead of flattening into a balanced stall.
    """
    U, svals, Vt = np.linalg.svd(F.product(), full_matrices=False)
    d = F.d
    g = np.sqrt(svals[:d] + lam)
    return FactorPair(L=U[:, :d] * (svals[:d] / g), R=Vt[:d].T * g)


def _initial_factors(gt: GroundTruth, ctx: LossContext,
                     config: SolverConfig) -> FactorPair:
    if config.init == "factors":
        if config.init_factors is None:
            raise ValueError("init='factors' requires init_factors")
        return config.init_factors
    quantile = config.truncation_quantile
    if quantile is None:
        frac = ctx.meas.outlier_fraction
        quantile = 1.0 - 1.5 * frac if frac > 0 else 1.0
    lam = config.lam if config.method == OPSA else max(config.lam, 1e-8)
    return spectral_init(ctx, gt.d, truncation_quantile=quantile,
                         split=config.init_split, lam=lam,
                         sv_threshold=config.init_sv_threshold)


def run(gt: GroundTruth, ctx: LossContext, config: SolverConfig) -> Trace:
    """Iterate the configured method and record per-iteration diagnostics.

    Each record carries the loss and relative error of the iterate at t and
    the step size used to leave it (0 on the terminal record). Stops on the
    relative-error target, the iteration cap, a zero step, or divergence.
    """
    from .metrics import dist_upper

    F = _initial_factors(gt, ctx, config)
    X_star = materialize(gt)
    norm_star = np.linalg.norm(X_star)
    opt = optimal_value(ctx) if config.step_policy == "polyak" else 0.0

    records: list[IterationRecord] = []
    reason = "max_iters"
    started = time.perf_counter()
    t = 0
    while True:
        X = F.product()
        residual = forward(ctx.ensemble, X) - ctx.meas.y
        loss = float(np.sum(np.abs(residual)))
        rel = float(np.linalg.norm(X - X_star) / norm_star)
        dist_est = None
        if config.dist_every > 0 and t % config.dist_every == 0:
            dist_est = dist_upper(F, gt, max(config.lam, 1e-12),
                                  restarts=config.dist_restarts).dist_estimate
        wall_ms = (time.perf_counter() - started) * 1e3

        def emit(step):
            records.append(IterationRecord(t=t, loss=loss, step_size=step,
                                           rel_error=rel, dist_estimate=dist_est,
                                           wall_ms=wall_ms))

        if not np.isfinite(loss):
            emit(0.0)
            reason = "diverged"
            break
        if rel <= config.rel_err_stop:
            emit(0.0)
            reason = "converged"
            break
        if t >= config.max_iters:
            emit(0.0)
            reason = "max_iters"
            break

        S = adjoint(ctx.ensemble, np.sign(residual))
        if config.step_policy == "geometric":
            eta = geometric_stepsize(t, config.eta0, config.q)
        elif config.method == OPSA:
            eta = polyak_stepsize(F, S, loss, opt, config.lam)
        else:
            gap = loss - opt
            gamma = _polyak_gamma_baseline(F, S, config.method,
                                           config.pinv_cutoff)
            eta = gap / gamma if gap > 0 and gamma > 0 else 0.0

        emit(eta)
        if eta == 0.0:
            gap = loss - opt
            reason = "stalled" if gap > 1e-12 * (1 + abs(opt)) else "zero_step"
            break

        if config.method == OPSA:
            F = opsa_step(F, S, config.lam, eta)
            if config.regauge_every > 0 and (t + 1) % config.regauge_every == 0:
                F = _ridge_regauge(F, config.lam)
        else:
            F = baseline_step(F, S, config.method, eta, config.pinv_cutoff)
        t += 1

    return Trace(config=config, records=records, final=F, reason=reason)
