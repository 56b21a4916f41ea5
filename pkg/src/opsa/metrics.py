"""Factor-space distance with alignment search, rate formulas, theory checks.

The factorization (L, R) -> L R^T is invariant under (L, R) -> (L Q, R Q^-T)
for invertible Q. The distance used here scores factor errors against the
planted factors after optimizing Q, weighting columns by (Sigma* + lam I)^1/2
so that it stays meaningful when the inner dimension exceeds the true rank.
Because the minimization over Q is a local search, reported values are upper
bounds on the true infimum and are labeled as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FactorPair, GroundTruth, materialize, planted_factors
from .rng import substream

_SQRT2 = math.sqrt(2.0)


def relative_error(F: FactorPair, gt: GroundTruth) -> float:
    """Frobenius error of L R^T against the planted matrix, relative."""
    X_star = materialize(gt)
    denom = np.linalg.norm(X_star)
    if denom == 0:
        raise ValueError("planted matrix is zero; relative error undefined")
    return float(np.linalg.norm(F.product() - X_star) / denom)


@dataclass(frozen=True)
class AlignmentResult:
    Q: np.ndarray
    value: float            # best objective found; upper-bounds the infimum
    converged: bool
    restarts_used: int

    @property
    def dist_estimate(self) -> float:
        return math.sqrt(max(self.value, 0.0))


def _alignment_objective(Q, L, R, L_star, R_star, w):
    """Two-term weighted objective at alignment Q; w = sqrt(Sigma* + lam)."""
    P = np.linalg.inv(Q).T
    a = (L @ Q - L_star) * w
    b = (R @ P - R_star) * w
    return float(np.sum(a * a) + np.sum(b * b)), P


def _alignment_gradient(Q, P, L, R, L_star, R_star, w2):
    """Gradient of the objective w.r.t. Q; w2 = Sigma* + lam."""
    g1 = 2.0 * L.T @ ((L @ Q - L_star) * w2)
    GP = 2.0 * R.T @ ((R @ P - R_star) * w2)
    g2 = -P @ GP.T @ P
    return g1 + g2


def _descend(Q0, L, R, L_star, R_star, w, max_iters=400, tol=1e-12,
             cond_limit=1e12):
    """Backtracking gradient descent over invertible Q starting at Q0."""
    w2 = w * w
    Q = Q0.copy()
    f, P = _alignment_objective(Q, L, R, L_star, R_star, w)
    step = 1.0 / max(np.linalg.norm(Q), 1.0)
    converged = False
    for _ in range(max_iters):
        G = _alignment_gradient(Q, P, L, R, L_star, R_star, w2)
        gnorm = np.linalg.norm(G)
        if gnorm * max(step, 1e-30) <= 1e-16 * (1 + abs(f)):
            converged = True
            break
        accepted = False
        for _bt in range(60):
            Q_new = Q - step * G
            if np.linalg.cond(Q_new) > cond_limit:
                step *= 0.5
                continue
            f_new, P_new = _alignment_objective(Q_new, L, R, L_star, R_star, w)
            if f_new <= f - 1e-4 * step * gnorm * gnorm:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        improved = f - f_new
        Q, f, P = Q_new, f_new, P_new
        step *= 1.3
        if improved <= tol * max(f, 1e-30):
            converged = True
            break
    return Q, f, converged


def dist_upper(F: FactorPair, gt: GroundTruth, lam: float,
               restarts: int = 3, tol: float = 1e-12) -> AlignmentResult:
    """Upper bound on the alignment distance between F and the planted factors.

    Runs a multi-start local descent over invertible alignment matrices,
    seeded at the least-squares fit of L onto L* plus random well-conditioned
    perturbations. The squared-distance estimate is the best value found.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    star = planted_factors(gt)
    w = np.sqrt(gt.Sigma_star + lam)
    Q0, *_ = np.linalg.lstsq(F.L, star.L, rcond=None)
    if not np.all(np.isfinite(Q0)) or np.linalg.cond(Q0) > 1e10:
        Q0 = np.eye(gt.d)

    rng = substream(0, 0xA7)
    best_Q, best_f, best_conv = None, np.inf, False
    used = 0
    for k in range(max(restarts, 1)):
        start = Q0 if k == 0 else Q0 + 0.1 * np.linalg.norm(Q0) * \
            rng.standard_normal(Q0.shape) / math.sqrt(Q0.size)
        if np.linalg.cond(start) > 1e10:
            continue
        used += 1
        Q, f, conv = _descend(start, F.L, F.R, star.L, star.R, w, tol=tol)
        if f < best_f:
            best_Q, best_f, best_conv = Q, f, conv
    if best_Q is None:
        f0, _ = _alignment_objective(Q0, F.L, F.R, star.L, star.R, w)
        return AlignmentResult(Q=Q0, value=f0, converged=False, restarts_used=0)
    return AlignmentResult(Q=best_Q, value=best_f, converged=best_conv,
                           restarts_used=used)


def alignment_scan_1d(F: FactorPair, gt: GroundTruth, lam: float,
                      points: int = 100_000, zooms: int = 3) -> float:
    """Exhaustive scalar-alignment scan for d = 1 factor pairs.

    Evaluates the objective over +/- logspace(-6, 6) and refines around the
    best point; serves as a brute-force reference for the local search.
    """
    if gt.d != 1:
        raise ValueError("scan applies only to d = 1")
    w2 = float(gt.Sigma_star[0] + lam)
    star = planted_factors(gt)
    l, r = F.L.ravel(), F.R.ravel()
    ls, rs = star.L.ravel(), star.R.ravel()
    ll, lls = float(l @ l), float(l @ ls)
    rr, rrs = float(r @ r), float(r @ rs)
    c_l, c_r = float(ls @ ls), float(rs @ rs)

    def value(q):
        return w2 * ((q * q * ll - 2 * q * lls + c_l)
                     + (rr / (q * q) - 2 * rrs / q + c_r))

    grid = np.logspace(-6, 6, points // 2)
    grid = np.concatenate([-grid[::-1], grid])
    vals = value(grid)
    best = int(np.argmin(vals))
    q_best, f_best = float(grid[best]), float(vals[best])
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    for _ in range(zooms):
        local = np.linspace(lo, hi, 2001)
        local = local[local != 0]
        lv = value(local)
        i = int(np.argmin(lv))
        if lv[i] < f_best:
            q_best, f_best = float(local[i]), float(lv[i])
        span = (hi - lo) / 200
        lo, hi = q_best - span, q_best + span
    return f_best


@dataclass(frozen=True)
class RateInputs:
    """Inputs to the contraction-rate formula.

    ``lambda_bar`` ties the ridge to the planted scale via
    lam * lambda_bar = opnorm(X*).
    """

    chi: float
    epsilon: float
    lam: float
    lambda_bar: float

    def __post_init__(self):
        if self.chi < 1:
            raise ValueError("chi must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")


def rate_inputs_from_opnorm(chi: float, epsilon: float, lam: float,
                            opnorm: float) -> RateInputs:
    if lam <= 0:
        raise ValueError("lam must be positive to derive lambda_bar")
    return RateInputs(chi=chi, epsilon=epsilon, lam=lam, lambda_bar=opnorm / lam)


def simplified_rate(chi: float) -> float:
    """The headline contraction factor 1 - 0.12 / chi^2."""
    return 1.0 - 0.12 / (chi * chi)


def contraction_rate(inp: RateInputs) -> float:
    """The full contraction factor rho(chi, epsilon, lam).

    Evaluates the closed-form rate exactly as printed; requires the
    perturbation term sqrt(eps) (sqrt(eps) + sqrt(2) lambda_bar^(1/4))
    to stay below 1.
    """
    g = math.sqrt(inp.epsilon) * (math.sqrt(inp.epsilon)
                                  + _SQRT2 * inp.lambda_bar ** 0.25)
    if g >= 1:
        raise ValueError(f"epsilon too large for lambda_bar: "
                         f"perturbation term {g:.6g} >= 1")
    a = math.sqrt((_SQRT2 - 1.0) / (1.0 + 2.0 * inp.lam))
    bracket = a * (2.0 - 1.0 / (1.0 - g) ** 2) \
        - 2.0 * inp.chi * _SQRT2 * (1.5 * inp.epsilon + 2.0 * g / (1.0 - g))
    return 1.0 - a * bracket / (2.0 * inp.chi * inp.chi)


# ---------------------------------------------------------------------------
# Numerical verification of the inequalities backing the convergence analysis.
# Each check samples random instances satisfying a hypothesis and records the
# slack (rhs - lhs) of the claimed bound; negative slack marks a violation.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    trials: int
    passes: int
    worst_slack: float

    @property
    def ok(self) -> bool:
        return self.passes == self.trials


def _sym_sqrt(A: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(A)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def _opnorm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2))


def _check_operator_root(samples: int, rng) -> CheckResult:
    """||A^1/2 - B^1/2||_op <= ||A - B||_op^1/2 for SPD pairs."""
    passes, worst = 0, np.inf
    for _ in range(samples):
        k = int(rng.integers(2, 8))
        GA = rng.standard_normal((k, k))
        GB = rng.standard_normal((k, k))
        A = GA @ GA.T + 1e-6 * np.eye(k)
        B = GB @ GB.T + 1e-6 * np.eye(k)
        lhs = _opnorm(_sym_sqrt(A) - _sym_sqrt(B))
        rhs = math.sqrt(_opnorm(A - B))
        slack = rhs - lhs
        worst = min(worst, slack)
        passes += slack >= -1e-10
    return CheckResult("operator_root_perturbation", samples, passes, worst)


def _near_optimal_pair(gt: GroundTruth, lam: float, eps: float, rng):
    """Perturbed factors whose identity-aligned objective is below (lam*eps)^2.

    The identity alignment witnesses dist <= lam * eps, which is the
    hypothesis shared by the near-optimal-regime bounds.
    """
    star = planted_factors(gt)
    w = np.sqrt(gt.Sigma_star + lam)
    dL = rng.standard_normal(star.L.shape)
    dR = rng.standard_normal(star.R.shape)
    scale = 0.9 * lam * eps / math.sqrt(
        np.sum((dL * w) ** 2) + np.sum((dR * w) ** 2))
    return FactorPair(L=star.L + scale * dL, R=star.R + scale * dR), star


def _check_product_distance_bound(samples: int, rng) -> CheckResult:
    """||L R^T - X*||_F <= (1 + eps/2) sqrt(2) dist for near-optimal pairs."""
    passes, worst = 0, np.inf
    for i in range(samples):
        gt = generate_for_checks(rng, normalize=True)
        lam = float(rng.uniform(0.05, 0.5))
        eps = float(rng.uniform(0.01, 0.2))
        F, _ = _near_optimal_pair(gt, lam, eps, rng)
        est = dist_upper(F, gt, lam, restarts=2)
        lhs = float(np.linalg.norm(F.product() - materialize(gt)))
        rhs = (1.0 + eps / 2.0) * _SQRT2 * est.dist_estimate
        slack = rhs - lhs
        worst = min(worst, slack)
        passes += slack >= -1e-10
    return CheckResult("product_vs_distance_bound", samples, passes, worst)


def _check_gram_root_bounds(samples: int, rng) -> CheckResult:
    """Near-optimal perturbation bounds on the ridged Gram square roots.

    On pairs with dist <= lam * eps (lam = opnorm / lambda_bar, sigma_r = 1)
    both quoted operator-norm bounds are exercised: the weighted Gram-root
    difference stays below sqrt(eps)(sqrt(eps) + sqrt(2) lambda_bar^1/4),
    and the ridged-Gram/planted-scale product stays below 1/(1 - that).
    """
    passes, worst = 0, np.inf
    for _ in range(samples):
        gt = generate_for_checks(rng, normalize=True)
        opnorm = float(gt.Sigma_star[0])
        lambda_bar = float(rng.uniform(5.0, 40.0)) * opnorm
        lam = opnorm / lambda_bar
        g_cap = 0.9
        eps_max = (g_cap / (_SQRT2 * lambda_bar ** 0.25)) ** 2
        eps = float(rng.uniform(0.1, 0.9)) * min(eps_max, 0.2)
        F, star = _near_optimal_pair(gt, lam, eps, rng)
        g = math.sqrt(eps) * (math.sqrt(eps) + _SQRT2 * lambda_bar ** 0.25)
        winv = 1.0 / np.sqrt(gt.Sigma_star + lam)
        ok = True
        slacks = []
        for Z, Z_star in ((F.L, star.L), (F.R, star.R)):
            root = _sym_sqrt(Z.T @ Z + lam * np.eye(gt.d))
            root_star = _sym_sqrt(Z_star.T @ Z_star + lam * np.eye(gt.d))
            lhs = _opnorm(winv[:, None] * (root - root_star))
            slacks.append(g - lhs)
            # inverse ridged root times planted scale
            w_root, V = np.linalg.eigh(Z.T @ Z + lam * np.eye(gt.d))
            inv_root = (V * (1.0 / np.sqrt(w_root))) @ V.T
            lhs2 = _opnorm(inv_root * np.sqrt(gt.Sigma_star + lam)[None, :])
            slacks.append(1.0 / (1.0 - g) - lhs2)
        slack = min(slacks)
        worst = min(worst, slack)
        passes += slack >= -1e-10
    return CheckResult("gram_root_perturbation_bounds", samples, passes, worst)


def _check_distance_lower_bound_1d(samples: int, rng) -> CheckResult:
    """||X - X*||_F >= sqrt((sqrt(2)-1) s_r / (s_r + 2 lam)) * dist at d = 1.

    Uses the exhaustive scalar alignment scan for dist and only asserts the
    bound on instances satisfying ||X - X*||_op <= s_r / 2.
    """
    from .model import generate_ground_truth
    passes, worst, used = 0, np.inf, 0
    while used < samples:
        seed = int(rng.integers(0, 2 ** 48))
        gt = generate_ground_truth(m=12, n=9, r=1, d=1, kappa=1.0,
                                   seed=seed, normalize=True)
        star = planted_factors(gt)
        lam = float(rng.uniform(0.01, 2.0))
        c = float(rng.uniform(0.5, 2.0))
        noise = float(rng.uniform(0.0, 0.15))
        F = FactorPair(L=c * star.L + noise * rng.standard_normal(star.L.shape),
                       R=star.R / c + noise * rng.standard_normal(star.R.shape))
        X_err = F.product() - materialize(gt)
        if _opnorm(X_err) > 0.5 * gt.Sigma_star[0]:
            continue
        used += 1
        dist = math.sqrt(max(alignment_scan_1d(F, gt, lam), 0.0))
        lhs = float(np.linalg.norm(X_err))
        rhs = math.sqrt((_SQRT2 - 1.0) * gt.Sigma_star[0]
                        / (gt.Sigma_star[0] + 2.0 * lam)) * dist
        slack = lhs - rhs
        worst = min(worst, slack)
        passes += slack >= -1e-9
    return CheckResult("distance_lower_bound_1d", samples, passes, worst)


def generate_for_checks(rng, normalize=True) -> GroundTruth:
    from .model import generate_ground_truth
    m = int(rng.integers(8, 24))
    n = int(rng.integers(8, 24))
    r = int(rng.integers(1, 4))
    d = r + int(rng.integers(0, 4))
    d = min(d, m, n)
    r = min(r, d)
    kappa = float(rng.uniform(1.0, 5.0))
    seed = int(rng.integers(0, 2 ** 48))
    return generate_ground_truth(m=m, n=n, r=r, d=d, kappa=kappa,
                                 seed=seed, normalize=normalize)


def theory_checks(samples: int, seed: int) -> list[CheckResult]:
    """Run the numerical property suite behind the convergence analysis."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = substream(seed, 0xEC)
    pair_samples = max(samples // 10, 1)
    return [
        _check_operator_root(samples, rng),
        _check_product_distance_bound(pair_samples, rng),
        _check_gram_root_bounds(pair_samples, rng),
        _check_distance_lower_bound_1d(pair_samples, rng),
    ]


def format_check_report(results: list[CheckResult]) -> str:
    lines = [f"{'check':<34} {'trials':>7} {'passes':>7} {'worst_slack':>14}"]
    for res in results:
        lines.append(f"{res.name:<34} {res.trials:>7} {res.passes:>7} "
                     f"{res.worst_slack:>14.6e}")
    return "\n".join(lines)


def check_report_csv(results: list[CheckResult]) -> str:
    lines = ["check,trials,passes,worst_slack"]
    for res in results:
        lines.append(f"{res.name},{res.trials},{res.passes},"
                     f"{float(res.worst_slack)!r}")
    return "\n".join(lines) + "\n"
