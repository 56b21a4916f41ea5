"""Planted low-rank ground truths and their factor representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import substream


@dataclass(frozen=True)
class GroundTruth:
    """A planted rank-r matrix held in factored SVD form.

    The factors are padded to an inner dimension ``d >= r``: the singular
    value vector has exactly ``d`` entries of which the trailing ``d - r``
    are zero, and the singular vector blocks carry orthonormal completion
    columns in those slots.
    """

    m: int
    n: int
    r: int
    d: int
    U_star: np.ndarray          # m x d, orthonormal columns
    Sigma_star: np.ndarray      # length d, nonincreasing, zeros past r
    V_star: np.ndarray          # n x d, orthonormal columns
    kappa: float

    def __post_init__(self):
        if self.U_star.shape != (self.m, self.d):
            raise ValueError("U_star shape mismatch")
        if self.V_star.shape != (self.n, self.d):
            raise ValueError("V_star shape mismatch")
        if self.Sigma_star.shape != (self.d,):
            raise ValueError("Sigma_star shape mismatch")


@dataclass(frozen=True)
class FactorPair:
    """An (L, R) iterate with X = L @ R.T implied."""

    L: np.ndarray   # m x d
    R: np.ndarray   # n x d

    @property
    def d(self) -> int:
        return self.L.shape[1]

    def product(self) -> np.ndarray:
        return self.L @ self.R.T

    def stacked(self) -> np.ndarray:
        return np.vstack([self.L, self.R])


def generate_ground_truth(m: int, n: int, r: int, d: int, kappa: float,
                          seed: int, normalize: bool = True) -> GroundTruth:
    """Plant a rank-r ground truth with condition number exactly kappa.

    Singular vectors come from the SVD of a product of two i.i.d. Gaussian
    factor matrices; the nonzero spectrum is linearly spaced from
    ``kappa * sigma_r`` down to ``sigma_r``, with ``sigma_r = 1`` when
    ``normalize`` is set and otherwise the r-th singular value of the raw
    random product.
    """
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    if d > min(m, n):
        raise ValueError(f"d={d} exceeds min(m, n)={min(m, n)}")
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")

    rng = substream(seed, 0x67)
    G1 = rng.standard_normal((m, r))
    G2 = rng.standard_normal((n, r))
    U, svals, Vt = np.linalg.svd(G1 @ G2.T, full_matrices=False)
    sigma_r = 1.0 if normalize else float(svals[r - 1])
    sigma = np.concatenate([np.linspace(kappa * sigma_r, sigma_r, r),
                            np.zeros(d - r)])

    def complete(basis: np.ndarray, dim: int) -> np.ndarray:
        if d == r:
            return basis
        extra = rng.standard_normal((dim, d - r))
        Q, _ = np.linalg.qr(np.hstack([basis, extra]))
        return np.hstack([basis, Q[:, r:d]])

    U_star = complete(U[:, :r], m)
    V_star = complete(Vt[:r].T, n)
    return GroundTruth(m=m, n=n, r=r, d=d, U_star=U_star, Sigma_star=sigma,
                       V_star=V_star, kappa=float(kappa))


def materialize(gt: GroundTruth) -> np.ndarray:
    """Assemble the dense m x n matrix U* diag(Sigma*) V*^T."""
    return (gt.U_star * gt.Sigma_star) @ gt.V_star.T


def planted_factors(gt: GroundTruth) -> FactorPair:
    """Balanced factors L* = U* Sigma*^(1/2), R* = V* Sigma*^(1/2)."""
    root = np.sqrt(gt.Sigma_star)
    return FactorPair(L=gt.U_star * root, R=gt.V_star * root)


def truncated_svd_factors(X: np.ndarray, d: int) -> FactorPair:
    """Balanced factors of the best rank-d approximation of X."""
    if d > min(X.shape):
        raise ValueError(f"d={d} exceeds min(X.shape)={min(X.shape)}")
    U, svals, Vt = np.linalg.svd(X, full_matrices=False)
    root = np.sqrt(svals[:d])
    return FactorPair(L=U[:, :d] * root, R=Vt[:d].T * root)
