"""Gaussian measurement ensembles, forward/adjoint maps, and outlier corruption.

The i-th measurement of a matrix X is (1/p) * <A_i, X> with A_i an m x n
matrix of i.i.d. standard normal entries. Ensembles either hold the stacked
A_i densely or regenerate them on the fly from the seed; both modes draw the
same underlying stream, so results agree to rounding error.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import substream

_ENS_STREAM = 0xA1
_MAGIC = b"OPSA-ENS"
_DUMP_VERSION = 1

# Rows of A generated per block in regenerate mode; value only affects
# summation order (and hence <=1e-12 relative wobble), not the stream.
_BLOCK_ROWS = 256


@dataclass(frozen=True)
class GaussianEnsemble:
    m: int
    n: int
    p: int
    seed: int
    mode: str = "dense"                      # "dense" | "regenerate"
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def matrices(self) -> np.ndarray:
        """Dense (p, m*n) stack; only available in dense mode."""
        if self._dense is None:
            raise ValueError("ensemble was built in regenerate mode")
        return self._dense

    def _blocks(self):
        """Yield (start, stop, block) with block shaped (rows, m*n)."""
        if self._dense is not None:
            yield 0, self.p, self._dense
            return
        rng = substream(self.seed, _ENS_STREAM)
        width = self.m * self.n
        for start in range(0, self.p, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, self.p)
            yield start, stop, rng.standard_normal((stop - start, width))


def make_gaussian_ensemble(m: int, n: int, p: int, seed: int,
                           mode: str = "dense") -> GaussianEnsemble:
    if min(m, n, p) < 1:
        raise ValueError("m, n, p must all be >= 1")
    if mode not in ("dense", "regenerate"):
        raise ValueError(f"unknown mode {mode!r}")
    dense = None
    if mode == "dense":
        dense = substream(seed, _ENS_STREAM).standard_normal((p, m * n))
    return GaussianEnsemble(m=m, n=n, p=p, seed=seed, mode=mode, _dense=dense)


def forward(ens: GaussianEnsemble, X: np.ndarray) -> np.ndarray:
    """Apply the measurement map: component i is (1/p) * <A_i, X>."""
    if X.shape != (ens.m, ens.n):
        raise ValueError(f"X has shape {X.shape}, expected {(ens.m, ens.n)}")
    x = np.ascontiguousarray(X).ravel()
    if ens._dense is not None:
        return (ens._dense @ x) / ens.p
    out = np.empty(ens.p)
    for start, stop, block in ens._blocks():
        out[start:stop] = block @ x
    return out / ens.p


def adjoint(ens: GaussianEnsemble, v: np.ndarray) -> np.ndarray:
    """Apply the adjoint map: (1/p) * sum_i v_i A_i."""
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (ens.p,):
        raise ValueError(f"v has length {v.size}, expected {ens.p}")
    if ens._dense is not None:
        flat = ens._dense.T @ v
    else:
        flat = np.zeros(ens.m * ens.n)
        for start, stop, block in ens._blocks():
            flat += block.T @ v[start:stop]
    return flat.reshape(ens.m, ens.n) / ens.p


@dataclass(frozen=True)
class Measurements:
    """Observations y = y_clean + s with s supported on a known index set."""

    y: np.ndarray
    s: np.ndarray
    support: np.ndarray          # sorted outlier indices, possibly empty
    outlier_fraction: float

    @property
    def p(self) -> int:
        return self.y.size


def corrupt(y_clean: np.ndarray, fraction: float, seed: int,
            amplitude: float = 10.0) -> Measurements:
    """Replace a random fraction of entries with uniform gross outliers.

    Corrupted positions are drawn without replacement; their values are
    uniform on [-amplitude * a, amplitude * a] where a = max |y_clean|.
    The implied additive corruption s = y - y_clean is recorded.
    """
    if not 0 <= fraction < 0.5:
        raise ValueError(f"fraction must lie in [0, 0.5), got {fraction}")
    y_clean = np.asarray(y_clean, dtype=float)
    p = y_clean.size
    k = int(np.rint(fraction * p))
    y = y_clean.copy()
    if k > 0:
        rng = substream(seed, 0xC0)
        support = np.sort(rng.choice(p, size=k, replace=False))
        a = float(np.max(np.abs(y_clean)))
        y[support] = rng.uniform(-amplitude * a, amplitude * a, size=k)
    else:
        support = np.empty(0, dtype=np.int64)
    return Measurements(y=y, s=y - y_clean, support=support,
                        outlier_fraction=float(fraction))


def save_ensemble(path, ens: GaussianEnsemble) -> None:
    """Write a dense ensemble: magic, u32 version, u64 m/n/p/seed, f64 data."""
    header = _MAGIC + struct.pack("<IQQQQ", _DUMP_VERSION, ens.m, ens.n,
                                  ens.p, ens.seed)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ens.matrices, dtype="<f8").tobytes())


def load_ensemble(path) -> GaussianEnsemble:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"not an ensemble dump: bad magic {magic!r}")
        version, m, n, p, seed = struct.unpack("<IQQQQ", fh.read(4 + 32))
        if version != _DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        data = np.frombuffer(fh.read(8 * p * m * n), dtype="<f8")
    if data.size != p * m * n:
        raise ValueError("truncated ensemble dump")
    dense = data.reshape(p, m * n).copy()
    return GaussianEnsemble(m=int(m), n=int(n), p=int(p), seed=int(seed),
                            mode="dense", _dense=dense)
