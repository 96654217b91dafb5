"""Covariance/correlation construction from time series and SPD diagnostics.

A mean-centered covariance of ``n`` variables over ``t`` steps has rank at
most ``min(n, t - 1)``, so strict positive definiteness needs ``t >= n + 1``
observations. :func:`spdness_report` quantifies how close a matrix comes
(the percentage of eigenvalues above 1e-6), and :func:`clamp_to_spd` repairs
the few non-positive modes without touching the rest of the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .linalg import SpdMatrix, eig_sym, symmetrize

__all__ = [
    "CLAMP_FLOOR_DEFAULT",
    "SPDNESS_THRESHOLD",
    "SpdnessReport",
    "clamp_to_spd",
    "correlation",
    "covariance",
    "downsample_by_averaging",
    "spdness_report",
    "truncate",
]

# Replacement value for non-positive eigenvalues when repairing a matrix.
CLAMP_FLOOR_DEFAULT = 1e-6
# An eigenvalue counts as "positive" for SPD-ness above this threshold,
# independent of the clamp floor.
SPDNESS_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SpdnessReport:
    """Eigenvalue positivity summary for a matrix built from an (n, t) series."""

    n: int
    t: int
    eigenvalues: np.ndarray
    positive_count: int
    spdness_pct: float
    rank_bound: int
    is_spd: bool


def _as_series(x: np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"series must be a 2-d (n_vars, n_steps) array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("series contains non-finite values")
    return arr


def covariance(x: np.ndarray) -> np.ndarray:
    """Covariance matrix ``(1/t) sum_k (x_k - mean)(x_k - mean)^T``.

    The normalizer is ``1/t`` (not ``1/(t-1)``). Output is positive
    semidefinite with rank at most ``min(n, t - 1)``. A constant row has zero
    variance and is rejected by name.
    """
    arr = _as_series(x)
    n, t = arr.shape
    if t < 2:
        raise ValueError(f"covariance needs at least 2 time steps, got {t}")
    centered = arr - arr.mean(axis=1, keepdims=True)
    variances = np.einsum("ik,ik->i", centered, centered) / t
    dead = np.flatnonzero(variances <= 0.0)
    if dead.size:
        raise ValueError(
            f"variable row {dead[0]} is constant across time (zero variance)"
        )
    cov = centered @ centered.T / t
    return (cov + cov.T) / 2.0


def correlation(x: np.ndarray) -> np.ndarray:
    """Pearson correlation matrix: covariance scaled to unit diagonal."""
    cov = covariance(x)
    scale = 1.0 / np.sqrt(np.diag(cov))
    cor = cov * scale[:, None] * scale[None, :]
    cor = (cor + cor.T) / 2.0
    np.fill_diagonal(cor, 1.0)
    return cor


def clamp_to_spd(s: np.ndarray, floor: float = CLAMP_FLOOR_DEFAULT) -> SpdMatrix:
    """Replace non-positive eigenvalues with ``floor`` and recompose.

    Only eigenvalues ``<= 0`` are touched: tiny-but-positive modes below the
    floor pass through unchanged, and an already-SPD input is returned as-is
    (an exact identity map). Consequently
    ``||clamped - S||_F <= floor * sqrt(#clamped)`` up to recomposition error.
    """
    if floor <= 0.0:
        raise ValueError(f"clamp floor must be positive, got {floor}")
    if isinstance(s, SpdMatrix):
        return s
    arr = symmetrize(s)
    w = eigh(arr, eigvals_only=True, check_finite=False)
    if w[0] > 0.0:
        return SpdMatrix._trusted(arr, float(w[0]), float(w[-1]))
    dec = eig_sym(arr)
    clamped = dec.eigenvalues.copy()
    clamped[clamped <= 0.0] = floor
    out = dec.recompose(clamped)
    return SpdMatrix._trusted(out, float(np.min(clamped)), float(np.max(clamped)))


def spdness_report(s: np.ndarray, n: int, t: int) -> SpdnessReport:
    """Count eigenvalues above the SPD-ness threshold for an (n, t)-series matrix.

    ``spdness_pct`` is ``100 * positive_count / n``; ``is_spd`` requires every
    eigenvalue to clear the threshold. The count is checked against the
    centering rank bound ``min(n, t - 1)``.
    """
    arr = symmetrize(s)
    if arr.shape[0] != n:
        raise ValueError(f"matrix dimension {arr.shape[0]} does not match n={n}")
    if t < 2:
        raise ValueError(f"series length must be at least 2, got t={t}")
    w = np.sort(eigh(arr, eigvals_only=True, check_finite=False))
    positive = int(np.sum(w > SPDNESS_THRESHOLD))
    bound = min(n, t - 1)
    if positive > bound:
        raise ValueError(
            f"invariant violation: {positive} eigenvalues above "
            f"{SPDNESS_THRESHOLD:g} exceeds the rank bound min(n, t-1) = {bound} "
            f"for n={n}, t={t}"
        )
    return SpdnessReport(
        n=n,
        t=t,
        eigenvalues=w,
        positive_count=positive,
        spdness_pct=100.0 * positive / n,
        rank_bound=bound,
        is_spd=positive == n,
    )


def downsample_by_averaging(x: np.ndarray, target_t: int) -> np.ndarray:
    """Reduce a series to ``target_t`` steps by averaging consecutive blocks."""
    arr = _as_series(x)
    n, t = arr.shape
    if target_t < 1 or t % target_t != 0:
        raise ValueError(
            f"target length {target_t} must evenly divide the series length {t}"
        )
    block = t // target_t
    return arr.reshape(n, target_t, block).mean(axis=2)


def truncate(x: np.ndarray, target_t: int) -> np.ndarray:
    """Keep only the first ``target_t`` steps of a series."""
    arr = _as_series(x)
    if target_t < 1 or target_t > arr.shape[1]:
        raise ValueError(
            f"target length {target_t} must lie in [1, {arr.shape[1]}]"
        )
    return arr[:, :target_t].copy()
