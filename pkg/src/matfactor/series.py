"""Core containers and operations for matrix-valued time series.

A matrix-valued time series is a length-T sequence of p1 x p2 real matrices,
stored as a single (T, p1, p2) float64 array.  This module provides the
container type, per-cell standardization, transposition, column-major
flattening, and the lagged cross-covariance blocks that the factor estimators
are built from.

Conventions
-----------
* ``vec`` stacks matrix columns (column-major), so entry (a, i) of a matrix
  lands at flat position ``a + p1 * i``.
* The lag-h cross-covariance of the flattened series is the p1*p2 x p1*p2
  matrix ``C(h) = (1/(T-h)) * sum_t vec(X_t) vec(X_{t+h})'``.  Viewed as a
  p2 x p2 grid of p1 x p1 blocks, block (i, j) is the cross-covariance
  between column i of X_t and column j of X_{t+h}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    LagTooLarge,
    NonFinite,
    TooFewObservations,
    ZeroVarianceCell,
)

__all__ = [
    "MatrixSeries",
    "StandardizedSeries",
    "LaggedBlockCov",
    "standardize",
    "transpose_series",
    "vec_series",
    "lagged_block_cov",
]


@dataclass(frozen=True)
class MatrixSeries:
    """A (T, p1, p2) array of observed matrices.

    Parameters
    ----------
    data : ndarray
        Array of shape (T, p1, p2) with T >= 2.  Copied to a contiguous
        float64 array.  All entries must be finite.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionMismatch(
                f"series data must be 3-d (T, p1, p2), got shape {arr.shape}",
                shape=list(arr.shape),
            )
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise DimensionMismatch(
                f"series axes must all be positive, got shape {arr.shape}",
                shape=list(arr.shape),
            )
        if arr.shape[0] < 2:
            raise TooFewObservations(
                f"a series needs at least two observations, got T={arr.shape[0]}",
                T=int(arr.shape[0]),
            )
        if not np.isfinite(arr).all():
            t, r, c = np.argwhere(~np.isfinite(arr))[0]
            raise NonFinite(
                f"non-finite value at t={t + 1}, row={r + 1}, col={c + 1}",
                t=int(t) + 1, row=int(r) + 1, col=int(c) + 1,
            )
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def p1(self) -> int:
        return self.data.shape[1]

    @property
    def p2(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class StandardizedSeries:
    """A standardized series together with the training statistics used.

    ``series`` holds cell values ``(x - means) / scales``; ``means`` and
    ``scales`` are the per-cell sample mean and sample standard deviation
    (divisor T-1) of the input, each of shape (p1, p2).
    """

    series: MatrixSeries
    means: np.ndarray
    scales: np.ndarray


@dataclass(frozen=True)
class LaggedBlockCov:
    """Lag-h cross-covariance of a flattened series, with block addressing.

    ``flat`` is the p1*p2 x p1*p2 matrix C(h) defined in the module
    docstring.  ``block(i, j)`` returns the p1 x p1 cross-covariance between
    column i of X_t and column j of X_{t+h} (zero-based indices).
    """

    h: int
    p1: int
    p2: int
    flat: np.ndarray = field(repr=False)

    def block(self, i: int, j: int) -> np.ndarray:
        if not (0 <= i < self.p2 and 0 <= j < self.p2):
            raise DimensionMismatch(
                f"block index ({i}, {j}) out of range for p2={self.p2}",
                i=i, j=j, p2=self.p2,
            )
        p1 = self.p1
        return self.flat[i * p1:(i + 1) * p1, j * p1:(j + 1) * p1]

    def as_block_tensor(self) -> np.ndarray:
        """Return C(h) reshaped to (p2, p1, p2, p1): entry [i, a, j, b]
        equals ``block(i, j)[a, b]``."""
        return self.flat.reshape(self.p2, self.p1, self.p2, self.p1)


def standardize(series: MatrixSeries) -> StandardizedSeries:
    """Center and scale every cell series to mean 0 and unit sample sd.

    The standard deviation uses the sample convention (divisor T-1).
    A constant cell cannot be scaled and raises ZeroVarianceCell with the
    offending one-based coordinates.
    """
    means = series.data.mean(axis=0)
    scales = series.data.std(axis=0, ddof=1)
    if np.any(scales == 0.0):
        r, c = np.argwhere(scales == 0.0)[0]
        raise ZeroVarianceCell(
            f"cell (row={r + 1}, col={c + 1}) is constant over time",
            row=int(r) + 1, col=int(c) + 1,
        )
    out = (series.data - means) / scales
    return StandardizedSeries(MatrixSeries(out), means, scales)


def transpose_series(series: MatrixSeries) -> MatrixSeries:
    """Transpose every observed matrix, turning (T, p1, p2) into (T, p2, p1)."""
    return MatrixSeries(np.ascontiguousarray(series.data.transpose(0, 2, 1)))


def vec_series(series: MatrixSeries) -> np.ndarray:
    """Flatten each matrix by stacking its columns; returns (T, p1*p2).

    Column-major stacking: flat position a + p1*i holds entry (a, i).
    """
    T, p1, p2 = series.shape
    return series.data.transpose(0, 2, 1).reshape(T, p1 * p2)


def lagged_block_cov(series: MatrixSeries, h: int) -> LaggedBlockCov:
    """Compute the lag-h cross-covariance C(h) of the flattened series.

    C(h) = (1/(T-h)) * sum_{t=1}^{T-h} vec(X_t) vec(X_{t+h})', materialized
    as one dense p1*p2 x p1*p2 array (about 50 MB at p1 = p2 = 50).

    Parameters
    ----------
    series : MatrixSeries
    h : int
        Lag, between 1 and T-1 inclusive.

    Raises
    ------
    LagTooLarge
        If h >= T (no complete pairs remain).
    """
    T = series.T
    if h < 1:
        raise ValueError(f"lag must be >= 1, got {h}")
    if h >= T:
        raise LagTooLarge(
            f"lag {h} leaves no pairs in a series of length {T}", h=h, T=T,
        )
    V = vec_series(series)
    flat = V[:T - h].T @ V[h:]
    flat /= T - h
    return LaggedBlockCov(h=h, p1=series.p1, p2=series.p2, flat=flat)
