"""Vectorized-route baseline: factor analysis that ignores matrix structure.

Flattening each observation to a p1*p2 vector and fitting a plain one-way
factor model is the natural benchmark for the matrix-aware estimator.  Its
loading matrix costs p1*p2*k parameters against p1*k1 + p2*k2 for the
matrix route, and the comparison of the two recoveries quantifies what the
Kronecker structure buys.

The estimation recipe mirrors the matrix route: aggregate lagged
covariances of the flattened series into M = sum_h C(h) C(h)' and read the
loading span off the top eigenvectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, PanelTooLarge
from .estimator import AutocovGram, estimate_rank, sym_eig
from .series import MatrixSeries, lagged_block_cov, vec_series

__all__ = [
    "PANEL_LIMIT",
    "VecFactorFit",
    "autocov_gram_vec",
    "fit_vec",
    "signal_vec",
    "matrix_param_count",
    "vector_param_count",
]

# The flattened aggregate is (p1*p2)^2 doubles; 4096 caps it at 128 MB.
PANEL_LIMIT = 4096


@dataclass(frozen=True)
class VecFactorFit:
    """Fitted loading basis for the flattened series.

    ``q`` is (p1*p2) x k with orthonormal columns in the column-major
    flattening convention of :func:`matfactor.series.vec_series`.
    ``spectrum`` holds the leading eigenvalues of the flattened aggregate:
    all of them when the rank was selected automatically, the top k when the
    rank was fixed (computing the rest would dominate the fit at this size).
    """

    q: np.ndarray = field(repr=False)
    spectrum: np.ndarray
    p1: int
    p2: int
    h0: int

    @property
    def k(self) -> int:
        return self.q.shape[1]


def _check_panel(series: MatrixSeries) -> int:
    n = series.p1 * series.p2
    if n > PANEL_LIMIT:
        raise PanelTooLarge(
            f"flattened panel dimension {n} exceeds the vectorized-route "
            f"limit {PANEL_LIMIT}",
            p1=series.p1, p2=series.p2, limit=PANEL_LIMIT,
        )
    return n


def autocov_gram_vec(series: MatrixSeries, h0: int) -> AutocovGram:
    """Aggregate M = sum_{h=1}^{h0} C(h) C(h)' of the flattened series."""
    n = _check_panel(series)
    if h0 < 1:
        raise ValueError(f"h0 must be >= 1, got {h0}")
    m = np.zeros((n, n))
    for h in range(1, h0 + 1):
        c = lagged_block_cov(series, h).flat
        m += c @ c.T
    return AutocovGram(matrix=0.5 * (m + m.T), h0=h0, side="vec")


def fit_vec(series: MatrixSeries, h0: int = 1, k: int | None = None) -> VecFactorFit:
    """Fit the flattened factor model.

    Parameters
    ----------
    series : MatrixSeries
    h0 : int
        Number of lags aggregated.
    k : int or None
        Fixed factor count; ``None`` selects it by the eigenvalue-ratio
        rule over the first half of the spectrum.

    Raises
    ------
    PanelTooLarge
        If p1*p2 exceeds ``PANEL_LIMIT``.
    """
    n = _check_panel(series)
    gram = autocov_gram_vec(series, h0)
    if k is None:
        w, v = sym_eig(gram.matrix)
        spectrum = np.maximum(w, 0.0)
        k = estimate_rank(spectrum, n)
        return VecFactorFit(q=v[:, :k], spectrum=spectrum,
                            p1=series.p1, p2=series.p2, h0=h0)
    if not 1 <= k <= n:
        raise DimensionMismatch(
            f"fixed rank {k} out of range for flattened dimension {n}", k=k, n=n
        )
    w, v = sym_eig(gram.matrix, top=k)
    return VecFactorFit(q=v, spectrum=np.maximum(w, 0.0),
                        p1=series.p1, p2=series.p2, h0=h0)


def signal_vec(fitted: VecFactorFit, series: MatrixSeries) -> MatrixSeries:
    """Project observations onto the fitted flattened span, reshaped back.

    Returns the series whose vectorization is ``q q' vec(X_t)``.
    """
    if series.p1 != fitted.p1 or series.p2 != fitted.p2:
        raise DimensionMismatch(
            f"series is {series.p1} x {series.p2} but fit expects "
            f"{fitted.p1} x {fitted.p2}",
            p1=series.p1, p2=series.p2,
        )
    V = vec_series(series)
    S_flat = (V @ fitted.q) @ fitted.q.T
    S = S_flat.reshape(series.T, series.p2, series.p1).transpose(0, 2, 1)
    return MatrixSeries(np.ascontiguousarray(S))


def matrix_param_count(p1: int, p2: int, k1: int, k2: int) -> int:
    """Loading parameters of the matrix route: p1*k1 + p2*k2."""
    return p1 * k1 + p2 * k2


def vector_param_count(p1: int, p2: int, k: int) -> int:
    """Loading parameters of the flattened route: p1*p2*k."""
    return p1 * p2 * k
