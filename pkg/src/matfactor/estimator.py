"""Factor estimation for matrix-valued time series.

The observation model is X_t = R F_t C' + E_t with R (p1 x k1) and
C (p2 x k2) fixed loading matrices, F_t a latent k1 x k2 factor matrix, and
E_t white noise.  Only the column spans of R and C are identifiable, so the
estimator targets orthonormal bases of those spans.

The row-span basis is recovered from the eigenvectors of an aggregate of
lagged cross-covariances: for each lag h = 1..h0, sum the outer products
B B' of every p1 x p1 block B of the flattened lag-h covariance.  Noise is
serially uncorrelated, so these aggregates are driven by the signal alone and
their top-k1 eigenvectors converge to a basis of span(R).  The column-span
basis is obtained the same way after transposing every observation, and both
aggregates can be read off one flattened covariance per lag.

Ranks, when not supplied, are chosen by the eigenvalue-ratio rule: the index
minimizing lambda_{i+1} / lambda_i over the first half of the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    DegenerateSpectrum,
    DimensionMismatch,
    NotOrthonormal,
)
from .series import (
    LaggedBlockCov,
    MatrixSeries,
    StandardizedSeries,
    lagged_block_cov,
    standardize,
)

__all__ = [
    "EstimatorOptions",
    "AutocovGram",
    "LoadingEstimate",
    "FactorFit",
    "autocov_gram",
    "sym_eig",
    "estimate_rank",
    "fit",
    "extract_factors",
    "reconstruct_signal",
    "subspace_distance",
]

# Lag budgets beyond a handful add noise faster than signal; keep the knob
# small and explicit.
MAX_LAG_WINDOW = 8

# Denominators at or below RATIO_FLOOR * lambda_1 are numerically zero;
# their ratios are reported as 1 (no drop) instead of 0/0 noise.
RATIO_FLOOR = 1e-14


@dataclass(frozen=True)
class EstimatorOptions:
    """Knobs for :func:`fit`.

    Parameters
    ----------
    h0 : int
        Number of lags aggregated, between 1 and 8.
    k1, k2 : int or None
        Fixed row / column ranks.  ``None`` selects the rank automatically
        by the eigenvalue-ratio rule.
    standardize : bool
        Center and scale every cell series before estimation.  Off by
        default; raw panels from heterogeneous sources should enable it.
    """

    h0: int = 1
    k1: int | None = None
    k2: int | None = None
    standardize: bool = False

    def __post_init__(self):
        if not isinstance(self.h0, (int, np.integer)) or isinstance(self.h0, bool):
            raise ValueError(f"h0 must be an integer, got {self.h0!r}")
        if not 1 <= self.h0 <= MAX_LAG_WINDOW:
            raise ValueError(
                f"h0 must be between 1 and {MAX_LAG_WINDOW}, got {self.h0}"
            )
        for name, k in (("k1", self.k1), ("k2", self.k2)):
            if k is not None and k < 1:
                raise ValueError(f"{name} must be >= 1 when fixed, got {k}")


@dataclass(frozen=True)
class AutocovGram:
    """Aggregated outer products of lagged cross-covariance blocks.

    ``matrix`` is symmetric positive semidefinite up to roundoff (it is a
    sum of Gram terms, symmetrized after accumulation).  ``side`` records
    whether blocks were paired to target the row span ("row") or the column
    span ("col") of the loadings.
    """

    matrix: np.ndarray = field(repr=False)
    h0: int
    side: str


def _gram_from_block_tensor(O: np.ndarray, side: str) -> np.ndarray:
    # O[i, a, j, b] = block(i, j)[a, b]; i, j index columns, a, b rows.
    p2, p1 = O.shape[0], O.shape[1]
    if side == "row":
        A = np.ascontiguousarray(O.transpose(1, 0, 2, 3)).reshape(p1, -1)
        return A @ A.T
    # Column side: block (i, j) of the transposed series at entry (a, b)
    # equals O[a, i, b, j], so the contraction keeps axis 0.
    A = O.reshape(p2, -1)
    return A @ A.T


def _gram_pair(series: MatrixSeries, h0: int) -> tuple[np.ndarray, np.ndarray]:
    """Row- and column-side aggregates sharing one flattened covariance per lag."""
    p1, p2 = series.p1, series.p2
    g_row = np.zeros((p1, p1))
    g_col = np.zeros((p2, p2))
    for h in range(1, h0 + 1):
        O = lagged_block_cov(series, h).as_block_tensor()
        g_row += _gram_from_block_tensor(O, "row")
        g_col += _gram_from_block_tensor(O, "col")
    return 0.5 * (g_row + g_row.T), 0.5 * (g_col + g_col.T)


def autocov_gram(series: MatrixSeries, h0: int, side: str = "row") -> AutocovGram:
    """Aggregate lagged cross-covariance outer products for one side.

    For ``side="row"`` the result is p1 x p1 and its leading eigenvectors
    estimate the row-loading span; ``side="col"`` gives the p2 x p2 analogue
    and equals (up to roundoff) the row-side aggregate of the transposed
    series.

    Parameters
    ----------
    series : MatrixSeries
    h0 : int
        Lags 1..h0 are accumulated; must satisfy h0 <= T-1.
    side : {"row", "col"}
    """
    if side not in ("row", "col"):
        raise ValueError(f"side must be 'row' or 'col', got {side!r}")
    if h0 < 1:
        raise ValueError(f"h0 must be >= 1, got {h0}")
    p = series.p1 if side == "row" else series.p2
    g = np.zeros((p, p))
    for h in range(1, h0 + 1):
        O = lagged_block_cov(series, h).as_block_tensor()
        g += _gram_from_block_tensor(O, side)
    return AutocovGram(matrix=0.5 * (g + g.T), h0=h0, side=side)


def sym_eig(m: np.ndarray, top: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, descending, signs fixed.

    Returns ``(values, vectors)`` with eigenvalues sorted descending and
    each eigenvector column oriented so that its entry sum is positive
    (falling back to the sign of its first nonzero entry when the sum is
    exactly zero).  ``top`` restricts the computation to the leading
    ``top`` eigenpairs, which is much cheaper for large matrices.

    Raises
    ------
    ConvergenceFailure
        If the underlying LAPACK solver does not converge.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(
            f"expected a square matrix, got shape {m.shape}", shape=list(m.shape)
        )
    n = m.shape[0]
    if top is not None and not 1 <= top <= n:
        raise ValueError(f"top must be between 1 and {n}, got {top}")
    try:
        if top is None or top == n:
            w, v = scipy.linalg.eigh(m)
        else:
            w, v = scipy.linalg.eigh(m, subset_by_index=(n - top, n - 1))
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(f"eigen solver failed: {exc}") from exc
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    for j in range(v.shape[1]):
        s = v[:, j].sum()
        if s == 0.0:
            nz = np.nonzero(v[:, j])[0]
            s = v[nz[0], j] if nz.size else 1.0
        if s < 0.0:
            v[:, j] = -v[:, j]
    return w, v


def estimate_rank(spectrum: np.ndarray, p: int | None = None,
                  eps_abs: float = 1e-12) -> int:
    """Pick a rank by minimizing consecutive eigenvalue ratios.

    Searches i = 1..floor(p/2) for the smallest ratio
    ``spectrum[i] / spectrum[i-1]`` (zero-based), returning the one-based
    index of the minimum; ties break toward the smallest index.

    Parameters
    ----------
    spectrum : array
        Eigenvalues sorted descending, all >= 0.
    p : int, optional
        Dimension defining the search bound; defaults to ``len(spectrum)``.
    eps_abs : float
        Absolute threshold below which the leading eigenvalue counts as zero.

    Raises
    ------
    DegenerateSpectrum
        If the leading eigenvalue is <= ``eps_abs``.
    """
    lam = np.asarray(spectrum, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("spectrum must be a 1-d array with at least 2 entries")
    if p is None:
        p = lam.size
    if lam[0] <= eps_abs:
        raise DegenerateSpectrum(
            f"leading eigenvalue {lam[0]:.3e} is at or below {eps_abs:.1e}",
            leading=float(lam[0]),
        )
    m = p // 2
    if m < 1:
        raise ValueError(f"rank search needs p >= 2, got p={p}")
    if m + 1 > lam.size:
        raise ValueError(
            f"spectrum has {lam.size} entries, need {m + 1} to search up to {m}"
        )
    denom = lam[:m]
    num = lam[1:m + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(denom > RATIO_FLOOR * lam[0], num / denom, 1.0)
    return int(np.argmin(ratios)) + 1


@dataclass(frozen=True)
class LoadingEstimate:
    """An estimated orthonormal loading basis for one side.

    ``q`` is p x k with orthonormal columns, ``eigenvalues`` holds the k
    leading eigenvalues of the side's aggregate, and ``spectrum`` the full
    descending eigenvalue sequence (negatives clamped to zero).
    """

    q: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    spectrum: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.q.shape[0]

    @property
    def k(self) -> int:
        return self.q.shape[1]


@dataclass(frozen=True)
class FactorFit:
    """Fitted loading bases for both sides plus the options that produced them."""

    row: LoadingEstimate
    col: LoadingEstimate
    options: EstimatorOptions
    standardization: StandardizedSeries | None = None

    @property
    def p1(self) -> int:
        return self.row.p

    @property
    def p2(self) -> int:
        return self.col.p

    @property
    def k1(self) -> int:
        return self.row.k

    @property
    def k2(self) -> int:
        return self.col.k


def _side_estimate(gram: np.ndarray, k_fixed: int | None, p: int) -> LoadingEstimate:
    w, v = sym_eig(gram)
    spectrum = np.maximum(w, 0.0)
    if k_fixed is None:
        k = estimate_rank(spectrum, p)
    else:
        if k_fixed > p:
            raise DimensionMismatch(
                f"fixed rank {k_fixed} exceeds dimension {p}", k=k_fixed, p=p
            )
        k = k_fixed
    return LoadingEstimate(q=v[:, :k], eigenvalues=spectrum[:k], spectrum=spectrum)


def fit(series: MatrixSeries, options: EstimatorOptions | None = None) -> FactorFit:
    """Estimate row and column loading spans of a matrix time series.

    Both sides are computed from the same flattened lag covariances, so one
    pass over lags 1..h0 serves the whole fit.  With ``options.standardize``
    the series is standardized first and the training statistics are kept on
    the returned fit; factor extraction then reuses them.
    """
    opts = options or EstimatorOptions()
    std = None
    if opts.standardize:
        std = standardize(series)
        series = std.series
    g_row, g_col = _gram_pair(series, opts.h0)
    row = _side_estimate(g_row, opts.k1, series.p1)
    col = _side_estimate(g_col, opts.k2, series.p2)
    return FactorFit(row=row, col=col, options=opts, standardization=std)


def _prepared(fitted: FactorFit, series: MatrixSeries) -> np.ndarray:
    if series.p1 != fitted.p1 or series.p2 != fitted.p2:
        raise DimensionMismatch(
            f"series is {series.p1} x {series.p2} but fit expects "
            f"{fitted.p1} x {fitted.p2}",
            p1=series.p1, p2=series.p2,
        )
    if fitted.standardization is not None:
        st = fitted.standardization
        return (series.data - st.means) / st.scales
    return series.data


def extract_factors(fitted: FactorFit, series: MatrixSeries) -> MatrixSeries:
    """Project observations onto the fitted bases: Z_t = Q1' X_t Q2.

    When the fit was standardized, the stored training means and scales are
    applied to ``series`` first.
    """
    X = _prepared(fitted, series)
    Z = np.matmul(fitted.row.q.T, np.matmul(X, fitted.col.q))
    return MatrixSeries(Z)


def reconstruct_signal(fitted: FactorFit, series: MatrixSeries) -> MatrixSeries:
    """Project observations onto the fitted signal space: Q1 Q1' X_t Q2 Q2'.

    Output stays on the scale the fit operates on (standardized units when
    the fit standardizes).
    """
    X = _prepared(fitted, series)
    q1, q2 = fitted.row.q, fitted.col.q
    Z = np.matmul(q1.T, np.matmul(X, q2))
    S = np.matmul(q1, np.matmul(Z, q2.T))
    return MatrixSeries(S)


def subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Distance between the column spans of two orthonormal matrices.

    ``sqrt(1 - ||a' b||_F^2 / max(q_a, q_b))`` where q are the column
    counts.  It is 0 iff the spans coincide (equal column counts), 1 when
    they are orthogonal, and invariant to right-multiplication of either
    argument by an orthogonal matrix.

    Raises
    ------
    NotOrthonormal
        If either argument's columns are not orthonormal within 1e-8.
    DimensionMismatch
        If the arguments have different row counts.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch("subspace distance expects 2-d arrays")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"row counts differ: {a.shape[0]} vs {b.shape[0]}",
            rows_a=a.shape[0], rows_b=b.shape[0],
        )
    if a.shape[1] < 1 or b.shape[1] < 1:
        raise DimensionMismatch("subspace distance needs at least one column")
    for name, o in (("first", a), ("second", b)):
        dev = np.abs(o.T @ o - np.eye(o.shape[1])).max()
        if dev > 1e-8:
            raise NotOrthonormal(
                f"{name} argument deviates from orthonormal columns by {dev:.3e}",
                deviation=float(dev),
            )
    # Evaluated through the projection residual of the narrower basis onto
    # the wider: 1 - ||a'b||^2/q_max == (q_max - q_min + ||b - a(a'b)||^2)/q_max
    # exactly, but the right side avoids the catastrophic cancellation that
    # would otherwise floor the result near sqrt(eps) for coinciding spans.
    if a.shape[1] < b.shape[1]:
        a, b = b, a
    resid = b - a @ (a.T @ b)
    val = (a.shape[1] - b.shape[1] + (resid * resid).sum()) / a.shape[1]
    return float(np.sqrt(max(val, 0.0)))
