"""Out-of-sample validation and convergence-rate checks.

Factor counts are the one thing the estimator cannot certify internally, so
this module scores candidate models on held-out data: K-fold cross
validation over contiguous time blocks, and rolling origin validation that
repeatedly fits on an initial segment and scores a subsequent window.  Both
report residual sum of squares relative to total sum of squares; a clear
elbow across candidate ranks marks the model to keep.

``rate_study`` fits log-log slopes of a study metric against a swept design
axis, which is how the estimator's theoretical convergence rates are checked
empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baseline import (
    PANEL_LIMIT,
    VecFactorFit,
    matrix_param_count,
    vector_param_count,
)
from .errors import DimensionMismatch, PanelTooLarge, ScheduleInvalid
from .estimator import (
    EstimatorOptions,
    FactorFit,
    LoadingEstimate,
    _gram_pair,
    sym_eig,
)
from .series import MatrixSeries, lagged_block_cov, standardize
from .study import StudyCell, run_study

__all__ = [
    "ModelSpec",
    "ValidationRow",
    "ValidationReport",
    "RateFit",
    "rss_sst",
    "kfold_cv",
    "make_rolling_schedule",
    "rolling_validation",
    "rate_study",
]


@dataclass(frozen=True)
class ModelSpec:
    """A candidate model: matrix route with ranks (k1, k2), or vector route
    with k flattened factors.  Rank zero (both sides, or k=0) means the
    no-factor model whose fitted signal is identically zero."""

    kind: str
    k1: int | None = None
    k2: int | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind == "matrix":
            if self.k1 is None or self.k2 is None or self.k is not None:
                raise ValueError("matrix spec needs k1 and k2 only")
            if (self.k1 == 0) != (self.k2 == 0):
                raise ValueError("zero-factor matrix spec needs k1 = k2 = 0")
            if self.k1 < 0 or self.k2 < 0:
                raise ValueError("ranks must be >= 0")
        elif self.kind == "vector":
            if self.k is None or self.k1 is not None or self.k2 is not None:
                raise ValueError("vector spec needs k only")
            if self.k < 0:
                raise ValueError("k must be >= 0")
        else:
            raise ValueError(f"kind must be 'matrix' or 'vector', got {self.kind!r}")

    @property
    def factor_count(self) -> int:
        return self.k1 * self.k2 if self.kind == "matrix" else self.k

    def param_count(self, p1: int, p2: int) -> int:
        if self.kind == "matrix":
            return matrix_param_count(p1, p2, self.k1, self.k2)
        return vector_param_count(p1, p2, self.k)

    def describe(self) -> str:
        if self.kind == "matrix":
            return f"matrix({self.k1},{self.k2})"
        return f"vector({self.k})"


@dataclass(frozen=True)
class ValidationRow:
    model: str
    rss: float
    sst: float
    factor_count: int
    param_count: int

    @property
    def ratio(self) -> float:
        return self.rss / self.sst


@dataclass(frozen=True)
class ValidationReport:
    method: str
    h0: int
    standardized: bool
    rows: list[ValidationRow]
    detail: dict | None = None


def _rss_sst_data(fitted: FactorFit | VecFactorFit,
                  data: np.ndarray) -> tuple[float, float]:
    """Array-level scorer behind :func:`rss_sst`.

    Takes a raw (m, p1, p2) block so held-out windows as short as a single
    observation can be scored.
    """
    m, p1, p2 = data.shape
    if p1 != fitted.p1 or p2 != fitted.p2:
        raise DimensionMismatch(
            f"data is {p1} x {p2} but fit expects {fitted.p1} x {fitted.p2}",
            p1=p1, p2=p2,
        )
    if isinstance(fitted, VecFactorFit):
        V = data.transpose(0, 2, 1).reshape(m, p1 * p2)
        resid = V - (V @ fitted.q) @ fitted.q.T
        return float((resid * resid).sum()), float((V * V).sum())
    x = data
    if fitted.standardization is not None:
        st = fitted.standardization
        x = (x - st.means) / st.scales
    q1, q2 = fitted.row.q, fitted.col.q
    s_hat = np.matmul(q1, np.matmul(np.matmul(q1.T, np.matmul(x, q2)), q2.T))
    resid = x - s_hat
    return float((resid * resid).sum()), float((x * x).sum())


def rss_sst(fitted: FactorFit | VecFactorFit,
            series: MatrixSeries) -> tuple[float, float]:
    """Residual and total sum of squares of ``series`` under a fitted model.

    Residuals are taken on the scale the fit operates on: a fit built with
    standardization applies its stored training statistics to ``series``
    first.
    """
    return _rss_sst_data(fitted, series.data)


def _sum_squares(data: np.ndarray) -> float:
    return float((data * data).sum())


class _SharedFits:
    """Eigen-decompositions computed once per training set and sliced per spec.

    Leading eigenvectors are nested across ranks, so fitting (k1, k2) for
    every candidate only needs one aggregate and one decomposition per side
    (plus one for the flattened route when vector specs are present).
    """

    def __init__(self, train: MatrixSeries, specs: list[ModelSpec], h0: int):
        self.h0 = h0
        self.p1, self.p2 = train.p1, train.p2
        need_mat = any(s.kind == "matrix" and s.factor_count > 0 for s in specs)
        need_vec = any(s.kind == "vector" and s.factor_count > 0 for s in specs)
        if need_vec and self.p1 * self.p2 > PANEL_LIMIT:
            raise PanelTooLarge(
                f"vector specs need flattened dimension <= {PANEL_LIMIT}, "
                f"got {self.p1 * self.p2}",
                p1=self.p1, p2=self.p2, limit=PANEL_LIMIT,
            )
        self.v1 = self.v2 = self.spec1 = self.spec2 = None
        self.vv = self.specv = None
        if need_mat and not need_vec:
            g_row, g_col = _gram_pair(train, h0)
            self._set_mat(g_row, g_col)
        elif need_vec:
            n = self.p1 * self.p2
            g_row = np.zeros((self.p1, self.p1))
            g_col = np.zeros((self.p2, self.p2))
            m_vec = np.zeros((n, n))
            from .estimator import _gram_from_block_tensor
            for h in range(1, h0 + 1):
                flat = lagged_block_cov(train, h).flat
                O = flat.reshape(self.p2, self.p1, self.p2, self.p1)
                g_row += _gram_from_block_tensor(O, "row")
                g_col += _gram_from_block_tensor(O, "col")
                m_vec += flat @ flat.T
            if need_mat:
                self._set_mat(g_row, g_col)
            wv, vv = sym_eig(0.5 * (m_vec + m_vec.T))
            self.vv = vv
            self.specv = np.maximum(wv, 0.0)

    def _set_mat(self, g_row: np.ndarray, g_col: np.ndarray) -> None:
        w1, v1 = sym_eig(g_row)
        w2, v2 = sym_eig(g_col)
        self.v1, self.spec1 = v1, np.maximum(w1, 0.0)
        self.v2, self.spec2 = v2, np.maximum(w2, 0.0)

    def fitted(self, spec: ModelSpec) -> FactorFit | VecFactorFit | None:
        """Return a fit for ``spec``; None encodes the zero-factor model."""
        if spec.factor_count == 0:
            return None
        if spec.kind == "matrix":
            row = LoadingEstimate(self.v1[:, :spec.k1], self.spec1[:spec.k1],
                                  self.spec1)
            col = LoadingEstimate(self.v2[:, :spec.k2], self.spec2[:spec.k2],
                                  self.spec2)
            opts = EstimatorOptions(h0=self.h0, k1=spec.k1, k2=spec.k2)
            return FactorFit(row=row, col=col, options=opts)
        return VecFactorFit(q=self.vv[:, :spec.k], spectrum=self.specv,
                            p1=self.p1, p2=self.p2, h0=self.h0)


def _score(fitted, heldout: np.ndarray) -> tuple[float, float]:
    if fitted is None:
        sst = _sum_squares(heldout)
        return sst, sst
    return _rss_sst_data(fitted, heldout)


def kfold_cv(series: MatrixSeries, n_folds: int, specs: list[ModelSpec],
             h0: int = 1, standardize_train: bool = False) -> ValidationReport:
    """K-fold cross validation over contiguous time blocks.

    The series is cut into ``n_folds`` contiguous blocks; each block in turn
    is held out, candidate models are fitted on the remaining observations
    (concatenated in time order), and held-out residuals are accumulated.
    With ``standardize_train`` each training set is standardized and its
    statistics are applied to the held-out block before scoring.

    Returns one row per spec with RSS and SST summed over all folds.
    """
    T = series.T
    if n_folds < 2:
        raise ScheduleInvalid(f"need at least 2 folds, got {n_folds}",
                              folds=n_folds)
    if T < 2 * n_folds:
        raise ScheduleInvalid(
            f"{n_folds} folds need at least {2 * n_folds} observations, "
            f"got {T}",
            folds=n_folds, T=T,
        )
    if not specs:
        raise ScheduleInvalid("no model specs supplied")
    bounds = [i * T // n_folds for i in range(n_folds + 1)]
    min_train = max(2, h0 + 1)
    rss = {id(s): 0.0 for s in specs}
    sst = {id(s): 0.0 for s in specs}
    for k in range(n_folds):
        lo, hi = bounds[k], bounds[k + 1]
        train_data = np.concatenate(
            [series.data[:lo], series.data[hi:]], axis=0)
        if train_data.shape[0] < min_train:
            raise ScheduleInvalid(
                f"fold {k + 1} leaves only {train_data.shape[0]} training "
                f"observations, need >= {min_train}",
                fold=k + 1,
            )
        train = MatrixSeries(train_data)
        heldout = series.data[lo:hi]
        if standardize_train:
            st = standardize(train)
            train = st.series
            heldout = (heldout - st.means) / st.scales
        shared = _SharedFits(train, specs, h0)
        for s in specs:
            r, t = _score(shared.fitted(s), heldout)
            rss[id(s)] += r
            sst[id(s)] += t
    rows = [
        ValidationRow(model=s.describe(), rss=rss[id(s)], sst=sst[id(s)],
                      factor_count=s.factor_count,
                      param_count=s.param_count(series.p1, series.p2))
        for s in specs
    ]
    return ValidationReport(method="kfold", h0=h0,
                            standardized=standardize_train, rows=rows,
                            detail={"folds": n_folds, "T": T})


def default_min_train(p1: int, p2: int) -> int:
    """Smallest training window accepted by rolling validation."""
    return max(2 * max(p1, p2), 24)


def make_rolling_schedule(T: int, test_len: int = 12,
                          min_train: int | None = None,
                          p1: int | None = None,
                          p2: int | None = None) -> list[tuple[int, int, int]]:
    """Consecutive (train_end, test_start, test_end) windows of ``test_len``.

    Windows are one-based and inclusive; the first test window starts after
    ``min_train`` observations and only complete windows are emitted.
    """
    if min_train is None:
        if p1 is None or p2 is None:
            raise ValueError("need min_train or panel dims to derive it")
        min_train = default_min_train(p1, p2)
    if test_len < 1:
        raise ScheduleInvalid(f"test_len must be >= 1, got {test_len}",
                              test_len=test_len)
    schedule = []
    start = min_train + 1
    while start + test_len - 1 <= T:
        schedule.append((start - 1, start, start + test_len - 1))
        start += test_len
    return schedule


def rolling_validation(series: MatrixSeries,
                       schedule: list[tuple[int, int, int]],
                       specs: list[ModelSpec], h0: int = 1,
                       standardize_train: bool = False,
                       min_train: int | None = None) -> ValidationReport:
    """Rolling origin validation over an explicit window schedule.

    Each schedule entry (train_end, test_start, test_end) fits candidates on
    observations 1..train_end and scores observations test_start..test_end
    (one-based, inclusive).  Test windows must be in increasing order and
    must not overlap; training windows shorter than ``min_train`` (default
    ``max(2 * max(p1, p2), 24)``) are rejected.
    """
    T = series.T
    if min_train is None:
        min_train = default_min_train(series.p1, series.p2)
    if not schedule:
        raise ScheduleInvalid("empty rolling schedule")
    if not specs:
        raise ScheduleInvalid("no model specs supplied")
    prev_test_end = 0
    for w, (train_end, test_start, test_end) in enumerate(schedule):
        if not (1 <= train_end < test_start <= test_end <= T):
            raise ScheduleInvalid(
                f"window {w + 1} ({train_end}, {test_start}, {test_end}) "
                f"is out of order for T={T}",
                window=w + 1,
            )
        if test_start <= prev_test_end:
            raise ScheduleInvalid(
                f"window {w + 1} overlaps the previous test window",
                window=w + 1,
            )
        if train_end < min_train:
            raise ScheduleInvalid(
                f"window {w + 1} trains on {train_end} observations, "
                f"need >= {min_train}",
                window=w + 1, min_train=min_train,
            )
        prev_test_end = test_end
    rss = {id(s): 0.0 for s in specs}
    sst = {id(s): 0.0 for s in specs}
    for train_end, test_start, test_end in schedule:
        train = MatrixSeries(series.data[:train_end])
        heldout = series.data[test_start - 1:test_end]
        if standardize_train:
            st = standardize(train)
            train = st.series
            heldout = (heldout - st.means) / st.scales
        shared = _SharedFits(train, specs, h0)
        for s in specs:
            r, t = _score(shared.fitted(s), heldout)
            rss[id(s)] += r
            sst[id(s)] += t
    rows = [
        ValidationRow(model=s.describe(), rss=rss[id(s)], sst=sst[id(s)],
                      factor_count=s.factor_count,
                      param_count=s.param_count(series.p1, series.p2))
        for s in specs
    ]
    return ValidationReport(method="rolling", h0=h0,
                            standardized=standardize_train, rows=rows,
                            detail={"windows": len(schedule), "T": T,
                                    "min_train": min_train})


@dataclass(frozen=True)
class RateFit:
    """Log-log regression of a study metric against a swept axis."""

    slope: float
    intercept: float
    r2: float
    axis: tuple[float, ...]
    means: tuple[float, ...]


def rate_study(cells: list[StudyCell], axis: list[float], metric: str,
               master_seed: int = 0, workers: int | None = None) -> RateFit:
    """Run ``cells`` and regress log(mean metric) on log(axis).

    ``axis`` holds the design quantity swept across cells (sample size,
    panel dimension, ...), one positive value per cell; at least three
    points are required for a meaningful slope.
    """
    if len(cells) != len(axis):
        raise ValueError(f"{len(cells)} cells but {len(axis)} axis values")
    if len(cells) < 3:
        raise ValueError("rate study needs at least 3 grid points")
    if any(a <= 0 for a in axis):
        raise ValueError("axis values must be positive")
    report = run_study(cells, master_seed=master_seed, workers=workers)
    means = []
    for cell in report.cells:
        if metric not in cell.metrics:
            raise ValueError(f"metric {metric!r} missing from cell results")
        means.append(cell.metrics[metric].mean)
    if any(m <= 0 for m in means):
        raise ValueError("metric means must be positive for a log-log fit")
    x = np.log(np.asarray(axis, dtype=np.float64))
    y = np.log(np.asarray(means, dtype=np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    yhat = slope * x + intercept
    ss_res = float(((y - yhat) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r2=r2,
                   axis=tuple(float(a) for a in axis),
                   means=tuple(float(m) for m in means))
