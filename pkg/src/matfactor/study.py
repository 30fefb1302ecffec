"""Monte-Carlo studies over grids of simulation settings.

A study is a list of cells, each pairing a :class:`SimConfig` template with
a lag window, a replicate count, and a set of metrics.  Every replicate
draws a fresh series (loadings included) with a substream seeded by
``(master_seed, cell_index, replicate)``, fits whichever estimators the
requested metrics need, and reports per-replicate metric values; the study
aggregates means and standard deviations (divisor n-1) plus selected-rank
frequency tables.

Replicates can run in a process pool.  Inside replicate computations the
BLAS thread pool is pinned to one thread, and aggregation order is fixed by
replicate index, so a study's output is byte-identical no matter how many
workers execute it.  The worker count is capped by the MATFACTOR_THREADS
environment variable.

Metric names
------------
d_row_space, d_col_space
    Span distance between each estimated loading basis (true ranks) and the
    truth.
d_joint_mat, d_joint_vec
    Span distance for the joint (Kronecker) basis: the matrix route's
    kron(col, row) basis, or the flattened route's basis, against the true
    kron span.
d_signal_mat, d_signal_vec
    Mean per-period spectral norm of the signal reconstruction error,
    scaled by 1/sqrt(p1*p2).
ranks_mat, rank_vec
    Automatically selected ranks; aggregated as frequency tables.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .baseline import PANEL_LIMIT
from .errors import PanelTooLarge
from .estimator import (
    _gram_from_block_tensor,
    estimate_rank,
    subspace_distance,
    sym_eig,
)
from .series import MatrixSeries, lagged_block_cov, vec_series
from .simulation import SimConfig, SimTruth, simulate

__all__ = [
    "SCALAR_METRICS",
    "RANK_METRICS",
    "StudyCell",
    "MetricSummary",
    "CellResult",
    "StudyReport",
    "run_study",
    "resolve_workers",
]

SCALAR_METRICS = (
    "d_row_space",
    "d_col_space",
    "d_joint_mat",
    "d_joint_vec",
    "d_signal_mat",
    "d_signal_vec",
)
RANK_METRICS = ("ranks_mat", "rank_vec")

_MAT_METRICS = {"d_row_space", "d_col_space", "d_joint_mat", "d_signal_mat",
                "ranks_mat"}
_VEC_METRICS = {"d_joint_vec", "d_signal_vec", "rank_vec"}


@dataclass(frozen=True)
class StudyCell:
    """One grid cell: a simulation design plus what to measure on it."""

    config: SimConfig
    h0: int = 1
    metrics: tuple[str, ...] = ("d_row_space", "d_col_space")
    replicates: int = 200
    label: str = ""

    def __post_init__(self):
        known = set(SCALAR_METRICS) | set(RANK_METRICS)
        unknown = [m for m in self.metrics if m not in known]
        if unknown:
            raise ValueError(f"unknown metrics: {unknown}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if self.h0 < 1:
            raise ValueError(f"h0 must be >= 1, got {self.h0}")
        n = self.config.p1 * self.config.p2
        if set(self.metrics) & _VEC_METRICS and n > PANEL_LIMIT:
            raise PanelTooLarge(
                f"cell requests vectorized metrics at flattened dimension {n} "
                f"> {PANEL_LIMIT}",
                p1=self.config.p1, p2=self.config.p2, limit=PANEL_LIMIT,
            )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    sd: float | None
    n: int


@dataclass(frozen=True)
class CellResult:
    """Aggregated metrics for one cell."""

    label: str
    params: dict
    replicates: int
    metrics: dict[str, MetricSummary]
    rank_freq_mat: dict[tuple[int, int], float] = field(default_factory=dict)
    rank_freq_vec: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class StudyReport:
    master_seed: int
    cells: list[CellResult]


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit request, capped by MATFACTOR_THREADS and CPUs."""
    cap = os.cpu_count() or 1
    env = os.environ.get("MATFACTOR_THREADS")
    if env is not None:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            raise ValueError(
                f"MATFACTOR_THREADS must be an integer, got {env!r}"
            ) from None
    if workers is None:
        return cap
    return max(1, min(workers, cap))


def _kron_span_distance(q1h: np.ndarray, q2h: np.ndarray,
                        q1: np.ndarray, q2: np.ndarray) -> float:
    # ||(A kron B)||_F^2 factorizes, so the Kronecker bases never need forming.
    cross1 = q1h.T @ q1
    cross2 = q2h.T @ q2
    tr = (cross1 * cross1).sum() * (cross2 * cross2).sum()
    k_hat = q1h.shape[1] * q2h.shape[1]
    k_true = q1.shape[1] * q2.shape[1]
    val = 1.0 - tr / max(k_hat, k_true)
    return float(np.sqrt(max(val, 0.0)))


def _signal_error(s_hat: np.ndarray, truth: SimTruth) -> float:
    diff = s_hat - truth.signal
    # Largest singular value per period, batched.
    tops = np.linalg.svd(diff, compute_uv=False)[:, 0]
    p1, p2 = truth.signal.shape[1], truth.signal.shape[2]
    return float(tops.mean() / math.sqrt(p1 * p2))


def _replicate_metrics(config: SimConfig, h0: int, metrics: tuple[str, ...],
                       seed: tuple[int, ...]) -> dict:
    cfg = replace(config, seed=seed)
    series, truth = simulate(cfg)
    p1, p2, T = series.p1, series.p2, series.T
    want = set(metrics)
    need_mat = bool(want & _MAT_METRICS)
    need_vec = bool(want & _VEC_METRICS)

    # One flattened covariance per lag feeds both estimators.
    g_row = np.zeros((p1, p1))
    g_col = np.zeros((p2, p2))
    m_vec = np.zeros((p1 * p2, p1 * p2)) if need_vec else None
    for h in range(1, h0 + 1):
        flat = lagged_block_cov(series, h).flat
        O = flat.reshape(p2, p1, p2, p1)
        if need_mat:
            g_row += _gram_from_block_tensor(O, "row")
            g_col += _gram_from_block_tensor(O, "col")
        if need_vec:
            m_vec += flat @ flat.T
        del flat, O

    out: dict = {}
    k1, k2 = config.k1, config.k2
    if need_mat:
        w1, v1 = sym_eig(0.5 * (g_row + g_row.T))
        w2, v2 = sym_eig(0.5 * (g_col + g_col.T))
        spec1 = np.maximum(w1, 0.0)
        spec2 = np.maximum(w2, 0.0)
        q1h, q2h = v1[:, :k1], v2[:, :k2]
        if "ranks_mat" in want:
            out["ranks_mat"] = (estimate_rank(spec1, p1), estimate_rank(spec2, p2))
        if "d_row_space" in want:
            out["d_row_space"] = subspace_distance(q1h, truth.row_basis())
        if "d_col_space" in want:
            out["d_col_space"] = subspace_distance(q2h, truth.col_basis())
        if "d_joint_mat" in want:
            out["d_joint_mat"] = _kron_span_distance(
                q1h, q2h, truth.row_basis(), truth.col_basis())
        if "d_signal_mat" in want:
            z = np.matmul(q1h.T, np.matmul(series.data, q2h))
            s_hat = np.matmul(q1h, np.matmul(z, q2h.T))
            out["d_signal_mat"] = _signal_error(s_hat, truth)
    if need_vec:
        m_vec = 0.5 * (m_vec + m_vec.T)
        k_joint = k1 * k2
        if "rank_vec" in want:
            wv, vv = sym_eig(m_vec)
            specv = np.maximum(wv, 0.0)
            out["rank_vec"] = estimate_rank(specv, p1 * p2)
            qv = vv[:, :k_joint]
        else:
            _, qv = sym_eig(m_vec, top=k_joint)
        if "d_joint_vec" in want:
            q_true = np.kron(truth.col_basis(), truth.row_basis())
            out["d_joint_vec"] = subspace_distance(qv, q_true)
        if "d_signal_vec" in want:
            V = vec_series(series)
            s_flat = (V @ qv) @ qv.T
            s_hat = s_flat.reshape(T, p2, p1).transpose(0, 2, 1)
            out["d_signal_vec"] = _signal_error(s_hat, truth)
    return out


def _run_job(job) -> tuple[int, int, dict]:
    ci, rep, config, h0, metrics, seed = job
    with threadpool_limits(limits=1):
        return ci, rep, _replicate_metrics(config, h0, metrics, seed)


def _cell_params(cell: StudyCell) -> dict:
    cfg = cell.config
    factors = cfg.factors
    return {
        "p1": cfg.p1, "p2": cfg.p2, "k1": cfg.k1, "k2": cfg.k2, "T": cfg.T,
        "delta1": cfg.delta1, "delta2": cfg.delta2, "h0": cell.h0,
        "factor_model": type(factors).__name__,
        "noise_scale": cfg.noise.scale,
    }


def _aggregate(cell: StudyCell, rows: list[dict]) -> CellResult:
    n = len(rows)
    summaries: dict[str, MetricSummary] = {}
    for name in cell.metrics:
        if name in RANK_METRICS:
            continue
        values = [rows[r][name] for r in range(n)]
        mean = math.fsum(values) / n
        sd = None
        if n >= 2:
            sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
        summaries[name] = MetricSummary(mean=mean, sd=sd, n=n)
    freq_mat: dict[tuple[int, int], float] = {}
    freq_vec: dict[int, float] = {}
    if "ranks_mat" in cell.metrics:
        for r in range(n):
            key = tuple(rows[r]["ranks_mat"])
            freq_mat[key] = freq_mat.get(key, 0.0) + 1.0
        freq_mat = {k: v / n for k, v in sorted(freq_mat.items())}
    if "rank_vec" in cell.metrics:
        for r in range(n):
            key = int(rows[r]["rank_vec"])
            freq_vec[key] = freq_vec.get(key, 0.0) + 1.0
        freq_vec = {k: v / n for k, v in sorted(freq_vec.items())}
    return CellResult(
        label=cell.label, params=_cell_params(cell), replicates=n,
        metrics=summaries, rank_freq_mat=freq_mat, rank_freq_vec=freq_vec,
    )


def run_study(cells: list[StudyCell], master_seed: int = 0,
              workers: int | None = None) -> StudyReport:
    """Run every cell's replicates and aggregate.

    Replicate ``rep`` of cell ``ci`` always uses the substream seeded by
    ``(master_seed, ci, rep)``; results are therefore independent of the
    worker count and of scheduling order.
    """
    cells = list(cells)
    jobs = []
    for ci, cell in enumerate(cells):
        for rep in range(cell.replicates):
            jobs.append((ci, rep, cell.config, cell.h0, cell.metrics,
                         (master_seed, ci, rep)))
    workers = resolve_workers(workers)
    collected: list[list] = [[None] * cell.replicates for cell in cells]
    if workers == 1 or len(jobs) <= 1:
        for job in jobs:
            ci, rep, row = _run_job(job)
            collected[ci][rep] = row
    else:
        chunk = max(1, len(jobs) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for ci, rep, row in pool.map(_run_job, jobs, chunksize=chunk):
                collected[ci][rep] = row
    results = [_aggregate(cell, collected[ci]) for ci, cell in enumerate(cells)]
    return StudyReport(master_seed=master_seed, cells=results)
