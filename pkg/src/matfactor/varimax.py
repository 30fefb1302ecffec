"""Varimax rotation by iterated pairwise plane rotations.

Rotating an estimated loading basis by an orthogonal matrix leaves its span
(and therefore the model fit) unchanged, but a varimax-optimal rotation
concentrates each column's weight on few rows, which is the form people
read.  The criterion maximized is the summed per-column variance of squared
loadings.

The classical pairwise scheme is used: for every column pair the closed-form
optimal plane rotation is applied, and full sweeps repeat until the
criterion's relative change drops below ``tol`` (or ``max_sweeps`` is hit).
"""

from __future__ import annotations

import numpy as np

__all__ = ["varimax", "varimax_criterion"]


def varimax_criterion(loadings: np.ndarray) -> float:
    """Summed per-column variance of squared loadings (population form, 1/p)."""
    L2 = np.asarray(loadings, dtype=np.float64) ** 2
    return float(np.sum(L2.var(axis=0)))


def varimax(loadings: np.ndarray, kaiser: bool = False, tol: float = 1e-8,
            max_sweeps: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Rotate columns of ``loadings`` toward a varimax-optimal orientation.

    Parameters
    ----------
    loadings : ndarray
        p x k matrix; k = 1 returns the input unchanged.
    kaiser : bool
        If True, rows are scaled to unit length before rotating and scaled
        back afterwards (Kaiser normalization).  Zero rows are left alone.
    tol : float
        Relative criterion change below which iteration stops.
    max_sweeps : int
        Hard cap on full sweeps over all column pairs.

    Returns
    -------
    (rotated, rotation)
        ``rotated = loadings @ rotation`` with ``rotation`` orthogonal.
    """
    L = np.array(loadings, dtype=np.float64)
    if L.ndim != 2:
        raise ValueError(f"loadings must be 2-d, got shape {L.shape}")
    p, k = L.shape
    rotation = np.eye(k)
    if k < 2:
        return L, rotation

    row_scale = None
    if kaiser:
        row_scale = np.sqrt((L * L).sum(axis=1))
        row_scale[row_scale == 0.0] = 1.0
        L = L / row_scale[:, None]

    crit_prev = varimax_criterion(L)
    for _ in range(max_sweeps):
        for i in range(k - 1):
            for j in range(i + 1, k):
                x = L[:, i]
                y = L[:, j]
                u = x * x - y * y
                v = 2.0 * x * y
                A = u.sum()
                B = v.sum()
                C = (u * u - v * v).sum()
                D = 2.0 * (u * v).sum()
                num = D - 2.0 * A * B / p
                den = C - (A * A - B * B) / p
                if num == 0.0 and den == 0.0:
                    continue
                theta = 0.25 * np.arctan2(num, den)
                if theta == 0.0:
                    continue
                c, s = np.cos(theta), np.sin(theta)
                g = np.array([[c, -s], [s, c]])
                L[:, (i, j)] = L[:, (i, j)] @ g
                rotation[:, (i, j)] = rotation[:, (i, j)] @ g
        crit = varimax_criterion(L)
        if abs(crit - crit_prev) <= tol * max(abs(crit_prev), 1e-300):
            break
        crit_prev = crit

    if kaiser:
        L = L * row_scale[:, None]
    return L, rotation
