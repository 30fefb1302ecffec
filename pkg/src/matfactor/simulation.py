"""Synthetic data generation for matrix factor models.

Draws series X_t = R F_t C' + E_t where

* R, C have i.i.d. uniform entries on (-p^(-delta/2), p^(-delta/2)); delta
  controls factor strength (0 = strong, larger = weaker),
* the k1*k2 factor processes are independent AR(1) or MA(2) series with
  standard normal innovations,
* vec(E_t) is i.i.d. normal with a Kronecker covariance built from two
  equicorrelation matrices, realized as E_t = G1 W_t G2 with G_i the
  symmetric square roots and W_t an i.i.d. standard normal matrix.

All randomness flows through one numpy Generator seeded from the config, so
an identical config reproduces the draw bit for bit on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import DimensionMismatch, NotSPD, UnstableAR
from .series import MatrixSeries

__all__ = [
    "AR1Spec",
    "MA2Spec",
    "KroneckerNoise",
    "SimConfig",
    "SimTruth",
    "DEFAULT_AR_GRID",
    "gen_loadings",
    "gen_factors",
    "gen_noise",
    "simulate",
]

# AR(1) coefficient grid used throughout the bundled 3 x 2 study designs.
DEFAULT_AR_GRID = np.array([[-0.5, 0.6], [0.8, -0.4], [0.7, 0.3]])


@dataclass(frozen=True)
class AR1Spec:
    """Independent AR(1) factor processes, one coefficient per factor cell.

    ``phi`` is a scalar (shared by every cell) or a k1 x k2 array.  Every
    coefficient must have modulus < 1; innovations are standard normal and
    are not variance-normalized, so a cell's stationary variance is
    1 / (1 - phi^2).
    """

    phi: float | np.ndarray = 0.5

    def coeff_grid(self, k1: int, k2: int) -> np.ndarray:
        phi = np.asarray(self.phi, dtype=np.float64)
        if phi.ndim == 0:
            phi = np.full((k1, k2), float(phi))
        if phi.shape != (k1, k2):
            raise DimensionMismatch(
                f"AR coefficient grid has shape {phi.shape}, expected ({k1}, {k2})",
                shape=list(phi.shape), k1=k1, k2=k2,
            )
        if np.any(np.abs(phi) >= 1.0):
            bad = float(phi.flat[int(np.argmax(np.abs(phi)))])
            raise UnstableAR(
                f"AR(1) coefficient {bad} has modulus >= 1", phi=bad,
            )
        return phi


@dataclass(frozen=True)
class MA2Spec:
    """Independent MA(2) factor processes f_t = e_t + theta1 e_{t-1} + theta2 e_{t-2}."""

    theta1: float = 0.0
    theta2: float = 0.9


@dataclass(frozen=True)
class KroneckerNoise:
    """Noise law vec(E_t) ~ N(0, scale^2 * (Gamma2 kron Gamma1)).

    Gamma1 (p1 x p1) has ``diag_rows`` on the diagonal and ``off_rows``
    elsewhere; Gamma2 likewise with the column parameters.  ``scale = 0``
    turns noise off entirely.
    """

    diag_rows: float = 1.0
    off_rows: float = 0.2
    diag_cols: float = 1.0
    off_cols: float = 0.2
    scale: float = 1.0

    def gamma_rows(self, p1: int) -> np.ndarray:
        return _equicorrelation(p1, self.diag_rows, self.off_rows)

    def gamma_cols(self, p2: int) -> np.ndarray:
        return _equicorrelation(p2, self.diag_cols, self.off_cols)


def _equicorrelation(p: int, diag: float, off: float) -> np.ndarray:
    g = np.full((p, p), off)
    np.fill_diagonal(g, diag)
    return g


def _spd_sqrt(g: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(g)
    if w[0] <= 0.0:
        raise NotSPD(
            f"noise covariance factor has minimum eigenvalue {w[0]:.3e}",
            min_eigenvalue=float(w[0]),
        )
    return (v * np.sqrt(w)) @ v.T


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one synthetic draw.

    ``seed`` may be an int or a tuple of ints (tuples give cheap independent
    substreams, e.g. ``(master_seed, replicate)``).  ``burn_in`` presample
    steps are discarded from each AR factor path; MA paths use exactly two
    presample innovations instead.
    """

    p1: int
    p2: int
    k1: int
    k2: int
    T: int
    delta1: float = 0.0
    delta2: float = 0.0
    factors: AR1Spec | MA2Spec = field(default_factory=AR1Spec)
    noise: KroneckerNoise = field(default_factory=KroneckerNoise)
    burn_in: int = 100
    seed: int | tuple[int, ...] = 0
    retain_noise: bool = False

    def __post_init__(self):
        if min(self.p1, self.p2, self.k1, self.k2, self.T) < 1:
            raise DimensionMismatch(
                "p1, p2, k1, k2 and T must all be >= 1",
                p1=self.p1, p2=self.p2, k1=self.k1, k2=self.k2, T=self.T,
            )
        if self.k1 > self.p1 or self.k2 > self.p2:
            raise DimensionMismatch(
                f"ranks ({self.k1}, {self.k2}) exceed panel dims "
                f"({self.p1}, {self.p2})",
                k1=self.k1, k2=self.k2, p1=self.p1, p2=self.p2,
            )
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")


@dataclass(frozen=True)
class SimTruth:
    """Ground truth retained from a draw: loadings, factors, signal, noise."""

    r: np.ndarray
    c: np.ndarray
    factors: np.ndarray
    signal: np.ndarray
    noise: np.ndarray | None = None

    def row_basis(self) -> np.ndarray:
        """Orthonormal basis of span(R) (distances ignore the basis choice)."""
        return np.linalg.qr(self.r)[0]

    def col_basis(self) -> np.ndarray:
        return np.linalg.qr(self.c)[0]


def gen_loadings(p: int, k: int, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Draw a p x k loading matrix with i.i.d. U(-p^(-delta/2), p^(-delta/2)) entries."""
    half_width = p ** (-delta / 2.0)
    return rng.uniform(-half_width, half_width, size=(p, k))


def gen_factors(spec: AR1Spec | MA2Spec, k1: int, k2: int, T: int,
                burn_in: int, rng: np.random.Generator) -> np.ndarray:
    """Draw (T, k1, k2) factor paths of independent linear processes."""
    if isinstance(spec, AR1Spec):
        phi = spec.coeff_grid(k1, k2)
        e = rng.standard_normal((k1, k2, burn_in + T))
        f = np.empty((k1, k2, T))
        for i in range(k1):
            for j in range(k2):
                path = lfilter([1.0], [1.0, -phi[i, j]], e[i, j])
                f[i, j] = path[burn_in:]
        return np.ascontiguousarray(f.transpose(2, 0, 1))
    if isinstance(spec, MA2Spec):
        e = rng.standard_normal((k1, k2, T + 2))
        f = np.empty((k1, k2, T))
        taps = [1.0, spec.theta1, spec.theta2]
        for i in range(k1):
            for j in range(k2):
                # Two presample innovations make the MA(2) exact from t=1 on.
                f[i, j] = lfilter(taps, [1.0], e[i, j])[2:]
        return np.ascontiguousarray(f.transpose(2, 0, 1))
    raise TypeError(f"unknown factor spec type: {type(spec).__name__}")


def gen_noise(noise: KroneckerNoise, p1: int, p2: int, T: int,
              rng: np.random.Generator) -> np.ndarray:
    """Draw (T, p1, p2) noise with Kronecker covariance.

    A zero ``scale`` returns zeros without consuming any random variates.
    """
    if noise.scale == 0.0:
        return np.zeros((T, p1, p2))
    g1 = _spd_sqrt(noise.gamma_rows(p1))
    g2 = _spd_sqrt(noise.gamma_cols(p2))
    w = rng.standard_normal((T, p1, p2))
    return noise.scale * np.matmul(g1, np.matmul(w, g2))


def simulate(config: SimConfig) -> tuple[MatrixSeries, SimTruth]:
    """Draw one series and its ground truth from ``config``.

    Draw order is fixed (row loadings, column loadings, factors, noise), so
    identical configs give bit-identical output.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    r = gen_loadings(config.p1, config.k1, config.delta1, rng)
    c = gen_loadings(config.p2, config.k2, config.delta2, rng)
    f = gen_factors(config.factors, config.k1, config.k2, config.T,
                    config.burn_in, rng)
    e = gen_noise(config.noise, config.p1, config.p2, config.T, rng)
    signal = np.matmul(np.matmul(r, f), c.T)
    series = MatrixSeries(signal + e)
    truth = SimTruth(r=r, c=c, factors=f, signal=signal,
                     noise=e if config.retain_noise else None)
    return series, truth
