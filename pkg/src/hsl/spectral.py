"""Truncated Karhunen-Loeve representation in a fixed cosine eigenbasis.

Functions on an interval ``[s_min, s_max]`` are stored as coefficient vectors
(plain 1-D float arrays, one entry per eigenmode).  The basis is

    v_j(s) = sqrt(2 / L) * cos(j * pi * (s - s_min) / L),   j = 1..D,

with ``L = s_max - s_min``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

DecayKind = Literal["polynomial", "exponential", "flat"]


@dataclass(frozen=True)
class CovarianceSpectrum:
    """Eigenvalues of a trace-class covariance operator in the shared basis."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float).copy()
        if ev.ndim != 1 or ev.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(ev)) or np.any(ev <= 0):
            raise ValueError("eigenvalues must be finite and strictly positive")
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def D(self) -> int:
        return self.eigenvalues.size

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())

    def __len__(self):
        return self.D


def build_spectrum(kind: DecayKind, D: int, param: float = 1.0) -> CovarianceSpectrum:
    """Eigenvalues from a decay law.

    ``polynomial`` gives ``j**-param`` (requires ``param > 1`` so the
    untruncated tail is summable), ``exponential`` gives ``exp(-param * j)``
    with ``param > 0``, ``flat`` gives the constant ``param > 0``.
    """
    if int(D) != D or D < 1:
        raise ValueError(f"truncation level D must be a positive integer, got {D!r}")
    j = np.arange(1, int(D) + 1, dtype=float)
    if kind == "polynomial":
        if param <= 1:
            raise ValueError(f"polynomial decay needs alpha > 1 for a finite trace, got {param}")
        ev = j ** (-float(param))
    elif kind == "exponential":
        if param <= 0:
            raise ValueError(f"exponential decay needs gamma > 0, got {param}")
        ev = np.exp(-float(param) * j)
    elif kind == "flat":
        if param <= 0:
            raise ValueError(f"flat spectrum needs a positive level, got {param}")
        ev = np.full(int(D), float(param))
    else:
        raise ValueError(f"unknown decay law {kind!r}")
    return CovarianceSpectrum(ev)


def sample_gaussian(spectrum: CovarianceSpectrum, mean, rng: np.random.Generator, size=None) -> np.ndarray:
    """KL draw ``mean_j + sqrt(eigenvalue_j) * xi_j``; ``size`` adds leading batch axes."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape[-1:] != (spectrum.D,):
        raise ValueError(f"mean has {mean.shape[-1:]} modes, spectrum has {spectrum.D}")
    shape = (spectrum.D,) if size is None else tuple(np.atleast_1d(size)) + (spectrum.D,)
    xi = rng.standard_normal(shape)
    return mean + np.sqrt(spectrum.eigenvalues) * xi


@dataclass(frozen=True)
class Grid:
    """Strictly increasing sample locations inside ``[s_min, s_max]``.

    The domain defaults to the hull of the points.
    """

    points: np.ndarray
    s_min: float | None = None
    s_max: float | None = None
    _uniform: bool = field(init=False, repr=False, default=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).copy()
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least 2 points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        lo = pts[0] if self.s_min is None else float(self.s_min)
        hi = pts[-1] if self.s_max is None else float(self.s_max)
        if lo > pts[0] or hi < pts[-1] or hi <= lo:
            raise ValueError(f"points must lie in [{lo}, {hi}]")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "s_min", float(lo))
        object.__setattr__(self, "s_max", float(hi))
        d = np.diff(pts)
        uniform = (
            np.allclose(d, d[0], rtol=1e-10, atol=0.0)
            and np.isclose(pts[0], lo, rtol=0, atol=1e-12 * (hi - lo))
            and np.isclose(pts[-1], hi, rtol=0, atol=1e-12 * (hi - lo))
        )
        object.__setattr__(self, "_uniform", bool(uniform))

    @classmethod
    def uniform(cls, s_min: float, s_max: float, n: int) -> "Grid":
        return cls(np.linspace(s_min, s_max, n), s_min, s_max)

    @property
    def N(self) -> int:
        return self.points.size

    @property
    def length(self) -> float:
        return self.s_max - self.s_min

    @property
    def is_uniform(self) -> bool:
        """True when the points are equispaced and include both domain ends."""
        return self._uniform

    def trapezoid_weights(self) -> np.ndarray:
        d = np.diff(self.points)
        w = np.zeros(self.N)
        w[:-1] += d / 2
        w[1:] += d / 2
        return w


def basis_matrix(grid: Grid, D: int) -> np.ndarray:
    """``(N, D)`` matrix with entry ``[n, j-1] = v_j(s_n)``."""
    L = grid.length
    j = np.arange(1, D + 1)
    phase = np.pi * np.outer(grid.points - grid.s_min, j) / L
    return np.sqrt(2.0 / L) * np.cos(phase)


def evaluate_on_grid(v, grid: Grid) -> np.ndarray:
    """Sum of ``coeffs_j * v_j(s)`` at each grid point; batch axes allowed in front."""
    v = np.asarray(v, dtype=float)
    return v @ basis_matrix(grid, v.shape[-1]).T


def project_to_modes(values, grid: Grid, D: int) -> np.ndarray:
    """Project grid values onto the first ``D`` basis functions.

    Uniform grids with ``D <= N - 2`` use trapezoid quadrature, which is exact
    there by the discrete orthogonality of the cosines; anything else falls
    back to least squares.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.N:
        raise ValueError(f"got {values.shape[-1]} values for a grid of {grid.N} points")
    if grid.N < D:
        raise ValueError(f"cannot project {grid.N} samples onto {D} modes (rank deficient)")
    B = basis_matrix(grid, D)
    if grid.is_uniform and D <= grid.N - 2:
        return (values * grid.trapezoid_weights()) @ B
    flat = values.reshape(-1, grid.N).T
    coef, *_ = np.linalg.lstsq(B, flat, rcond=None)
    return coef.T.reshape(values.shape[:-1] + (D,))
