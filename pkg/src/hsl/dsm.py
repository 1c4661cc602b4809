"""Conditional denoising score matching in mode coordinates.

For the Gaussian prior the true conditional score is linear in
``(x_t^(j), y^(j))`` for each mode, so ordinary least squares of the DSM
target on those two regressors within a narrow time bin recovers the score
coefficients.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gaussian import ProblemSpec

MIN_BIN_SAMPLES = 100


def dsm_target(x0, xt, t):
    """``-(x_t - e^{-t/2} x_0) / (1 - e^{-t})``; ``t`` broadcasts over rows."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("t must be > 0")
    x0 = np.asarray(x0, dtype=float)
    xt = np.asarray(xt, dtype=float)
    if t.ndim == 1 and xt.ndim == 2:
        t = t[:, None]
    return -(xt - np.exp(-t / 2) * x0) / -np.expm1(-t)


@dataclass(frozen=True)
class DsmSample:
    t: float
    x0: np.ndarray
    xt: np.ndarray
    y: np.ndarray


@dataclass
class DsmDataset:
    """Column storage for DSM tuples; indexing yields ``DsmSample``."""

    t: np.ndarray
    x0: np.ndarray
    xt: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.t.shape[0]

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return DsmSample(float(self.t[i]), self.x0[i], self.xt[i], self.y[i])
        return DsmDataset(self.t[i], self.x0[i], self.xt[i], self.y[i])

    @property
    def targets(self) -> np.ndarray:
        return dsm_target(self.x0, self.xt, self.t)

    def to_csv(self, path) -> None:
        """One row per (sample, mode) with header ``t,mode,x0,xt,y``."""
        n, D = self.x0.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mode", "x0", "xt", "y"])
            for i in range(n):
                for j in range(D):
                    w.writerow([f"{self.t[i]:.17g}", j + 1, f"{self.x0[i, j]:.17g}", f"{self.xt[i, j]:.17g}", f"{self.y[i, j]:.17g}"])


def gaussian_sampler(p: ProblemSpec) -> Callable:
    def draw(rng, n):
        return np.sqrt(p.mu) * rng.standard_normal((n, p.D))

    return draw


def make_dsm_dataset(
    p: ProblemSpec,
    n: int,
    rng: np.random.Generator,
    t_floor: float = 1e-3,
    prior_sampler: Callable | None = None,
) -> DsmDataset:
    """Draw ``(x0, y)`` jointly, ``t ~ U(t_floor, T)`` and ``x_t | x0`` exactly.

    ``prior_sampler(rng, n)`` returns ``(n, D)`` prior draws of ``x0``
    (Gaussian ``N(0, C_mu)`` by default); ``y`` comes from the observation
    model.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < t_floor < p.horizon_T:
        raise ValueError("t_floor must lie in (0, T)")
    draw = prior_sampler or gaussian_sampler(p)
    x0 = np.asarray(draw(rng, n), dtype=float)
    y = p.obs.observe(x0, rng)
    t = rng.uniform(t_floor, p.horizon_T, size=n)
    sd = np.sqrt(-p.lam * np.expm1(-t)[:, None])
    xt = np.exp(-t / 2)[:, None] * x0 + sd * rng.standard_normal(x0.shape)
    return DsmDataset(t, x0, xt, y)


@dataclass(frozen=True)
class LinearFit:
    a: float
    b: float
    se_a: float
    se_b: float
    n: int


def fit_linear_score(dataset: DsmDataset, mode: int, t_bin: tuple[float, float], observed: bool = True) -> LinearFit:
    """OLS of the mode-``mode`` (0-based) DSM target on ``(x_t, y)`` within a time bin.

    Standard errors are heteroscedasticity-robust (HC0), since the target
    variance changes with ``t`` across the bin.  For unobserved modes ``b``
    is pinned to 0.
    """
    lo, hi = t_bin
    sel = (dataset.t >= lo) & (dataset.t < hi)
    n = int(sel.sum())
    if n < MIN_BIN_SAMPLES:
        raise ValueError(f"only {n} samples in bin [{lo}, {hi}); need {MIN_BIN_SAMPLES}")
    tt = dataset.t[sel]
    target = dsm_target(dataset.x0[sel, mode], dataset.xt[sel, mode], tt)
    xt = dataset.xt[sel, mode]
    yv = dataset.y[sel, mode]
    use_y = observed and np.any(yv != 0)
    X = np.column_stack([xt, yv]) if use_y else xt[:, None]
    G = X.T @ X
    if np.linalg.cond(G) > 1e12:
        if not np.any(target):
            return LinearFit(0.0, 0.0, 0.0, 0.0, n)
        raise np.linalg.LinAlgError("singular regressor Gram matrix")
    Ginv = np.linalg.inv(G)
    beta = Ginv @ (X.T @ target)
    resid = target - X @ beta
    meat = (X * resid[:, None] ** 2).T @ X
    cov = Ginv @ meat @ Ginv
    se = np.sqrt(np.diag(cov))
    if use_y:
        return LinearFit(float(beta[0]), float(beta[1]), float(se[0]), float(se[1]), n)
    return LinearFit(float(beta[0]), 0.0, float(se[0]), 0.0, n)


def time_bins(t_floor: float, T: float, n_bins: int = 8) -> np.ndarray:
    return np.linspace(t_floor, T, n_bins + 1)


def dsm_loss(model: Callable, batch: DsmDataset) -> float:
    """Mean over the batch of the squared residual norm.

    ``model(t, xt, y)`` takes ``t`` of shape ``(n,)`` and states ``(n, D)``.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    resid = batch.targets - model(batch.t, batch.xt, batch.y)
    return float(np.mean(np.sum(resid**2, axis=1)))


def linear_model(a: np.ndarray, b: np.ndarray) -> Callable:
    """Score model with fixed per-mode coefficients (for loss comparisons)."""

    def model(t, xt, y):
        return a * xt + b * y

    return model


def analytic_model(p: ProblemSpec) -> Callable:
    """The exact Gaussian score, vectorized over per-sample times."""

    def model(t, xt, y):
        t = np.asarray(t, dtype=float)[:, None]
        denom = p.inv_rate + np.expm1(t)
        a = -np.exp(t) / denom
        b = np.exp(t / 2) * p.gain / denom
        return a * xt + b * np.where(p.observed, y, 0.0)

    return model
