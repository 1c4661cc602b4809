"""Closed forms for the Gaussian prior with a shared eigenbasis.

Everything decouples mode by mode.  With ``p_j = lambda_j / mu_j`` and
``q_j = mu_j / sigma_B**2`` (0 on unobserved modes) most time-dependent
formulas involve ``1 + (e^t - 1) p_j (1 + q_j)``.  We carry the reciprocal
``r_j = 1 / (p_j (1 + q_j))`` instead, which is 0 on noiselessly observed
modes, so the sigma_B = 0 limits fall out without dividing by zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .spectral import CovarianceSpectrum


@dataclass(frozen=True)
class ObservationModel:
    """Noisy observation of a subset of modes.

    ``observed_indices`` are 1-based mode numbers.  ``sigma_B`` is either one
    noise level shared by all observations (``C_B = sigma_B**2 I``) or one
    level per observed index (diagonal ``C_B``).  Zero noise on a mode is the
    noiseless regime for that mode.
    """

    observed_indices: tuple[int, ...]
    sigma_B: float | tuple[float, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.observed_indices)
        if len(set(idx)) != len(idx):
            raise ValueError(f"observed indices must be distinct, got {idx}")
        if any(i < 1 for i in idx):
            raise ValueError("observed indices are 1-based mode numbers")
        sig = np.asarray(self.sigma_B, dtype=float)
        if sig.ndim == 0:
            sig_val = float(sig)
        elif sig.shape == (len(idx),):
            sig_val = tuple(float(v) for v in sig)
        else:
            raise ValueError("sigma_B must be a scalar or one value per observed index")
        if not np.all(np.isfinite(sig)) or np.any(sig < 0):
            raise ValueError(f"sigma_B must be finite and >= 0, got {self.sigma_B}")
        object.__setattr__(self, "observed_indices", idx)
        object.__setattr__(self, "sigma_B", sig_val)

    @property
    def sigmas(self) -> np.ndarray:
        """Noise level of each observation, aligned with ``observed_indices``."""
        return np.broadcast_to(np.asarray(self.sigma_B, dtype=float), (len(self.observed_indices),)).copy()

    @property
    def noiseless(self) -> bool:
        """True when some observed mode is seen without noise."""
        return bool(np.any(self.sigmas == 0.0))

    def mask(self, D: int) -> np.ndarray:
        if any(i > D for i in self.observed_indices):
            raise ValueError(f"observed index out of range for D={D}")
        m = np.zeros(D, dtype=bool)
        m[[i - 1 for i in self.observed_indices]] = True
        return m

    def noise_sd(self, D: int) -> np.ndarray:
        """Per-mode noise level, 0 on unobserved modes."""
        sd = np.zeros(D)
        sd[[i - 1 for i in self.observed_indices]] = self.sigmas
        return sd

    def observe(self, x0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Mode-space observation ``y``: observed modes plus noise, zeros elsewhere."""
        x0 = np.asarray(x0, dtype=float)
        D = x0.shape[-1]
        m = self.mask(D)
        y = np.zeros_like(x0)
        noise = rng.standard_normal(x0.shape[:-1] + (int(m.sum()),))
        y[..., m] = x0[..., m] + self.noise_sd(D)[m] * noise
        return y


@dataclass(frozen=True)
class ProblemSpec:
    prior: CovarianceSpectrum
    diffusion: CovarianceSpectrum
    obs: ObservationModel
    horizon_T: float

    def __post_init__(self):
        if self.prior.D != self.diffusion.D:
            raise ValueError("prior and diffusion spectra must share the truncation level")
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be positive")
        self.obs.mask(self.D)

    @property
    def D(self) -> int:
        return self.prior.D

    @property
    def mu(self) -> np.ndarray:
        return self.prior.eigenvalues

    @property
    def lam(self) -> np.ndarray:
        return self.diffusion.eigenvalues

    @property
    def observed(self) -> np.ndarray:
        return self.obs.mask(self.D)

    @property
    def p(self) -> np.ndarray:
        return self.lam / self.mu

    @property
    def q(self) -> np.ndarray:
        """``mu_j / sigma_j**2`` on observed modes (``inf`` when noiseless), else 0."""
        sd = self.obs.noise_sd(self.D)
        q = np.zeros(self.D)
        obs = self.observed
        with np.errstate(divide="ignore"):
            q[obs] = self.mu[obs] / sd[obs] ** 2
        return q

    @property
    def gain(self) -> np.ndarray:
        """``q / (1 + q)``: weight of the observation in the posterior mean."""
        q = self.q
        with np.errstate(invalid="ignore"):
            g = q / (1.0 + q)
        return np.where(np.isinf(q), 1.0, g)

    @property
    def post_var(self) -> np.ndarray:
        """``mu / (1 + q)``: posterior variance of each mode of X_0."""
        return self.mu * (1.0 - self.gain)

    @property
    def inv_rate(self) -> np.ndarray:
        """``1 / (p (1 + q))``, zero on noiselessly observed modes."""
        return self.post_var / self.lam

    def replace(self, **kw) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class ScoreCoeffs:
    """Per-mode linear score ``S_j(t, x, y) = a_j x_j + b_j y_j``."""

    a: np.ndarray
    b: np.ndarray
    t: float


@dataclass(frozen=True)
class ModeMoments:
    mean: np.ndarray
    variance: np.ndarray


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError(f"time must be > 0 (the score is singular at t = 0), got {t}")
    return t


def _observed_y(p: ProblemSpec, y) -> np.ndarray:
    # unobserved components of y carry no information and are ignored
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != p.D:
        raise ValueError(f"y has {y.shape[-1]} modes, problem has {p.D}")
    return np.where(p.observed, y, 0.0)


def posterior_moments(p: ProblemSpec, y) -> ModeMoments:
    y = _observed_y(p, y)
    return ModeMoments(p.gain * y, p.post_var.copy())


def general_posterior(prior: CovarianceSpectrum, A, C_B, y):
    """Posterior ``N(M y, C_o)`` for ``Y = A X_0 + B`` on the truncated space."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C_B = np.atleast_2d(np.asarray(C_B, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n, D = A.shape
    if D != prior.D or C_B.shape != (n, n) or y.shape != (n,):
        raise ValueError("inconsistent shapes for A, C_B, y")
    Cmu = np.diag(prior.eigenvalues)
    CAt = Cmu @ A.T
    G = A @ CAt + C_B
    try:
        cho = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError("A C_mu A^T + C_B is singular or not positive definite") from err
    # M_o = C_mu A^T G^{-1}, applied through the Cholesky factor
    W = np.linalg.solve(cho, CAt.T)  # L^{-1} A C_mu
    mean = W.T @ np.linalg.solve(cho, y)
    cov = Cmu - W.T @ W
    return mean, 0.5 * (cov + cov.T)


def marginal_t_moments(p: ProblemSpec, y, t: float) -> ModeMoments:
    """Law of ``X_t | Y = y`` per mode."""
    if t < 0:
        raise ValueError("t must be >= 0")
    y = _observed_y(p, y)
    mean = np.exp(-t / 2) * p.gain * y
    var = p.post_var * np.exp(-t) - p.lam * np.expm1(-t)
    return ModeMoments(mean, var)


def score_coeffs(p: ProblemSpec, t: float) -> ScoreCoeffs:
    t = float(_check_time(t))
    denom = p.inv_rate + np.expm1(t)
    a = -np.exp(t) / denom
    b = np.exp(t / 2) * p.gain / denom
    return ScoreCoeffs(a, b, t)


def drift_coeffs(p: ProblemSpec, t: float):
    """Reverse-drift coefficients ``(mu_x, mu_y)`` at forward time ``t``."""
    c = score_coeffs(p, t)
    return 0.5 + c.a, c.b


def score_norm_expected(
    p: ProblemSpec, t, variant: Literal["conditional", "unconditional", "noiseless"] = "conditional"
):
    """Expected squared Hilbert norm of the score along ``X_t | Y = y``.

    Works elementwise over an array of times.
    """
    t = _check_time(t)
    if variant == "conditional":
        r = p.inv_rate
    elif variant == "unconditional":
        r = p.mu / p.lam
    elif variant == "noiseless":
        r = np.where(p.observed, 0.0, p.mu / p.lam)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    tt = t[..., None]
    terms = np.exp(tt) * p.lam / (r + np.expm1(tt))
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def crude_bound(p: ProblemSpec, t):
    t = _check_time(t)
    out = p.diffusion.trace / -np.expm1(-t)
    return float(out) if out.ndim == 0 else out


def reverse_moments(p: ProblemSpec, y, init: ModeMoments) -> ModeMoments:
    """Moments of ``Z_T`` for the linear reverse SDE started from ``init``."""
    y = _observed_y(p, y)
    T = p.horizon_T
    r = p.inv_rate
    inv_d = r / (r + np.expm1(T))
    var = np.asarray(init.variance) * np.exp(T) * inv_d**2 + p.post_var * (1.0 - inv_d)
    mean = np.asarray(init.mean) * np.exp(T / 2) * inv_d + p.gain * y * (1.0 - inv_d)
    return ModeMoments(mean, var)


def exact_start_moments(p: ProblemSpec, y) -> ModeMoments:
    """Law of ``X_T | Y = y``, the correct reverse-SDE initialization."""
    return marginal_t_moments(p, y, p.horizon_T)


def invariant_moments(p: ProblemSpec) -> ModeMoments:
    return ModeMoments(np.zeros(p.D), p.lam.copy())


def prop3_bound(p: ProblemSpec, K: float, L: float) -> float:
    """Uniform-in-time bound on the expected squared score norm for the
    separable bounded-Lipschitz prior class."""
    if K < 1 or L < 0:
        raise ValueError("need K >= 1 and L >= 0")
    if p.obs.noiseless:
        raise ValueError("bound not applicable: noiseless regime (p(1+q) unbounded)")
    T = p.horizon_T
    lam = p.lam
    rate = 1.0 / p.inv_rate
    eT = np.exp(T)
    terms = lam * eT * (K**4 * rate + 2 * lam * eT * (L * K) ** 2 * (1 + 3 * (rate * np.expm1(T)) ** 4))
    return float(2 * terms.sum())
