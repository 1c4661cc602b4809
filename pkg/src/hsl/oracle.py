"""Brute-force conditional score for separable non-Gaussian priors.

The posterior of mode ``j`` given ``Y = y`` is the Gaussian posterior
``N(x_y, mu_y)`` reweighted by a factor ``psi_j(x0, y_j)``.  Conditioning on
``X_t = x`` then multiplies by the transition density, and the conditional
mean is a one-dimensional integral that we evaluate by the trapezoid rule in
log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gaussian import ProblemSpec


_CHUNK = 4096
MAX_RECENTERINGS = 12


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    n_nodes: int = 801
    half_width: float = 10.0

    def __post_init__(self):
        if self.n_nodes < 51 or self.n_nodes % 2 == 0:
            raise ValueError("n_nodes must be odd and >= 51")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")


@dataclass
class SeparablePrior:
    """Per-mode reweighting factors with declared bounds.

    ``psi[j](x0, y_j)`` must accept numpy arrays.  ``log_psi`` may be given
    instead of (or alongside) ``psi`` when the factor is easier to express in
    log form.
    """

    psi: Sequence[Callable] | None
    K: float = 1.0
    L: float = 0.0
    log_psi: Sequence[Callable] | None = field(default=None)

    def __post_init__(self):
        if self.psi is None and self.log_psi is None:
            raise ValueError("give psi or log_psi")
        if self.K < 1 or self.L < 0:
            raise ValueError("need K >= 1 and L >= 0")

    def __len__(self):
        return len(self.psi if self.psi is not None else self.log_psi)

    def log_factor(self, j: int, x0, y_j):
        if self.log_psi is not None:
            return np.asarray(self.log_psi[j](x0, y_j), dtype=float)
        return np.log(np.asarray(self.psi[j](x0, y_j), dtype=float))

    def check_bounds(self, xs, ys, j: int | None = None) -> tuple[bool, bool]:
        """Spot-check ``1/K <= psi <= K`` and the Lipschitz bound on a lattice.

        Returns ``(bounded, lipschitz)``.
        """
        xs = np.sort(np.asarray(xs, dtype=float))
        modes = range(len(self)) if j is None else [j]
        bounded = lipschitz = True
        for m in modes:
            for yv in np.atleast_1d(ys):
                v = np.exp(self.log_factor(m, xs, yv))
                bounded &= bool(np.all(v >= 1 / self.K - 1e-12) and np.all(v <= self.K + 1e-12))
                slope = np.abs(np.diff(v)) / np.diff(xs)
                lipschitz &= bool(np.all(slope <= self.L + 1e-9))
        return bounded, lipschitz


def gaussian_prior(D: int) -> SeparablePrior:
    """``psi == 1``: the Gaussian case."""
    zero = lambda x0, y: np.zeros(np.shape(x0))  # noqa: E731
    return SeparablePrior(psi=None, K=1.0, L=0.0, log_psi=[zero] * D)


def _mode_params(p: ProblemSpec, j: int, t: float):
    lam_t = -p.lam[j] * np.expm1(-t)
    return lam_t, p.post_var[j], p.gain[j]


def oracle_conditional_mean(
    p: ProblemSpec,
    prior: SeparablePrior,
    j: int,
    t: float,
    x,
    y_j,
    quad: QuadratureSpec = QuadratureSpec(),
):
    """``E[X_0^(j) | X_t^(j) = x, Y = y]`` by log-space trapezoid quadrature.

    ``j`` is the 0-based mode index; ``x`` and ``y_j`` broadcast.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    x = np.asarray(x, dtype=float)
    y_j = np.asarray(y_j, dtype=float)
    if not p.observed[j]:
        y_j = np.zeros_like(y_j)
    lam_t, var_y, gain = _mode_params(p, j, t)
    mean_y = gain * y_j
    x, mean_y = np.broadcast_arrays(x, mean_y)
    if var_y == 0.0:
        # noiselessly observed mode: X_0 is pinned at y
        return mean_y.copy()

    c = np.exp(-t / 2)
    # Gaussian-case conditional law of X_0 given x: first placement of the nodes
    prec = 1.0 / var_y + c * c / lam_t
    center = (mean_y / var_y + c * x / lam_t) / prec
    scale = np.full(x.shape, np.sqrt(1.0 / prec))
    u = np.linspace(-quad.half_width, quad.half_width, quad.n_nodes)
    ybc = np.broadcast_to(y_j, x.shape)[..., None]

    def integrate(center, scale):
        nodes = center[..., None] + scale[..., None] * u
        logw = (
            -0.5 * (x[..., None] - c * nodes) ** 2 / lam_t
            - 0.5 * (nodes - mean_y[..., None]) ** 2 / var_y
            + prior.log_factor(j, nodes, ybc)
        )
        logw -= logw.max(axis=-1, keepdims=True)
        w = np.exp(logw)
        w[..., 0] *= 0.5
        w[..., -1] *= 0.5
        total = w.sum(axis=-1)
        m1 = (w @ u) / total
        m2 = (w @ (u * u)) / total
        edge = (w[..., 0] + w[..., -1]) / total
        ess = total**2 / (w * w).sum(axis=-1)
        return center + scale * m1, scale * np.sqrt(np.maximum(m2 - m1 * m1, 0.0)), edge, ess

    # The reweighting can move mass far from the Gaussian-case placement.
    # While the end nodes carry weight the truncated moments underestimate
    # the spread, so shift the nodes onto the weighted mean without
    # narrowing them; each pass then moves up to ``half_width`` scales.
    for _ in range(MAX_RECENTERINGS):
        mean, sd, edge, ess = integrate(center, scale)
        if np.all(edge < 1e-15):
            break
        center = mean
        scale = np.maximum(sd, scale)
    else:
        if np.any(edge > 1e-12):
            raise OracleError("posterior mass reaches the quadrature boundary; widen half_width")
    if np.any(ess < 5):
        raise OracleError("quadrature mass concentrated on fewer than 5 nodes; refine the grid")
    return mean


def oracle_score(p, prior, j, t, x, y_j, quad: QuadratureSpec = QuadratureSpec()):
    """Mode-``j`` conditional score from the quadrature conditional mean."""
    m = oracle_conditional_mean(p, prior, j, t, x, y_j, quad)
    return -(np.asarray(x, dtype=float) - np.exp(-t / 2) * m) / -np.expm1(-t)


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    min_ess: float
    reliable: bool


def mc_score_norm(
    p: ProblemSpec,
    prior: SeparablePrior,
    y,
    t: float,
    n_samples: int,
    rng: np.random.Generator,
    quad: QuadratureSpec = QuadratureSpec(),
) -> McEstimate:
    """Monte Carlo estimate of ``E[||S(t, X_t, y)||^2 | Y = y]``.

    ``X_0`` is drawn from the Gaussian posterior and self-normalized
    importance weights ``psi`` correct for the true prior; modes are
    independent so per-mode estimates and variances add up.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    y = np.asarray(y, dtype=float)
    total = var = 0.0
    min_ess = np.inf
    for j in range(p.D):
        lam_t, var_y, gain = _mode_params(p, j, t)
        y_j = y[j] if p.observed[j] else 0.0
        x0 = gain * y_j + np.sqrt(var_y) * rng.standard_normal(n_samples)
        logw = prior.log_factor(j, x0, y_j) if var_y > 0 else np.zeros(n_samples)
        w = np.exp(logw - logw.max())
        xt = np.exp(-t / 2) * x0 + np.sqrt(lam_t) * rng.standard_normal(n_samples)
        s2 = np.concatenate(
            [oracle_score(p, prior, j, t, xt[i : i + _CHUNK], y_j, quad) ** 2 for i in range(0, n_samples, _CHUNK)]
        )
        sw = w.sum()
        est = float(w @ s2 / sw)
        total += est
        var += float((w * w) @ (s2 - est) ** 2 / sw**2)
        min_ess = min(min_ess, sw**2 / float(w @ w))
    return McEstimate(total, float(np.sqrt(var)), float(min_ess), bool(min_ess >= n_samples / 100))


def sinusoidal_prior(D: int) -> SeparablePrior:
    """``psi(x0) = 1.25 + 0.75 sin(x0)``: bounded in ``[1/2, 2]`` and 0.75-Lipschitz,
    so it belongs to the class with ``K = 2, L = 1``."""
    f = lambda x0, y: 1.25 + 0.75 * np.sin(x0)  # noqa: E731
    return SeparablePrior(psi=[f] * D, K=2.0, L=1.0)


@dataclass(frozen=True)
class TwoComponentMixture:
    """Per-mode prior ``w N(-m, v) + (1 - w) N(m, v)``, the same on every mode."""

    weight: float = 0.5
    offset: float = 1.0
    variance: float = 0.25

    def prior(self, p: ProblemSpec) -> SeparablePrior:
        """The mixture as a reweighting of the ``N(0, mu_j)`` Gaussian prior."""

        def make(mu):
            def log_psi(x0, y):
                x0 = np.asarray(x0, dtype=float)
                comp = np.stack(
                    [
                        np.log(self.weight) - 0.5 * (x0 + self.offset) ** 2 / self.variance,
                        np.log1p(-self.weight) - 0.5 * (x0 - self.offset) ** 2 / self.variance,
                    ]
                )
                return np.logaddexp(comp[0], comp[1]) + 0.5 * x0**2 / mu

            return log_psi

        return SeparablePrior(psi=None, K=1.0, L=0.0, log_psi=[make(mu) for mu in p.mu])

    def score(self, p: ProblemSpec, j: int, t: float, x, y_j):
        """Closed-form conditional score of mode ``j`` (0-based), on the same
        scale as ``oracle_score`` (gradient times ``lambda_j``).

        Each component stays Gaussian through the observation and the OU
        transition, so the law of ``X_t`` given ``y`` is a reweighted
        two-component Gaussian mixture.
        """
        x = np.asarray(x, dtype=float)
        y_j = np.asarray(y_j, dtype=float)
        shape = np.broadcast_shapes(x.shape, y_j.shape)
        x = np.broadcast_to(x, shape)
        y = np.broadcast_to(y_j, shape)[None]
        c = np.exp(-t / 2)
        lam_t = -p.lam[j] * np.expm1(-t)
        sd = p.obs.noise_sd(p.D)[j]
        # component axis first, broadcasting against the evaluation points
        means = np.array([-self.offset, self.offset]).reshape((2,) + (1,) * len(shape))
        logw = np.log([self.weight, 1 - self.weight]).reshape(means.shape)
        v = self.variance
        if p.observed[j] and sd == 0:
            post_m, post_v = y, 0.0
            logw = logw - 0.5 * (y - means) ** 2 / v
        elif p.observed[j]:
            s2 = sd * sd
            post_v = v * s2 / (v + s2)
            post_m = (means * s2 + y * v) / (v + s2)
            logw = logw - 0.5 * (y - means) ** 2 / (v + s2)
        else:
            post_m, post_v = means, v
        mt = c * post_m
        vt = c * c * post_v + lam_t
        lw = logw - 0.5 * (x - mt) ** 2 / vt
        lw = lw - lw.max(axis=0)
        w = np.exp(lw)
        w /= w.sum(axis=0)
        # scores here are preconditioned by C, i.e. lambda_j times the gradient
        return p.lam[j] * np.sum(w * (-(x - mt) / vt), axis=0)
