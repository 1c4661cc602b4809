"""Forward OU transitions and Euler-Maruyama integration of the reverse SDE.

The reverse SDE in mode coordinates is

    dZ = (Z / 2 + S(T - tau, Z, y)) dtau + sqrt(C) dW,

integrated in reverse time ``tau`` from 0 to ``T - t_floor``.  States are
arrays of shape ``(D,)`` or ``(n_paths, D)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .gaussian import ModeMoments, ProblemSpec, exact_start_moments, score_coeffs

DEFAULT_T_FLOOR = 1e-3
CHUNK = 4096


class SdeDivergenceError(FloatingPointError):
    pass


class ScoreFunction:
    """Callable ``(t, x, y) -> score`` usable on ``[t_floor, T]``."""

    t_floor: float = DEFAULT_T_FLOOR

    def __call__(self, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class CallableScore(ScoreFunction):
    def __init__(self, fn: Callable, t_floor: float = DEFAULT_T_FLOOR):
        self.fn = fn
        self.t_floor = float(t_floor)

    def __call__(self, t, x, y):
        return self.fn(t, x, y)


class GaussianScore(ScoreFunction):
    """The exact linear score ``a_j(t) x_j + b_j(t) y_j`` of the Gaussian prior."""

    def __init__(self, problem: ProblemSpec, t_floor: float = DEFAULT_T_FLOOR):
        if t_floor < 0 or t_floor >= problem.horizon_T:
            raise ValueError("t_floor must lie in [0, T)")
        if t_floor == 0 and problem.obs.noiseless and problem.observed.any():
            raise ValueError("the noiseless score blows up at t = 0; use t_floor > 0")
        self.problem = problem
        self.t_floor = float(t_floor)

    def coeffs(self, t: float):
        return score_coeffs(self.problem, t)

    def __call__(self, t, x, y):
        c = self.coeffs(t)
        yy = np.where(self.problem.observed, y, 0.0)
        return c.a * x + c.b * yy


@dataclass(frozen=True)
class PathStreams:
    """Counter-based per-path random streams keyed by ``(seed, path index)``."""

    seed: int
    paths: np.ndarray

    @classmethod
    def range(cls, seed: int, start: int, stop: int) -> "PathStreams":
        return cls(int(seed), np.arange(start, stop, dtype=np.int64))

    def __len__(self):
        return len(self.paths)

    def normals(self, block: int, D: int) -> np.ndarray:
        return kernels.counter_normals(self.seed, self.paths, block, D)


@dataclass
class SdePath:
    times: np.ndarray
    states: np.ndarray


def forward_transition(p: ProblemSpec, x0, t: float, rng: np.random.Generator) -> np.ndarray:
    """Exact draw of ``X_t`` given ``X_0 = x0``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    x0 = np.asarray(x0, dtype=float)
    if t == 0:
        return x0.copy()
    sd = np.sqrt(-p.lam * np.expm1(-t))
    return np.exp(-t / 2) * x0 + sd * rng.standard_normal(x0.shape)


def _noise(rng, block: int, shape) -> np.ndarray:
    if isinstance(rng, PathStreams):
        return rng.normals(block, shape[-1])
    return rng.standard_normal(shape)


def _check_finite(z, k):
    bad = ~np.isfinite(z)
    if bad.any():
        where = np.argwhere(bad)[0]
        mode = int(where[-1]) + 1
        raise SdeDivergenceError(f"non-finite state at reverse step {k} in mode {mode}")


def reverse_integrate(
    p: ProblemSpec,
    score: ScoreFunction,
    y,
    z0,
    steps: int,
    rng,
    record: bool = False,
):
    """Euler-Maruyama for the conditional reverse SDE.

    ``rng`` is either a ``numpy.random.Generator`` or ``PathStreams`` (one
    stream per row of ``z0``; step ``k`` draws noise block ``k + 1``).
    Returns ``(terminal, path)``, ``path`` being ``None`` unless ``record``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    z = np.array(z0, dtype=float, copy=True)
    squeeze = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != p.D:
        raise ValueError(f"z0 has {z.shape[1]} modes, problem has {p.D}")
    if isinstance(rng, PathStreams) and len(rng) != z.shape[0]:
        raise ValueError("one path stream per state row is required")
    y = np.asarray(y, dtype=float)
    T, t_floor = p.horizon_T, score.t_floor
    h = (T - t_floor) / steps
    sig = np.sqrt(p.lam * h)

    fast = isinstance(score, GaussianScore) and isinstance(rng, PathStreams) and not record and y.ndim == 1
    if fast:
        yy = np.where(p.observed, y, 0.0)
        mux = np.empty((steps, p.D))
        cy = np.empty((steps, p.D))
        for k in range(steps):
            c = score.coeffs(T - k * h)
            mux[k] = 0.5 + c.a
            cy[k] = c.b * yy
        z = np.ascontiguousarray(z)
        kernels.em_linear(z, mux, cy, sig, h, rng.seed, rng.paths, 1)
        if np.all(np.isfinite(z)):
            return (z[0] if squeeze else z), None
        # rerun stepwise to locate the divergence
        z = np.atleast_2d(np.array(z0, dtype=float))

    times = [0.0]
    states = [z.copy()] if record else None
    for k in range(steps):
        t = T - k * h
        drift = 0.5 * z + score(t, z, y)
        z = z + (drift * h + sig * _noise(rng, k + 1, z.shape))
        _check_finite(z, k)
        if record:
            times.append((k + 1) * h)
            states.append(z.copy())
    path = None
    if record:
        st = np.stack(states)
        path = SdePath(np.asarray(times), st[:, 0] if squeeze else st)
    return (z[0] if squeeze else z), path


def exact_start_draw(p: ProblemSpec, y, streams: PathStreams) -> np.ndarray:
    """Initial states from the law of ``X_T | Y = y`` (noise block 0)."""
    m = exact_start_moments(p, y)
    return m.mean + np.sqrt(m.variance) * streams.normals(0, p.D)


def ensemble_sample(
    p: ProblemSpec,
    score: ScoreFunction,
    y,
    n_paths: int,
    steps: int,
    seed: int,
    threads: int = 1,
    chunk: int = CHUNK,
) -> np.ndarray:
    """Terminal states of ``n_paths`` independent exact-start reverse paths.

    Path ``i`` only ever reads the stream keyed by ``(seed, i)``, so the
    output does not depend on ``threads`` or ``chunk``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")

    def run(bounds):
        lo, hi = bounds
        streams = PathStreams.range(seed, lo, hi)
        z0 = exact_start_draw(p, y, streams)
        return reverse_integrate(p, score, y, z0, steps, streams)[0]

    bounds = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    if threads <= 1 or len(bounds) == 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, bounds))
    return np.concatenate(parts, axis=0)


def empirical_moments(samples) -> ModeMoments:
    """Per-mode sample mean and unbiased variance."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or s.shape[0] < 2:
        raise ValueError("need at least 2 samples of shape (n, D)")
    return ModeMoments(s.mean(axis=0), s.var(axis=0, ddof=1))
