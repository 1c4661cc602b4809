"""Discrete linear-variance noise schedule and its OU-time equivalent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    variance_start: float = 1e-4
    variance_end: float = 2e-2
    n_steps: int = 500

    def __post_init__(self):
        if not 0 < self.variance_start < self.variance_end < 1:
            raise ValueError("need 0 < variance_start < variance_end < 1")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")

    @property
    def variances(self) -> np.ndarray:
        """Per-step variances ``beta_1 < ... < beta_K``."""
        return np.linspace(self.variance_start, self.variance_end, self.n_steps)

    @property
    def ou_times(self) -> np.ndarray:
        """``t_k = -sum_{i<=k} log(1 - beta_i)`` for ``k = 1..K``.

        With this clock ``e^{-t_k}`` equals the cumulative signal fraction of
        the discrete chain, so the OU marginal at ``t_k`` matches step ``k``.
        """
        return np.cumsum(-np.log1p(-self.variances))

    @property
    def horizon(self) -> float:
        return float(self.ou_times[-1])
