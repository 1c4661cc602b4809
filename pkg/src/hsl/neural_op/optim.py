"""Adam with a power-law step-size decay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerLawSchedule:
    """``lr(k) = lr_start * (1 + c k)^(-power)``, with ``c`` chosen so the
    rate reaches ``lr_end`` at step ``n_steps``."""

    lr_start: float = 1e-3
    lr_end: float = 5e-4
    n_steps: int = 20_000
    power: float = 1.0 / 3.0

    def __post_init__(self):
        if not 0 < self.lr_end <= self.lr_start:
            raise ValueError("need 0 < lr_end <= lr_start")
        if self.n_steps < 1 or self.power <= 0:
            raise ValueError("n_steps must be >= 1 and power > 0")

    def __call__(self, k: int) -> float:
        ratio = (self.lr_start / self.lr_end) ** (1.0 / self.power) - 1.0
        return self.lr_start * (1.0 + ratio * k / self.n_steps) ** (-self.power)


class Adam:
    """Bias-corrected first/second moment method on a dict of arrays.

    The master copy of the parameters and both moment estimates are kept in
    float64 whatever precision the gradients come in.
    """

    def __init__(self, arrays: dict[str, np.ndarray], schedule: PowerLawSchedule, beta1=0.9, beta2=0.999, eps=1e-8):
        self.schedule = schedule
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v, dtype=float) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v, dtype=float) for k, v in arrays.items()}
        self.k = 0

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> float:
        """Update ``arrays`` in place; returns the step size used."""
        lr = self.schedule(self.k)
        self.k += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.k
        c2 = 1.0 - b2**self.k
        for name, g in grads.items():
            g = np.asarray(g, dtype=float)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            arrays[name] -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return lr
