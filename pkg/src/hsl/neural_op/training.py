"""Minibatch training of the operator on denoising score-matching batches."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .operator import OperatorParams, op_backward
from .optim import Adam, PowerLawSchedule


@dataclass
class OperatorBatch:
    """Functions sharing one grid: ``t`` is ``(B,)``, values are ``(B, N)``."""

    t: np.ndarray
    y_vals: np.ndarray
    x_vals: np.ndarray
    grid_pts: np.ndarray
    target: np.ndarray
    weights: np.ndarray | None = None


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20_000
    batch: int = 512
    lr_start: float = 1e-3
    lr_end: float = 5e-4
    lr_power: float = 1.0 / 3.0
    dtype: str = "float32"
    divergence_factor: float = 10.0
    divergence_patience: int = 100

    def schedule(self) -> PowerLawSchedule:
        return PowerLawSchedule(self.lr_start, self.lr_end, self.steps, self.lr_power)


@dataclass
class LossTrajectory:
    step: list
    loss: list
    lr: list

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "loss", "lr"])
            for s, l, r in zip(self.step, self.loss, self.lr):
                w.writerow([s, f"{l:.17g}", f"{r:.17g}"])

    def smoothed(self, width: int = 101) -> np.ndarray:
        """Running median of the loss (odd window, shrunk at the ends)."""
        loss = np.asarray(self.loss)
        half = width // 2
        return np.array([np.median(loss[max(0, i - half) : i + half + 1]) for i in range(len(loss))])


class TrainingDivergedError(RuntimeError):
    def __init__(self, msg: str, trajectory: LossTrajectory):
        super().__init__(msg)
        self.trajectory = trajectory


def train(
    params: OperatorParams,
    data_source: Callable[[np.random.Generator, int], OperatorBatch],
    config: TrainConfig,
    rng: np.random.Generator,
    trajectory_path=None,
    callback: Callable[[int, float], None] | None = None,
) -> tuple[OperatorParams, LossTrajectory]:
    """Adam on the weighted squared residual; returns new params and the loss trajectory.

    Gradients are computed in ``config.dtype`` on a working copy while Adam
    updates a float64 master copy.  Training stops with
    ``TrainingDivergedError`` (after writing the trajectory, if a path is
    given) once the loss has stayed above ``divergence_factor`` times the
    first loss for ``divergence_patience`` consecutive steps.
    """
    master = params.copy()
    opt = Adam(master.arrays, config.schedule())
    traj = LossTrajectory([], [], [])
    dtype = np.dtype(config.dtype)
    first = None
    bad = 0
    for k in range(config.steps):
        b = data_source(rng, config.batch)
        work = master.astype(dtype)
        loss, grads = op_backward(work, b.t, b.y_vals, b.x_vals, b.grid_pts, b.target, b.weights)
        if first is None:
            first = loss
        bad = bad + 1 if not (loss <= config.divergence_factor * first) else 0
        lr = opt.step(master.arrays, grads)
        traj.step.append(k)
        traj.loss.append(loss)
        traj.lr.append(lr)
        if callback is not None:
            callback(k, loss)
        if bad >= config.divergence_patience:
            if trajectory_path is not None:
                traj.to_csv(trajectory_path)
            raise TrainingDivergedError(f"loss above {config.divergence_factor}x its initial value for {bad} steps at step {k}", traj)
    if trajectory_path is not None:
        traj.to_csv(trajectory_path)
    return master, traj
