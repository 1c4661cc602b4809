import csv

import numpy as np
import pytest

from hsl.dsm import dsm_target
from hsl.gaussian import ObservationModel, ProblemSpec, score_coeffs
from hsl.neural_op.operator import OperatorArch, OperatorParams, op_forward
from hsl.neural_op.optim import Adam, PowerLawSchedule
from hsl.neural_op.schedule import NoiseSchedule
from hsl.neural_op.training import LossTrajectory, OperatorBatch, TrainConfig, TrainingDivergedError, train
from hsl.spectral import CovarianceSpectrum, Grid, basis_matrix

TINY = OperatorArch(lift_width=8, n_spectral_layers=2, n_modes_kept=3, proj_width=8)


def test_power_law_schedule_endpoints():
    s = PowerLawSchedule(1e-3, 5e-4, 20_000, 1 / 3)
    assert s(0) == 1e-3
    assert s(20_000) == pytest.approx(5e-4, rel=1e-12)
    lrs = [s(k) for k in range(0, 20_001, 1000)]
    assert all(a > b for a, b in zip(lrs, lrs[1:]))


def test_power_law_schedule_decay_exponent():
    s = PowerLawSchedule(1e-3, 5e-4, 100, 1 / 3)
    # far out the rate falls like k^(-1/3)
    assert np.log(s(10**8) / s(10**7)) / np.log(10) == pytest.approx(-1 / 3, abs=1e-4)


@pytest.mark.parametrize("kw", [dict(lr_end=2e-3), dict(lr_end=0.0), dict(n_steps=0), dict(power=0.0)])
def test_power_law_schedule_validation(kw):
    with pytest.raises(ValueError):
        PowerLawSchedule(**{"lr_start": 1e-3, **kw})


def test_adam_first_step_has_size_lr():
    arrays = {"w": np.array([1.0, -2.0, 3.0])}
    opt = Adam(arrays, PowerLawSchedule(0.1, 0.1, 10))
    lr = opt.step(arrays, {"w": np.array([5.0, -0.01, 0.0])})
    assert lr == 0.1
    np.testing.assert_allclose(arrays["w"], [0.9, -1.9, 3.0], atol=1e-6)


def test_adam_minimizes_a_quadratic():
    target = np.array([0.5, -1.5])
    arrays = {"w": np.zeros(2)}
    opt = Adam(arrays, PowerLawSchedule(0.05, 0.001, 2000, 1.0))
    for _ in range(2000):
        opt.step(arrays, {"w": 2 * (arrays["w"] - target)})
    np.testing.assert_allclose(arrays["w"], target, atol=1e-3)


def test_adam_keeps_float64_master_with_float32_gradients():
    arrays = {"w": np.zeros(3)}
    opt = Adam(arrays, PowerLawSchedule())
    opt.step(arrays, {"w": np.ones(3, dtype=np.float32)})
    assert arrays["w"].dtype == np.float64 and opt.m["w"].dtype == np.float64


def test_noise_schedule_clock():
    s = NoiseSchedule()
    beta = s.variances
    assert beta[0] == 1e-4 and beta[-1] == 2e-2 and beta.size == 500
    t = s.ou_times
    np.testing.assert_allclose(np.exp(-t), np.cumprod(1 - beta), rtol=1e-12)
    assert s.horizon == pytest.approx(-np.sum(np.log1p(-beta)), rel=1e-14)
    assert np.all(np.diff(t) > 0)


@pytest.mark.parametrize("kw", [dict(variance_start=0.0), dict(variance_end=1.0), dict(variance_start=0.5, variance_end=0.1), dict(n_steps=1)])
def test_noise_schedule_validation(kw):
    with pytest.raises(ValueError):
        NoiseSchedule(**kw)


def zero_target_source(rng, batch):
    pts = np.linspace(-1, 1, int(rng.integers(10, 20)))
    x = rng.standard_normal((batch, pts.size))
    return OperatorBatch(rng.uniform(0.1, 2, batch), np.tile(pts, (batch, 1)), x, pts, np.zeros_like(x))


def test_zero_target_training_drives_output_to_zero():
    P = OperatorParams.init(TINY, np.random.default_rng(0))
    cfg = TrainConfig(steps=400, batch=16, lr_start=1e-2, lr_end=1e-3, dtype="float64")
    trained, traj = train(P, zero_target_source, cfg, np.random.default_rng(1))
    assert np.median(traj.loss[-20:]) < 1e-3 * traj.loss[0]
    b = zero_target_source(np.random.default_rng(2), 8)
    assert np.max(np.abs(op_forward(trained, b.t, b.y_vals, b.x_vals, b.grid_pts))) < 0.05
    # the projection output vanishes; its weights need not, since earlier
    # layers can switch the hidden units off instead
    assert abs(trained.arrays["proj2.b"][0]) < 0.05


def test_training_is_deterministic():
    cfg = TrainConfig(steps=20, batch=8)
    a, ta = train(OperatorParams.init(TINY, np.random.default_rng(0)), zero_target_source, cfg, np.random.default_rng(3))
    b, tb = train(OperatorParams.init(TINY, np.random.default_rng(0)), zero_target_source, cfg, np.random.default_rng(3))
    assert ta.loss == tb.loss
    assert a.flat().tobytes() == b.flat().tobytes()


def test_training_does_not_modify_its_input():
    P = OperatorParams.init(TINY, np.random.default_rng(0))
    before = P.flat().copy()
    train(P, zero_target_source, TrainConfig(steps=3, batch=4), np.random.default_rng(0))
    np.testing.assert_array_equal(P.flat(), before)


def test_divergence_stops_training_and_keeps_trajectory(tmp_path):
    calls = []

    def exploding(rng, batch):
        calls.append(1)
        b = zero_target_source(rng, batch)
        b.target = np.full_like(b.x_vals, 1.0 + 100.0 * len(calls))
        return b

    path = tmp_path / "loss.csv"
    cfg = TrainConfig(steps=500, batch=4, divergence_patience=10)
    with pytest.raises(TrainingDivergedError) as info:
        train(OperatorParams.init(TINY, np.random.default_rng(0)), exploding, cfg, np.random.default_rng(0), trajectory_path=path)
    assert len(info.value.trajectory.loss) < 500
    assert path.exists()


def test_loss_trajectory_csv_and_smoothing(tmp_path):
    traj = LossTrajectory([0, 1, 2, 3, 4], [5.0, 1.0, 4.0, 2.0, 3.0], [1e-3] * 5)
    path = tmp_path / "loss.csv"
    traj.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["step", "loss", "lr"] and len(rows) == 6
    assert float(rows[2][1]) == 1.0
    np.testing.assert_array_equal(traj.smoothed(3), [3.0, 4.0, 2.0, 3.0, 2.5])


def test_callback_sees_every_step():
    seen = []
    train(OperatorParams.init(TINY, np.random.default_rng(0)), zero_target_source, TrainConfig(steps=5, batch=4),
          np.random.default_rng(0), callback=lambda k, loss: seen.append(k))
    assert seen == [0, 1, 2, 3, 4]


@pytest.mark.slow
def test_gaussian_training_recovers_score_coefficients():
    """Operator trained on two-mode Gaussian DSM data at a fixed diffusion time.

    A linear probe of the trained network must reproduce the analytic score
    coefficients, and its loss must sit within 5% of the analytic-score floor.
    """
    mu = CovarianceSpectrum(np.array([1.0, 0.25]))
    p = ProblemSpec(mu, mu, ObservationModel((1,), 1.0), 2.0)
    grid = Grid.uniform(0.0, 1.0, 24)
    basis = basis_matrix(grid, 2)
    t_fix = 1.0

    def draw_modes(rng, n):
        x0 = np.sqrt(p.mu) * rng.standard_normal((n, 2))
        y = p.obs.observe(x0, rng)
        xt = np.exp(-t_fix / 2) * x0 + np.sqrt(-p.lam * np.expm1(-t_fix)) * rng.standard_normal((n, 2))
        return x0, y, xt

    def source(rng, n):
        x0, y, xt = draw_modes(rng, n)
        target = dsm_target(x0, xt, t_fix)
        return OperatorBatch(np.full(n, t_fix), y @ basis.T, xt @ basis.T, grid.points, target @ basis.T)

    arch = OperatorArch(lift_width=32, n_spectral_layers=3, n_modes_kept=4, proj_width=32)
    cfg = TrainConfig(steps=3000, batch=64, lr_start=3e-3, lr_end=3e-5, lr_power=1.0)
    P, _ = train(OperatorParams.init(arch, np.random.default_rng(0)), source, cfg, np.random.default_rng(1))

    rng = np.random.default_rng(5)
    c = score_coeffs(p, t_fix)
    held = source(rng, 20_000)
    x_m = np.linalg.lstsq(basis, held.x_vals.T, rcond=None)[0].T
    y_m = np.linalg.lstsq(basis, held.y_vals.T, rcond=None)[0].T
    exact = (c.a * x_m + c.b * y_m) @ basis.T
    floor = np.mean((exact - held.target) ** 2)
    model = np.mean((op_forward(P, t_fix, held.y_vals, held.x_vals, grid.points) - held.target) ** 2)
    assert model <= 1.05 * floor

    _, y, xt = draw_modes(rng, 4000)
    out = op_forward(P, t_fix, y @ basis.T, xt @ basis.T, grid.points)
    out_modes = np.linalg.lstsq(basis, out.T, rcond=None)[0].T
    a1, b1 = np.linalg.lstsq(np.column_stack([xt[:, 0], y[:, 0]]), out_modes[:, 0], rcond=None)[0]
    (a2,) = np.linalg.lstsq(xt[:, [1]], out_modes[:, 1], rcond=None)[0]
    assert a1 == pytest.approx(c.a[0], rel=0.05)
    assert b1 == pytest.approx(c.b[0], rel=0.05)
    assert a2 == pytest.approx(c.a[1], rel=0.05)
