"""Verification batteries shared by the command line and the acceptance tests.

Each ``run_*`` function takes an ``ExperimentConfig`` and returns a
``BatteryResult``: named tables (lists of row dicts, written to CSV by the
CLI) and a list of ``Check`` records with measured values and tolerances.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import oracle as orc
from .config import ConfigError, ExperimentConfig, ProblemConfig
from .dsm import fit_linear_score, make_dsm_dataset, time_bins
from .gaussian import (
    ObservationModel,
    ProblemSpec,
    crude_bound,
    exact_start_moments,
    invariant_moments,
    marginal_t_moments,
    posterior_moments,
    prop3_bound,
    reverse_moments,
    score_coeffs,
    score_norm_expected,
)
from .sde import GaussianScore, empirical_moments, ensemble_sample
from .spectral import build_spectrum


@dataclass
class Check:
    name: str
    passed: bool | None  # None: not applicable
    measured: float | None = None
    tolerance: float | None = None
    note: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return f"not applicable: {self.note}" if self.note else "not applicable"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "passed": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "note": self.note,
        }


@dataclass
class BatteryResult:
    tables: dict[str, list[dict]] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    files: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed is not False for c in self.checks)


def _f(x) -> float:
    return float(x)


# ---------------------------------------------------------------- problem setup


def build_problem(cfg: ProblemConfig, horizon_T: float | None = None) -> tuple[ProblemSpec, np.ndarray]:
    """The Gaussian problem and the mode-space observation vector ``y``."""
    prior = build_spectrum(cfg.spectrum, cfg.D, cfg.spectrum_param)
    diff = cfg.diffusion.strip().lower()
    if diff == "prior":
        diffusion = prior
    elif diff == "identity":
        diffusion = build_spectrum("flat", cfg.D, 1.0)
    elif diff.startswith("polynomial:"):
        diffusion = build_spectrum("polynomial", cfg.D, float(diff.split(":", 1)[1]))
    else:
        raise ConfigError(f"unknown diffusion spectrum {cfg.diffusion!r}")
    obs_idx = tuple(cfg.observed)
    mu = prior.eigenvalues
    if len(cfg.sigma_B) == 0:
        sigma = tuple(float(np.sqrt(mu[i - 1])) for i in obs_idx)
    elif len(cfg.sigma_B) == 1:
        sigma = float(cfg.sigma_B[0])
    elif len(cfg.sigma_B) == len(obs_idx):
        sigma = tuple(cfg.sigma_B)
    else:
        raise ConfigError("sigma_B needs 0, 1 or one value per observed mode")
    if any(i > cfg.D for i in obs_idx):
        raise ConfigError(f"observed index beyond D={cfg.D}")
    obs = ObservationModel(obs_idx, sigma)
    if len(cfg.y) != len(obs_idx):
        raise ConfigError("y needs one value per observed mode")
    y = np.zeros(cfg.D)
    y[[i - 1 for i in obs_idx]] = cfg.y
    return ProblemSpec(prior, diffusion, obs, cfg.T if horizon_T is None else horizon_T), y


def _with_obs(p: ProblemSpec, obs: ObservationModel) -> ProblemSpec:
    return p.replace(obs=obs)


def noiseless_version(p: ProblemSpec) -> ProblemSpec:
    return _with_obs(p, ObservationModel(p.obs.observed_indices, 0.0))


def unconditional_version(p: ProblemSpec) -> ProblemSpec:
    return _with_obs(p, ObservationModel((), 0.0))


# ---------------------------------------------------------------- verify-gaussian


def run_verify_gaussian(cfg: ExperimentConfig, threads: int = 1) -> BatteryResult:
    res = BatteryResult()
    p, y = build_problem(cfg.problem)
    sc = cfg.sde
    post = posterior_moments(p, y)

    # posterior sampling with the exact score and exact start
    score = GaussianScore(p, t_floor=sc.t_floor)
    samples = ensemble_sample(p, score, y, sc.n_paths, sc.steps, cfg.seed, threads=threads)
    emp = empirical_moments(samples)
    se = np.sqrt(emp.variance / sc.n_paths)
    z = (emp.mean - post.mean) / se
    pinned = post.variance == 0.0
    rel_var = (emp.variance - post.variance) / np.where(pinned, 1.0, post.variance)
    res.tables["posterior_moments"] = [
        {
            "mode": j + 1,
            "target_mean": post.mean[j],
            "sample_mean": emp.mean[j],
            "stderr_mean": se[j],
            "z_mean": z[j],
            "target_var": post.variance[j],
            "sample_var": emp.variance[j],
            "rel_err_var": rel_var[j],
        }
        for j in range(p.D)
    ]
    res.checks.append(Check("posterior_mean_within_3se", bool(np.all(np.abs(z) <= 3)), _f(np.abs(z).max()), 3.0,
                            f"max |mean bias| {np.abs(emp.mean - post.mean).max():.3g}"))
    free = np.abs(rel_var[~pinned])
    if free.size:
        res.checks.append(Check("posterior_var_within_5pct", bool(np.all(free <= 0.05)), _f(free.max()), 0.05))
    if np.any(pinned):
        # noiselessly observed modes have zero posterior variance; the sampler
        # stops at t_floor, so ask only that the prior spread has collapsed
        shrink = _f(np.max(emp.variance[pinned] / p.mu[pinned]))
        res.checks.append(Check("pinned_modes_collapse", shrink <= 0.05, shrink, 0.05, "sample variance / prior variance"))

    # exact start is a fixed point of the reverse moment map
    fp = reverse_moments(p, y, exact_start_moments(p, y))
    gap = max(np.abs(fp.mean - post.mean).max(), np.abs(fp.variance - post.variance).max())
    res.checks.append(Check("exact_start_fixed_point", bool(gap <= 1e-12), _f(gap), 1e-12))

    # exponential convergence from the invariant start
    rows = []
    for T in sc.convergence_T:
        pT = p.replace(horizon_T=float(T))
        m = reverse_moments(pT, y, invariant_moments(pT))
        em = np.abs(m.mean - post.mean).max()
        ev = np.abs(m.variance - post.variance).max()
        rows.append({"T": float(T), "mean_err": em, "var_err": ev, "total_err": em + ev})
    res.tables["convergence"] = rows
    Ts = np.array([r["T"] for r in rows])
    errs = np.array([r["total_err"] for r in rows])
    if np.all(errs > 0) and len(Ts) >= 2:
        slope = float(np.polyfit(Ts, np.log(errs), 1)[0])
        res.checks.append(Check("convergence_log_slope", slope <= -1 + 0.05, slope, -0.95))
    else:
        res.checks.append(Check("convergence_log_slope", None, note="reverse map is exact from any start"))

    if sc.check_prop3:
        if p.obs.noiseless:
            res.checks.append(Check("prop3_bound", None, note="noiseless regime"))
        else:
            ts = np.linspace(0.01, p.horizon_T, 50)
            bound = prop3_bound(p, 1.0, 0.0)
            worst = float(np.max(score_norm_expected(p, ts)))
            res.checks.append(Check("prop3_bound", worst <= bound, worst, bound))
    return res


# ---------------------------------------------------------------- score-norm


def _mc_gaussian_norm(p: ProblemSpec, y, t: float, n: int, rng: np.random.Generator):
    m = marginal_t_moments(p, y, t)
    x = m.mean + np.sqrt(m.variance) * rng.standard_normal((n, p.D))
    c = score_coeffs(p, t)
    s2 = np.sum((c.a * x + c.b * np.where(p.observed, y, 0.0)) ** 2, axis=1)
    return float(s2.mean()), float(s2.std(ddof=1) / np.sqrt(n))


def run_score_norm(cfg: ExperimentConfig, threads: int = 1) -> BatteryResult:
    res = BatteryResult()
    p, y = build_problem(cfg.problem)
    sc = cfg.sde
    rng = np.random.default_rng(cfg.seed)
    variants = [
        ("conditional", p),
        ("noiseless", noiseless_version(p)),
        ("unconditional", unconditional_version(p)),
    ]
    times = sorted(set(float(t) for t in itertools.chain(sc.times, sc.noiseless_times)))
    rows = []
    mc_ok = True
    worst_rel = 0.0
    bound_ok = True
    for name, pv in variants:
        pb = None if pv.obs.noiseless else prop3_bound(pv, 1.0, 0.0)
        for t in times:
            analytic = score_norm_expected(p, t, name)
            mc, se = _mc_gaussian_norm(pv, y, t, sc.mc_samples, rng)
            crude = crude_bound(pv, t)
            rows.append({"variant": name, "t": t, "analytic": analytic, "crude_bound": crude,
                         "prop3_bound": math.nan if pb is None else pb, "monte_carlo": mc, "stderr": se})
            mc_ok &= abs(mc - analytic) <= 3 * se
            if name == "conditional" and t in sc.times:
                worst_rel = max(worst_rel, abs(mc - analytic) / analytic)
            bound_ok &= analytic <= crude and mc <= crude
    res.tables["score_norm"] = rows
    res.checks.append(Check("mc_within_3se", bool(mc_ok)))
    res.checks.append(Check("mc_rel_err_1pct", worst_rel <= 0.01, worst_rel, 0.01))
    res.checks.append(Check("below_crude_bound", bool(bound_ok)))

    if np.allclose(p.lam, p.mu, rtol=0, atol=0):
        vals = score_norm_expected(p, np.array(times), "unconditional")
        dev = float(np.max(np.abs(vals - p.lam.sum())) / p.lam.sum())
        res.checks.append(Check("unconditional_equals_trace", dev <= 1e-12, dev, 1e-12))
    else:
        res.checks.append(Check("unconditional_equals_trace", None, note="C differs from C_mu"))

    if p.observed.any():
        tn = np.asarray(sc.noiseless_times, dtype=float)
        slope = float(np.polyfit(np.log(tn), np.log(score_norm_expected(p, tn, "noiseless")), 1)[0])
        res.checks.append(Check("noiseless_log_slope", abs(slope + 1) <= 0.05, slope, 0.05, "target -1"))
        lim = 1e-6 * score_norm_expected(p, 1e-6, "noiseless")
        target = float(p.lam[p.observed].sum())
        rel = abs(lim - target) / target
        res.checks.append(Check("noiseless_t_times_norm", rel <= 0.01, rel, 0.01, f"limit {target:.6g}"))
    else:
        res.checks.append(Check("noiseless_log_slope", None, note="no observed modes"))

    # Monte Carlo with a bounded, Lipschitz non-Gaussian reweighting
    if p.obs.noiseless:
        res.checks.append(Check("prop3_dominates_psi_prior", None, note="noiseless regime"))
    else:
        prior = orc.sinusoidal_prior(p.D)
        bound = prop3_bound(p, prior.K, prior.L)
        psi_rows = []
        worst = 0.0
        for t in np.linspace(0.01, p.horizon_T, 5):
            est = orc.mc_score_norm(p, prior, y, float(t), sc.psi_samples, rng)
            psi_rows.append({"t": float(t), "monte_carlo": est.value, "stderr": est.stderr,
                             "crude_bound": crude_bound(p, t), "prop3_bound": bound})
            worst = max(worst, est.value / bound)
        res.tables["score_norm_psi"] = psi_rows
        res.checks.append(Check("prop3_dominates_psi_prior", worst <= 1.0, worst, 1.0, "ratio estimate/bound"))
    return res


# ---------------------------------------------------------------- dsm-linear


def _fit_rows(case, ds, p, bins, res_rows):
    worst = 0.0
    for b in range(len(bins) - 1):
        lo, hi = float(bins[b]), float(bins[b + 1])
        c = score_coeffs(p, 0.5 * (lo + hi))
        for j in range(p.D):
            fit = fit_linear_score(ds, j, (lo, hi), observed=bool(p.observed[j]))
            da = abs(fit.a - c.a[j]) / max(3 * fit.se_a, 0.02 * abs(c.a[j]))
            db = abs(fit.b - c.b[j]) / max(3 * fit.se_b, 0.02 * abs(c.b[j])) if c.b[j] != 0 else (0.0 if fit.b == 0 else math.inf)
            worst = max(worst, da, db)
            res_rows.append({"case": case, "mode": j + 1, "bin": b, "t_lo": lo, "t_hi": hi, "a_hat": fit.a, "b_hat": fit.b,
                             "a_true": c.a[j], "b_true": c.b[j], "se_a": fit.se_a, "se_b": fit.se_b, "n": fit.n})
    return worst


def run_dsm_linear(cfg: ExperimentConfig, threads: int = 1) -> BatteryResult:
    res = BatteryResult()
    p, _ = build_problem(cfg.problem)
    rng = np.random.default_rng(cfg.seed)
    ds = make_dsm_dataset(p, cfg.dsm.n_samples, rng, t_floor=cfg.dsm.t_floor)
    bins = time_bins(cfg.dsm.t_floor, p.horizon_T, cfg.dsm.bins)
    rows: list[dict] = []
    try:
        worst = _fit_rows("config", ds, p, bins, rows)
        res.checks.append(Check("dsm_fit_within_tolerance", worst <= 1.0, worst, 1.0, "max deviation / max(3 se, 2% bias)"))
    except ValueError as err:
        res.checks.append(Check("dsm_fit_within_tolerance", False, note=f"underfilled bin: {err}"))

    # single-mode examples: observed with q = 1, unobserved, and a degenerate dataset
    unit = build_spectrum("flat", 1, 1.0)
    ln2 = math.log(2.0)
    for case, obs in (("example_observed", ObservationModel((1,), 1.0)), ("example_unobserved", ObservationModel((), 0.0))):
        pe = ProblemSpec(unit, unit, obs, ln2 + 0.05)
        de = make_dsm_dataset(pe, 100_000, rng, t_floor=ln2 - 0.05)
        w = _fit_rows(case, de, pe, np.array([ln2 - 0.05, ln2 + 0.05 + 1e-12]), rows)
        res.checks.append(Check(case, w <= 1.0, w, 1.0))
    pe = ProblemSpec(unit, unit, ObservationModel((1,), 1.0), 1.0)
    de = make_dsm_dataset(pe, 1000, rng, t_floor=0.5)
    de.xt[:] = np.exp(-de.t / 2)[:, None] * de.x0
    fit = fit_linear_score(de, 0, (0.5, 1.0 + 1e-12))
    rows.append({"case": "example_degenerate", "mode": 1, "bin": 0, "t_lo": 0.5, "t_hi": 1.0, "a_hat": fit.a, "b_hat": fit.b,
                 "a_true": 0.0, "b_true": 0.0, "se_a": fit.se_a, "se_b": fit.se_b, "n": fit.n})
    res.checks.append(Check("example_degenerate", fit.a == 0 and fit.b == 0, max(abs(fit.a), abs(fit.b)), 0.0))
    res.tables["dsm_fit"] = rows
    return res


# ---------------------------------------------------------------- oracle-compare


def run_oracle_compare(cfg: ExperimentConfig, threads: int = 1) -> BatteryResult:
    res = BatteryResult()
    p, y = build_problem(cfg.problem)
    kind = cfg.problem.prior.strip().lower()
    ts = (0.01, 0.1, 1.0)
    xs = np.linspace(-3, 3, 21)
    ys = np.linspace(-3, 3, 21)
    rows = []
    if kind == "gaussian":
        prior, ref, tol = orc.gaussian_prior(p.D), "analytic", 1e-7
    elif kind == "mixture":
        mix = orc.TwoComponentMixture()
        prior, ref, tol = mix.prior(p), "mixture", 1e-6
    elif kind == "sinusoidal":
        prior, ref, tol = orc.sinusoidal_prior(p.D), "none", None
    else:
        raise ConfigError(f"unknown prior {cfg.problem.prior!r}; use gaussian, mixture or sinusoidal")
    worst = 0.0
    for j, t, yj in itertools.product(range(p.D), ts, ys):
        o = orc.oracle_score(p, prior, j, t, xs, yj)
        if ref == "analytic":
            c = score_coeffs(p, t)
            r = c.a[j] * xs + c.b[j] * (yj if p.observed[j] else 0.0)
        elif ref == "mixture":
            r = mix.score(p, j, t, xs, yj if p.observed[j] else 0.0)
        else:
            r = np.full_like(xs, math.nan)
        for x, ov, rv in zip(xs, o, r):
            d = abs(ov - rv)
            if not math.isnan(d):
                worst = max(worst, d)
            rows.append({"prior": kind, "mode": j + 1, "t": t, "x": x, "y": yj, "oracle": ov, "reference": rv, "abs_diff": d})
    # worked examples on a unit problem
    unit = build_spectrum("flat", 1, 1.0)
    pe = ProblemSpec(unit, unit, ObservationModel((1,), 1.0), 1.0)
    ex = float(orc.oracle_score(pe, orc.gaussian_prior(1), 0, math.log(2.0), 1.0, 0.0))
    rows.append({"prior": "example_gaussian_unit", "mode": 1, "t": math.log(2.0), "x": 1.0, "y": 0.0,
                 "oracle": ex, "reference": -4.0 / 3.0, "abs_diff": abs(ex + 4.0 / 3.0)})
    res.tables["oracle_lattice"] = rows
    if tol is None:
        ok_b, ok_l = prior.check_bounds(np.linspace(-10, 10, 2001), ys)
        res.checks.append(Check("psi_bounds", ok_b and ok_l, note=f"K={prior.K}, L={prior.L}"))
    else:
        res.checks.append(Check(f"oracle_vs_{ref}", worst < tol, worst, tol))
    res.checks.append(Check("example_gaussian_unit", abs(ex + 4 / 3) < 1e-8, abs(ex + 4 / 3), 1e-8))
    return res


# ---------------------------------------------------------------- timing helper


class Stopwatch:
    def __init__(self):
        self.t0 = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.t0


# ---------------------------------------------------------------- stylized example


def stylized_setup(cfg: ExperimentConfig):
    from .neural_op.operator import OperatorArch
    from .neural_op.schedule import NoiseSchedule
    from .neural_op.stylized import StylizedProblem
    from .neural_op.training import TrainConfig

    tr = cfg.train
    arch = OperatorArch(tr.lift_width, tr.n_spectral_layers, tr.n_modes_kept, tr.proj_width)
    schedule = NoiseSchedule(tr.variance_start, tr.variance_end, tr.schedule_steps)
    problem = StylizedProblem(min_points=tr.min_points, max_points=tr.max_points, schedule=schedule)
    tcfg = TrainConfig(steps=tr.steps, batch=tr.batch, lr_start=tr.lr_start, lr_end=tr.lr_end, lr_power=tr.lr_power)
    return arch, problem, tcfg


def run_train_stylized(cfg: ExperimentConfig, checkpoint_path, loss_path) -> BatteryResult:
    from .neural_op.checkpoint import save_params
    from .neural_op.operator import OperatorParams, op_backward
    from .neural_op.stylized import fit_standardization, stylized_source
    from .neural_op.training import TrainingDivergedError, train

    res = BatteryResult()
    arch, problem, tcfg = stylized_setup(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    norm = fit_standardization(problem, np.random.default_rng(seeds[0]))
    params = OperatorParams.init(arch, np.random.default_rng(seeds[1]), norm)
    source = stylized_source(problem, norm)
    clock = Stopwatch()
    try:
        trained, traj = train(params, source, tcfg, np.random.default_rng(seeds[2]), trajectory_path=loss_path)
    except TrainingDivergedError as err:
        res.checks.append(Check("training_converged", False, note=str(err)))
        return res
    res.files.append(str(loss_path))
    save_params(trained, checkpoint_path, extra={"seed": cfg.seed, "train_seconds": clock.elapsed})
    res.files.append(str(checkpoint_path))

    # zero-model baseline on held-out batches, same weighting as training
    held = np.random.default_rng(seeds[3])
    zero = OperatorParams.zeros(arch, norm)
    base, final = [], []
    for _ in range(8):
        b = source(held, tcfg.batch)
        base.append(op_backward(zero, b.t, b.y_vals, b.x_vals, b.grid_pts, b.target, b.weights)[0])
        final.append(op_backward(trained, b.t, b.y_vals, b.x_vals, b.grid_pts, b.target, b.weights)[0])
    ratio = float(np.mean(final) / np.mean(base))
    res.checks.append(Check("loss_10x_below_zero_model", ratio <= 0.1, ratio, 0.1, "held-out loss / zero-model loss"))
    sm = traj.smoothed()
    res.checks.append(Check("loss_trend_decreasing", bool(sm[-1] < sm[0]), float(sm[-1]), float(sm[0])))
    res.tables["_train_info"] = [{"seconds": clock.elapsed}]
    return res


@dataclass
class StylizedSamples:
    grid_pts: dict[int, np.ndarray]
    samples: dict[int, np.ndarray]


def sample_grids(params, problem, sizes, n_samples, seed, threads=1) -> StylizedSamples:
    from .neural_op.stylized import sample_stylized

    lo, hi = problem.domain
    pts, out = {}, {}
    for N in sizes:
        g = np.linspace(lo, hi, N)
        pts[N] = g
        out[N] = sample_stylized(params, g, g, problem.schedule, n_samples, seed=seed * 1000 + N, threads=threads)
    return StylizedSamples(pts, out)


def marginal_checks(problem, result: StylizedSamples, locations, reference_sizes, extra_size=None):
    """Bimodality per (grid, location) and cross-grid KS statistics."""
    from .neural_op.marginals import ks_critical, ks_statistic, marginal_at, mode_report

    checks, modes, ks_rows = [], [], []
    marg = {N: {y: marginal_at(result.samples[N], result.grid_pts[N], y) for y in locations} for N in result.samples}
    for y in locations:
        all_bimodal = True
        for N in reference_sizes:
            rep = mode_report(marg[N][y])
            modes.append({"N": N, "y": y, "n_modes": rep.n_modes, "dip_ratio": rep.dip_ratio})
            all_bimodal &= rep.bimodal
        checks.append(Check(f"bimodal_y={y:g}", bool(all_bimodal), note="every grid size"))
        crit = None
        worst = 0.0
        for a, b in itertools.combinations(reference_sizes, 2):
            ma, mb = marg[a][y], marg[b][y]
            crit = ks_critical(ma.size, mb.size)
            stat = ks_statistic(ma, mb)
            worst = max(worst, stat)
            ks_rows.append({"y": y, "N_a": a, "N_b": b, "ks": stat, "critical": crit})
        if crit is not None:
            checks.append(Check(f"cross_grid_ks_y={y:g}", worst < crit, worst, crit))
        if extra_size is not None and extra_size in marg:
            ref = max(reference_sizes)
            ma, mb = marg[extra_size][y], marg[ref][y]
            stat, crit = ks_statistic(ma, mb), ks_critical(ma.size, mb.size)
            ks_rows.append({"y": y, "N_a": extra_size, "N_b": ref, "ks": stat, "critical": crit})
            checks.append(Check(f"extrapolated_ks_y={y:g}", stat < crit, stat, crit, f"N={extra_size} vs N={ref}"))
    return checks, modes, ks_rows, marg


def run_sample_stylized(cfg: ExperimentConfig, checkpoint_path, threads: int = 1) -> BatteryResult:
    from .neural_op.checkpoint import load_params
    from .neural_op.marginals import BANDWIDTH_SCALE, histogram, kde

    res = BatteryResult()
    tr = cfg.train
    _, problem, _ = stylized_setup(cfg)
    params, _ = load_params(checkpoint_path)
    sizes = list(tr.grid_sizes)
    extra = tr.extrapolation_size if tr.extrapolation_size > 0 else None
    all_sizes = sizes + ([extra] if extra is not None and extra not in sizes else [])
    result = sample_grids(params, problem, all_sizes, tr.n_samples, cfg.seed, threads)
    checks, modes, ks_rows, marg = marginal_checks(problem, result, tr.locations, sizes, extra)
    res.checks.extend(checks)
    for N in all_sizes:
        g, S = result.grid_pts[N], result.samples[N]
        res.tables[f"samples_N{N}"] = [
            {"sample": i, "s": g[k], "x": S[i, k]} for i in range(S.shape[0]) for k in range(g.size)
        ]
        drows, hrows = [], []
        for y in tr.locations:
            v = marg[N][y]
            xs = np.linspace(min(v.min(), -8.0), max(v.max(), 20.0), 400)
            silver = kde(v, xs, bw_scale=1.0)
            narrow = kde(v, xs, bw_scale=BANDWIDTH_SCALE)
            truth = problem.conditional_density(y, xs)
            drows += [{"y": y, "x": x, "kde_silverman": a, "kde_detector": b, "true_density": c}
                      for x, a, b, c in zip(xs, silver, narrow, truth)]
            centers, dens = histogram(v, bins=60)
            hrows += [{"y": y, "bin_center": c, "density": d} for c, d in zip(centers, dens)]
        res.tables[f"marginals_N{N}"] = drows
        res.tables[f"histogram_N{N}"] = hrows
    res.tables["modes"] = modes
    res.tables["ks"] = ks_rows
    return res
