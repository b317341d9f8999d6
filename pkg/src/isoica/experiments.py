"""Scaling studies: error versus perturbation size, isometry versus ambient dimension.

Each study is a grid of independent tasks keyed by (grid index, run index).
Every task derives its random streams from ``(seed, run, ...)`` only, so the
merged result does not depend on how many worker processes ran the tasks.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import ica
from .ica import SolverOptions, get_contrast, reference_wtilde, run_ica, sign_invariant_distance
from .metrics import (
    best_permutation,
    center_and_decorrelate,
    col_mean,
    col_sumsq,
    mcc,
    verify_mcc_bound_general,
    verify_mcc_bound_independent,
)
from .model import (
    FAMILIES,
    MixingModel,
    NoPerturbation,
    SourceSpec,
    jacobian_of_mixing,
    make_cubic_perturbation,
    make_smooth_perturbation,
    mix,
    random_gaussian_jacobians,
    random_mixing_matrix,
    random_rotation,
    sample_sources,
    theta_from_jacobians,
)
from .rng import make_rng
from .whiten import apply_whitener, fit_whitener

MAX_FAILURE_FRACTION = 0.05
RUN_LEVEL_ROW = -1


class ExperimentError(RuntimeError):
    def __init__(self, message: str, report: "ScalingReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    fit_lo: float
    fit_hi: float
    n_points: int


def fit_loglog_slope(points: Sequence[tuple[float, float]], fit_range: tuple[float, float]) -> SlopeFit:
    """Least squares of ``log y`` on ``log x`` over the points with ``lo <= x <= hi``."""
    lo, hi = fit_range
    pts = [(float(x), float(y)) for x, y in points if lo <= x <= hi]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points in [{lo}, {hi}], got {len(pts)}")
    xs, ys = np.array(pts).T
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive x and y")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2, float(lo), float(hi), len(pts))


@dataclass
class ScalingReport:
    sweep_variable: str
    grid: list
    per_point: dict
    slopes: dict
    config_echo: dict
    seeds: list
    records: list = field(default_factory=list)
    floor: dict = field(default_factory=dict)
    floor_flags: dict = field(default_factory=dict)
    solves: int = 0
    failures: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def failure_fraction(self) -> float:
        return self.failures / self.solves if self.solves else 0.0


def _summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return dict(median=math.nan, q32=math.nan, q68=math.nan, mean=math.nan)
    q32, med, q68 = np.quantile(v, [0.32, 0.5, 0.68])
    return dict(median=float(med), q32=float(q32), q68=float(q68), mean=float(v.mean()))


def _execute(fn: Callable, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _group(records, metrics) -> dict:
    """metric -> sweep value -> list of metric values."""
    out = {m: {} for m in metrics}
    for _, value, _, _, metric, metric_value in records:
        if metric in out and math.isfinite(metric_value):
            out[metric].setdefault(value, []).append(metric_value)
    return out


def _aggregate(report: ScalingReport, metrics, baseline_value, floor_factor):
    grouped = _group(report.records, metrics)
    for m in metrics:
        report.per_point[m] = [_summarize(grouped[m].get(v, [])) for v in report.grid]
        if baseline_value is None:
            report.floor_flags[m] = [False] * len(report.grid)
            continue
        floor = _summarize(grouped[m].get(baseline_value, []))["median"]
        report.floor[m] = floor
        report.floor_flags[m] = [
            bool(math.isfinite(floor) and p["median"] < floor_factor * floor) for p in report.per_point[m]
        ]


def _fit(report: ScalingReport, metric: str, fit_range, x_metric: str | None = None, name: str | None = None):
    name = name or metric
    pts = []
    for k, v in enumerate(report.grid):
        if not fit_range[0] <= v <= fit_range[1] or report.floor_flags[metric][k]:
            continue
        x = v if x_metric is None else report.per_point[x_metric][k]["median"]
        y = report.per_point[metric][k]["median"]
        if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y):
            pts.append((x, y))
    if len(pts) < 3:
        report.slopes[name] = None
        report.extras.setdefault("slope_notes", {})[name] = f"only {len(pts)} usable points in fit range"
        return
    xs = [p[0] for p in pts]
    report.slopes[name] = fit_loglog_slope(pts, (min(xs), max(xs)))
    if x_metric is None:
        report.slopes[name] = SlopeFit(**{**asdict(report.slopes[name]), "fit_lo": fit_range[0], "fit_hi": fit_range[1]})


# --- eta scaling ----------------------------------------------------------------


@dataclass
class EtaScalingConfig:
    d: int = 5
    n: int = 200_000
    runs: int = 5
    eta_lo: float = 1e-3
    eta_hi: float = 1.0
    eta_points: int = 12
    contrast: str = "quartic"
    family: str = "laplace"
    solver: str = "fixed-point"
    init: str = "oracle"
    tol: float = 1e-10
    max_iter: int = 500
    fit_lo: float = 0.01
    fit_hi: float = 0.1
    floor_factor: float = 3.0
    seed: int = 0

    @property
    def eta_grid(self) -> list:
        return [float(e) for e in np.logspace(math.log10(self.eta_lo), math.log10(self.eta_hi), self.eta_points)]

    def validate(self):
        grid = self.eta_grid
        if not all(0 < e <= 1 for e in grid):
            raise ValueError("eta grid must lie in (0, 1]")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


ETA_METRICS = ("dist_w_wbar", "dist_w_wtilde", "one_minus_mcc")


def _initial_rows(cfg, run, w_bar):
    if cfg.init == "oracle":
        return w_bar
    if cfg.init == "random":
        rows = make_rng(cfg.seed, run, 3).standard_normal(w_bar.shape)
        return rows / np.linalg.norm(rows, axis=1, keepdims=True)
    raise ValueError(f"unknown init {cfg.init!r}")


def _match_rows(cfg, w_rows, w_bar):
    if cfg.init == "oracle":
        return np.arange(w_rows.shape[0])
    return best_permutation(np.abs(w_bar @ w_rows.T))


def _eta_task(args):
    cfg, run, eta = args
    contrast = get_contrast(cfg.contrast)
    spec = SourceSpec(cfg.d, (cfg.family,), seed=cfg.seed)
    a = random_mixing_matrix(cfg.d, cfg.seed, run, 0)
    s = sample_sources(spec, cfg.n, stream=(run, 1))
    model = MixingModel(a, eta, make_cubic_perturbation(spec))
    x = mix(model, s)
    whitener = fit_whitener(x)
    z = apply_whitener(whitener, x)
    refs = reference_wtilde(a, whitener, contrast, model, spec)
    opts = SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter)
    est = run_ica(contrast, z, _initial_rows(cfg, run, refs.w_bar), solver=cfg.solver, options=opts,
                  whitener=whitener)
    match = _match_rows(cfg, est.w_rows, refs.w_bar)
    records = []
    for i in range(cfg.d):
        w = est.w_rows[match[i]]
        ok = bool(est.converged[match[i]])
        d_bar = sign_invariant_distance(w, refs.w_bar[i]) if ok else math.nan
        d_tilde = sign_invariant_distance(w, refs.w_tilde[i]) if ok else math.nan
        records.append(("eta", eta, run, i, "dist_w_wbar", d_bar))
        records.append(("eta", eta, run, i, "dist_w_wtilde", d_tilde))
        records.append(("eta", eta, run, i, "converged", float(ok)))
    records.append(("eta", eta, run, RUN_LEVEL_ROW, "one_minus_mcc", 1.0 - mcc(s, est.sources(z)).mcc))
    return records, cfg.d, int(np.sum(~est.converged))


def run_eta_scaling(cfg: EtaScalingConfig, jobs: int = 1) -> ScalingReport:
    """Error of the recovered unmixing against the perturbation size.

    A baseline at ``eta = 0`` (same sources, same mixing matrix) measures the
    sampling floor of every metric; grid points whose median sits below
    ``floor_factor`` times that floor are flagged and left out of the fits.
    """
    cfg.validate()
    grid = cfg.eta_grid
    tasks = [(cfg, run, eta) for eta in [0.0] + grid for run in range(cfg.runs)]
    results = _execute(_eta_task, tasks, jobs)
    report = ScalingReport("eta", grid, {}, {}, asdict(cfg), [cfg.seed])
    for recs, solves, fails in results:
        report.records.extend(recs)
        report.solves += solves
        report.failures += fails
    _aggregate(report, ETA_METRICS, 0.0, cfg.floor_factor)
    for m in ETA_METRICS:
        _fit(report, m, (cfg.fit_lo, cfg.fit_hi))
    if report.failure_fraction > MAX_FAILURE_FRACTION:
        raise ExperimentError(
            f"{report.failures}/{report.solves} row solves did not converge", report)
    return report


# --- dimension scaling ------------------------------------------------------------


@dataclass
class DimScalingConfig:
    d: int = 5
    big_d_grid: tuple = (16, 32, 64, 128, 256)
    mc_points: int = 10_000
    runs: int = 5
    moment_check_dim: int = 100
    seed: int = 0

    def validate(self):
        g = list(self.big_d_grid)
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("big_d_grid must be strictly increasing")
        if min(g) < self.d or self.moment_check_dim < self.d:
            raise ValueError("ambient dimensions must be >= d")


def _dim_task(args):
    cfg, run, big_d = args
    jac = random_gaussian_jacobians(cfg.d, big_d, cfg.mc_points, cfg.seed, run, big_d)
    theta = theta_from_jacobians(jac, p=2.0)
    gram = np.einsum("mki,mkj->mij", jac, jac)
    sq_dev = float(np.mean(np.sum((gram - np.eye(cfg.d)) ** 2, axis=(1, 2))))
    return [
        ("ambient_dim", float(big_d), run, RUN_LEVEL_ROW, "theta2", theta.value),
        ("ambient_dim", float(big_d), run, RUN_LEVEL_ROW, "theta2_std_error", theta.std_error),
        ("ambient_dim", float(big_d), run, RUN_LEVEL_ROW, "gram_sq_dev", sq_dev),
    ]


def run_dim_scaling(cfg: DimScalingConfig, jobs: int = 1) -> ScalingReport:
    """Non-isometry of random Gaussian Jacobians (scaled by 1/sqrt(D)) versus D."""
    cfg.validate()
    grid = [float(b) for b in cfg.big_d_grid]
    dims = list(cfg.big_d_grid)
    check_extra = cfg.moment_check_dim not in dims
    if check_extra:
        dims = dims + [cfg.moment_check_dim]
    tasks = [(cfg, run, big_d) for big_d in dims for run in range(cfg.runs)]
    results = _execute(_dim_task, tasks, jobs)
    report = ScalingReport("ambient_dim", grid, {}, {}, asdict(cfg), [cfg.seed])
    for recs in results:
        report.records.extend(recs)
    _aggregate(report, ("theta2", "gram_sq_dev"), None, 0.0)
    _fit(report, "theta2", (grid[0], grid[-1]))
    _fit(report, "gram_sq_dev", (grid[0], grid[-1]))
    check = [r[5] for r in report.records
             if r[4] == "gram_sq_dev" and r[1] == float(cfg.moment_check_dim)]
    predicted = (cfg.d**2 + cfg.d) / cfg.moment_check_dim
    report.extras["moment_check"] = dict(
        big_d=cfg.moment_check_dim, observed=float(np.mean(check)), predicted=predicted,
        relative_error=float(abs(np.mean(check) - predicted) / predicted),
    )
    return report


# --- near-isometric end to end ---------------------------------------------------------


@dataclass
class IsoIcaConfig:
    d: int = 5
    n: int = 200_000
    runs: int = 5
    eta_lo: float = 1e-3
    eta_hi: float = 1.0
    eta_points: int = 12
    contrast: str = "quartic"
    family: str = "laplace"
    tol: float = 1e-10
    max_iter: int = 500
    theta_mc_points: int = 5000
    fit_lo: float = 0.01
    fit_hi: float = 0.1
    floor_factor: float = 3.0
    seed: int = 0

    @property
    def eta_grid(self) -> list:
        return [float(e) for e in np.logspace(math.log10(self.eta_lo), math.log10(self.eta_hi), self.eta_points)]

    def validate(self):
        if not all(0 < e <= 1 for e in self.eta_grid):
            raise ValueError("eta grid must lie in (0, 1]")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


ISO_METRICS = ("theta2", "one_minus_mcc", "dist_w_wbar")


def _iso_task(args):
    cfg, run, eta = args
    contrast = get_contrast(cfg.contrast)
    spec = SourceSpec(cfg.d, (cfg.family,), seed=cfg.seed)
    q = random_rotation(cfg.d, cfg.seed, run, 0)
    pert = make_smooth_perturbation(spec, stream=(run, 2))
    model = MixingModel(q, eta, pert)
    s = sample_sources(spec, cfg.n, stream=(run, 1))
    x = mix(model, s)
    whitener = fit_whitener(x)
    z = apply_whitener(whitener, x)
    w_bar = ica.reference_wbar(q)
    est = run_ica(contrast, z, w_bar, options=SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter),
                  whitener=whitener)
    points = sample_sources(spec, cfg.theta_mc_points, stream=(run, 4))
    theta = theta_from_jacobians(jacobian_of_mixing(model)(points), p=2.0)
    records = [
        ("eta", eta, run, RUN_LEVEL_ROW, "theta2", theta.value),
        ("eta", eta, run, RUN_LEVEL_ROW, "one_minus_mcc", 1.0 - mcc(s, est.sources(z)).mcc),
    ]
    for i in range(cfg.d):
        ok = bool(est.converged[i])
        records.append(("eta", eta, run, i, "dist_w_wbar",
                        sign_invariant_distance(est.w_rows[i], w_bar[i]) if ok else math.nan))
        records.append(("eta", eta, run, i, "converged", float(ok)))
    return records, cfg.d, int(np.sum(~est.converged))


def run_iso_ica(cfg: IsoIcaConfig, jobs: int = 1) -> ScalingReport:
    """Recovery error against the non-isometry of ``f(s) = Q s + eta psi(s)``.

    ``Q`` is a random rotation and ``psi`` a smooth non-separable field made
    centered and uncorrelated with the sources, so ``f`` is an exact local
    isometry at ``eta = 0``. Integrals are taken against the source law.
    """
    cfg.validate()
    grid = cfg.eta_grid
    tasks = [(cfg, run, eta) for eta in [0.0] + grid for run in range(cfg.runs)]
    results = _execute(_iso_task, tasks, jobs)
    report = ScalingReport("eta", grid, {}, {}, asdict(cfg), [cfg.seed])
    for recs, solves, fails in results:
        report.records.extend(recs)
        report.solves += solves
        report.failures += fails
    _aggregate(report, ISO_METRICS, 0.0, cfg.floor_factor)
    report.floor_flags["theta2"] = [False] * len(grid)
    fit_range = (cfg.fit_lo, cfg.fit_hi)
    _fit(report, "one_minus_mcc", fit_range, x_metric="theta2", name="one_minus_mcc_vs_theta2")
    _fit(report, "one_minus_mcc", fit_range)
    _fit(report, "theta2", fit_range)
    if report.failure_fraction > MAX_FAILURE_FRACTION:
        raise ExperimentError(f"{report.failures}/{report.solves} row solves did not converge", report)
    return report


# --- single runs ----------------------------------------------------------------


@dataclass
class SingleIcaConfig:
    d: int = 5
    n: int = 1_000_000
    eta: float = 0.0
    contrast: str = "quartic"
    family: str = "laplace"
    solver: str = "fixed-point"
    tol: float = 1e-10
    max_iter: int = 500
    seed: int = 0


def run_single_ica(cfg: SingleIcaConfig) -> dict:
    """One cubic-perturbed (or, at ``eta = 0``, linear) ICA run from the oracle start."""
    if not 0 <= cfg.eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    contrast = get_contrast(cfg.contrast)
    spec = SourceSpec(cfg.d, (cfg.family,), seed=cfg.seed)
    a = random_mixing_matrix(cfg.d, cfg.seed, 0, 0)
    s = sample_sources(spec, cfg.n, stream=(0, 1))
    model = MixingModel(a, cfg.eta, make_cubic_perturbation(spec) if cfg.eta else NoPerturbation())
    x = mix(model, s)
    whitener = fit_whitener(x)
    z = apply_whitener(whitener, x)
    w_bar = ica.reference_wbar(a)
    est = run_ica(contrast, z, w_bar, solver=cfg.solver,
                  options=SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter), whitener=whitener)
    dists = [sign_invariant_distance(est.w_rows[i], w_bar[i]) for i in range(cfg.d)]
    return dict(
        mcc=mcc(s, est.sources(z)).mcc,
        max_dist_w_wbar=float(max(dists)),
        dist_w_wbar=dists,
        converged=[bool(c) for c in est.converged],
        iterations=[int(k) for k in est.iterations],
        floor=5.0 * math.sqrt(cfg.d / cfg.n),
    )


@dataclass
class ThetaConfig:
    d: int = 5
    mixing: str = "cubic"
    eta: float = 0.05
    p: float = 2.0
    mc_points: int = 5000
    family: str = "laplace"
    seed: int = 0


def run_theta(cfg: ThetaConfig):
    """Non-isometry of a mixing drawn from ``cfg``, integrated against the source law.

    ``cubic``: random ``A`` plus the cubic field; ``smooth``: random rotation plus
    the smooth non-separable field; ``linear``: random ``A`` alone.
    """
    spec = SourceSpec(cfg.d, (cfg.family,), seed=cfg.seed)
    if cfg.mixing == "cubic":
        model = MixingModel(random_mixing_matrix(cfg.d, cfg.seed, 0, 0), cfg.eta, make_cubic_perturbation(spec))
    elif cfg.mixing == "smooth":
        model = MixingModel(random_rotation(cfg.d, cfg.seed, 0, 0), cfg.eta,
                            make_smooth_perturbation(spec, stream=(0, 2)))
    elif cfg.mixing == "linear":
        model = MixingModel(random_mixing_matrix(cfg.d, cfg.seed, 0, 0))
    else:
        raise ValueError(f"unknown mixing {cfg.mixing!r}")
    if cfg.mc_points < 100:
        raise ValueError("mc_points must be >= 100")
    points = sample_sources(spec, cfg.mc_points, stream=(0, 4))
    return theta_from_jacobians(jacobian_of_mixing(model)(points), p=cfg.p)


# --- bound certificates -------------------------------------------------------------


@dataclass
class BoundsConfig:
    instances: int = 1000
    n: int = 100_000
    d_min: int = 2
    d_max: int = 5
    seed: int = 0


BOUND_CHUNK = 25


def bound_instance(cfg: BoundsConfig, k: int, kind: str):
    """Random ``(z, A, h(z))`` for the decorrelated (``independent``) or ``general`` bound.

    ``z`` has independent coordinates with unequal scales, ``A`` is diagonally
    dominant, and ``h`` is a nonlinear field. For ``independent`` it is made
    centered and uncorrelated with ``z``; for ``general`` a linear leak is added.
    """
    rng = make_rng(cfg.seed, k, 7 if kind == "independent" else 9)
    d = int(rng.integers(cfg.d_min, cfg.d_max + 1))
    fams = tuple(str(f) for f in rng.choice(FAMILIES, size=d))
    s = sample_sources(SourceSpec(d, fams, seed=cfg.seed), cfg.n, stream=(k, 8 if kind == "independent" else 10))
    z = s * rng.uniform(0.5, 2.0, size=d)
    diag = rng.choice([-1.0, 1.0], d) * rng.uniform(0.5, 2.0, d)
    off_scale, h_scale = (0.3, 0.4) if kind == "independent" else (0.15, 0.2)
    a = np.diag(diag) + rng.uniform(0, off_scale) * rng.standard_normal((d, d)) * np.abs(diag)[:, None] / d
    # in-place ufuncs: fresh (n, d) temporaries are page-fault bound at this size
    raw = z @ rng.standard_normal((d, d)).T
    np.tanh(raw, out=raw)
    raw += 0.3 * (np.square(z) @ rng.standard_normal((d, d)).T)
    if kind == "independent":
        raw = center_and_decorrelate(z, raw).residual
    else:
        raw += z @ rng.standard_normal((d, d)).T
    raw *= (rng.uniform(0, h_scale) * np.abs(diag) * np.sqrt(col_sumsq(z - col_mean(z)) / cfg.n)
            / np.sqrt(col_sumsq(raw) / cfg.n))
    h = raw
    return z, a, h


BOUND_COLUMNS = ["lemma", "instance", "d", "c1", "c2", "c3", "bound_value", "observed_mcc", "slack", "holds",
                 "holds_within_slack"]


def _bound_task(args):
    cfg, kind, start, stop = args
    check = verify_mcc_bound_independent if kind == "independent" else verify_mcc_bound_general
    rows = []
    for k in range(start, stop):
        z, a, h = bound_instance(cfg, k, kind)
        c = check(z, a, h)
        rows.append([kind, k, z.shape[1], c.c1, c.c2, c.c3, c.bound_value, c.observed_mcc, c.slack,
                     int(c.holds), int(c.holds_within_slack)])
    return rows


def run_bound_verification(cfg: BoundsConfig, jobs: int = 1) -> list:
    """Certificate rows for ``cfg.instances`` instances of each bound, ordered by (lemma, instance)."""
    if cfg.instances < 1 or not 2 <= cfg.d_min <= cfg.d_max:
        raise ValueError("need instances >= 1 and 2 <= d_min <= d_max")
    tasks = [(cfg, kind, lo, min(lo + BOUND_CHUNK, cfg.instances))
             for kind in ("independent", "general") for lo in range(0, cfg.instances, BOUND_CHUNK)]
    return [row for chunk in _execute(_bound_task, tasks, jobs) for row in chunk]


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])
    return path


# --- output ----------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def config_text(config: dict) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in config.items())


def write_report(report: ScalingReport, out_dir, config_echo: dict | None = None) -> list[Path]:
    """Write records.csv, summary.csv, slopes.csv and config.txt under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "records.csv", out / "summary.csv", out / "slopes.csv", out / "config.txt"]
    with open(paths[0], "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["sweep_var", "value", "run", "row", "metric_name", "metric_value"])
        for rec in sorted(report.records, key=lambda r: (r[1], r[2], r[3], r[4])):
            wr.writerow([_fmt(v) for v in rec])
    with open(paths[1], "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["sweep_var", "value", "metric_name", "median", "q32", "q68", "mean", "floor_dominated"])
        for metric, rows in report.per_point.items():
            for k, (v, p) in enumerate(zip(report.grid, rows)):
                wr.writerow([report.sweep_variable, _fmt(float(v)), metric, _fmt(p["median"]), _fmt(p["q32"]),
                             _fmt(p["q68"]), _fmt(p["mean"]), int(report.floor_flags[metric][k])])
    with open(paths[2], "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["metric_name", "slope", "intercept", "r2", "fit_lo", "fit_hi"])
        for metric, fit in report.slopes.items():
            if fit is None:
                wr.writerow([metric, "nan", "nan", "nan", "nan", "nan"])
            else:
                wr.writerow([metric, _fmt(fit.slope), _fmt(fit.intercept), _fmt(fit.r2),
                             _fmt(fit.fit_lo), _fmt(fit.fit_hi)])
    with open(paths[3], "w") as fh:
        fh.write(config_text(config_echo if config_echo is not None else report.config_echo))
        fh.write(f"measure=P\nsolves={report.solves}\nfailures={report.failures}\n")
        for metric, floor in report.floor.items():
            fh.write(f"floor.{metric}={_fmt(floor)}\n")
        for key, val in report.extras.get("moment_check", {}).items():
            fh.write(f"moment_check.{key}={_fmt(val)}\n")
    return paths
