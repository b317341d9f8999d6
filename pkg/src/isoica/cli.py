"""Command-line front end.

Configuration precedence is flag > config file (flat ``key=value``) > the
``RII_SEED`` environment variable (seed only) > built-in default.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import experiments as ex

SUBCOMMANDS = ("scaling", "dim-scaling", "iso-ica", "ica", "verify-bounds", "theta")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


@dataclass
class RunConfig:
    subcommand: str = "scaling"
    d: int = 5
    samples: int = 200_000
    runs: int = 5
    eta: float = 0.05
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
    big_d_grid: tuple = (16, 32, 64, 128, 256)
    jacobian_draws: int = 10_000
    moment_check_dim: int = 100
    mixing: str = "cubic"
    p: float = 2.0
    mc_points: int = 5000
    instances: int = 1000
    output_dir: str = "results"
    seed: int = 0

    def to_text(self) -> str:
        return "".join(f"{f.name}={_encode(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(**parse_config_text(text))


HELP = {
    "d": "latent dimension",
    "samples": "samples per run",
    "runs": "independent runs per grid point",
    "eta": "perturbation size for single runs",
    "eta_lo": "smallest eta of the log-spaced grid",
    "eta_hi": "largest eta of the log-spaced grid",
    "eta_points": "number of grid points",
    "contrast": "contrast function (quartic | logcosh)",
    "family": "source family (laplace | uniform | gaussian)",
    "solver": "row solver (fixed-point | gradient)",
    "init": "row initialization (oracle | random)",
    "tol": "solver tolerance",
    "max_iter": "solver iteration cap",
    "fit_lo": "lower end of the slope fit range",
    "fit_hi": "upper end of the slope fit range",
    "floor_factor": "points with median below factor x floor are floor-dominated",
    "big_d_grid": "comma-separated ambient dimensions",
    "jacobian_draws": "Jacobian draws per ambient dimension",
    "moment_check_dim": "ambient dimension of the second-moment check",
    "mixing": "mixing for theta (cubic | smooth | linear)",
    "p": "exponent of the non-isometry functional",
    "mc_points": "Monte Carlo points for theta",
    "instances": "random instances per bound",
}

CHOICES = {
    "contrast": ("quartic", "logcosh"),
    "family": ("laplace", "uniform", "gaussian"),
    "solver": ("fixed-point", "gradient"),
    "init": ("oracle", "random"),
    "mixing": ("cubic", "smooth", "linear"),
}

# flags meaningful for each subcommand (besides the common ones)
SUBCOMMAND_FIELDS = {
    "scaling": ("d", "samples", "runs", "eta_lo", "eta_hi", "eta_points", "contrast", "family", "solver", "init",
                "tol", "max_iter", "fit_lo", "fit_hi", "floor_factor"),
    "dim-scaling": ("d", "big_d_grid", "jacobian_draws", "runs", "moment_check_dim"),
    "iso-ica": ("d", "samples", "runs", "eta_lo", "eta_hi", "eta_points", "contrast", "family", "tol", "max_iter",
                "mc_points", "fit_lo", "fit_hi", "floor_factor"),
    "ica": ("d", "samples", "eta", "contrast", "family", "solver", "tol", "max_iter"),
    "verify-bounds": ("instances", "samples"),
    "theta": ("d", "mixing", "eta", "p", "mc_points", "family"),
}

# defaults that differ from RunConfig's when a subcommand runs
SUBCOMMAND_DEFAULTS = {
    "ica": {"samples": 1_000_000, "eta": 0.0},
    "verify-bounds": {"samples": 100_000},
}

# acceptance thresholds enforced by --check
CHECKS = {
    "scaling": {"one_minus_mcc": (1.6, 2.4), "dist_w_wbar": (0.75, 1.25), "dist_w_wtilde": (1.5, 2.5),
                "min_converged_fraction": 0.95},
    "dim-scaling": {"theta2": (-0.65, -0.35), "moment_relative_error": 0.15},
    "iso-ica": {"one_minus_mcc_vs_theta2": (1.5, 2.5)},
    "ica": {"min_mcc": 0.999, "floor_multiple": 5.0},
}


class CliError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _encode(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _decode(name: str, raw: str):
    kinds = {f.name: f.default for f in fields(RunConfig)}
    if name not in kinds:
        raise CliError("config", f"unknown key {name!r}")
    default = kinds[name]
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise CliError("config", f"bad value for {name}: {raw!r}") from exc
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("config", f"line {lineno}: expected key=value")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        out[key] = _decode(key, raw)
    return out


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isoica", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    base = RunConfig()
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run {name}")
        for key in SUBCOMMAND_FIELDS[name]:
            default = SUBCOMMAND_DEFAULTS.get(name, {}).get(key, getattr(base, key))
            p.add_argument(_flag(key), dest=key, type=lambda raw, k=key: _decode(k, raw), default=None,
                           choices=CHOICES.get(key), help=f"{HELP[key]} (default: {_encode(default)})")
        p.add_argument("--config", default=None, help="flat key=value config file (default: none)")
        p.add_argument("--seed", type=int, default=None, help="master seed (default: $RII_SEED or 0)")
        p.add_argument("--out", dest="output_dir", default=None, help=f"output directory (default: {base.output_dir})")
        p.add_argument("--jobs", type=int, default=None,
                       help=f"worker processes (default: available CPUs = {ex.default_jobs()})")
        p.add_argument("--check", action="store_true", help="exit 1 if acceptance thresholds fail (default: off)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {"subcommand": args.subcommand}
    values.update(SUBCOMMAND_DEFAULTS.get(args.subcommand, {}))
    env_seed = os.environ.get("RII_SEED")
    if env_seed is not None:
        try:
            values["seed"] = int(env_seed)
        except ValueError as exc:
            raise CliError("config", f"RII_SEED is not an integer: {env_seed!r}") from exc
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise CliError("config", f"cannot read {args.config}: {exc.strerror}") from exc
        file_values = parse_config_text(text)
        file_values.pop("subcommand", None)
        values.update(file_values)
    for key in SUBCOMMAND_FIELDS[args.subcommand] + ("seed", "output_dir"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values)


def _in_band(value, band) -> bool:
    return value is not None and band[0] <= value <= band[1]


def _slope_value(report, name):
    fit = report.slopes.get(name)
    return None if fit is None else fit.slope


def _check_lines(results: list[tuple[str, bool, str]]) -> bool:
    for name, ok, detail in results:
        print(f"check {name}: {'PASS' if ok else 'FAIL'} {detail}")
    return all(ok for _, ok, _ in results)


def _write_echo(cfg: RunConfig, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())


def cmd_scaling(cfg: RunConfig, jobs: int, check: bool) -> int:
    ecfg = ex.EtaScalingConfig(d=cfg.d, n=cfg.samples, runs=cfg.runs, eta_lo=cfg.eta_lo, eta_hi=cfg.eta_hi,
                               eta_points=cfg.eta_points, contrast=cfg.contrast, family=cfg.family, solver=cfg.solver,
                               init=cfg.init, tol=cfg.tol, max_iter=cfg.max_iter, fit_lo=cfg.fit_lo, fit_hi=cfg.fit_hi,
                               floor_factor=cfg.floor_factor, seed=cfg.seed)
    try:
        report = ex.run_eta_scaling(ecfg, jobs=jobs)
    except ex.ExperimentError as exc:
        if exc.report is not None:
            ex.write_report(exc.report, cfg.output_dir, cfg_echo(cfg))
        raise CliError("solver", str(exc)) from exc
    ex.write_report(report, cfg.output_dir, cfg_echo(cfg))
    _print_slopes(report)
    if not check:
        return EXIT_OK
    th = CHECKS["scaling"]
    results = [(m, _in_band(_slope_value(report, m), th[m]), f"slope={_slope_value(report, m)} band={th[m]}")
               for m in ("one_minus_mcc", "dist_w_wbar", "dist_w_wtilde")]
    conv = 1.0 - report.failure_fraction
    results.append(("converged", conv >= th["min_converged_fraction"], f"fraction={conv:.4f}"))
    return EXIT_OK if _check_lines(results) else EXIT_CHECK_FAILED


def cmd_dim_scaling(cfg: RunConfig, jobs: int, check: bool) -> int:
    dcfg = ex.DimScalingConfig(d=cfg.d, big_d_grid=tuple(cfg.big_d_grid), mc_points=cfg.jacobian_draws,
                               runs=cfg.runs, moment_check_dim=cfg.moment_check_dim, seed=cfg.seed)
    report = ex.run_dim_scaling(dcfg, jobs=jobs)
    ex.write_report(report, cfg.output_dir, cfg_echo(cfg))
    _print_slopes(report)
    mc = report.extras["moment_check"]
    print(f"moment_check big_d={mc['big_d']} observed={mc['observed']:.6g} predicted={mc['predicted']:.6g}")
    if not check:
        return EXIT_OK
    th = CHECKS["dim-scaling"]
    results = [("theta2", _in_band(_slope_value(report, "theta2"), th["theta2"]),
                f"slope={_slope_value(report, 'theta2')} band={th['theta2']}"),
               ("moment", mc["relative_error"] <= th["moment_relative_error"],
                f"relative_error={mc['relative_error']:.4f}")]
    return EXIT_OK if _check_lines(results) else EXIT_CHECK_FAILED


def cmd_iso_ica(cfg: RunConfig, jobs: int, check: bool) -> int:
    icfg = ex.IsoIcaConfig(d=cfg.d, n=cfg.samples, runs=cfg.runs, eta_lo=cfg.eta_lo, eta_hi=cfg.eta_hi,
                           eta_points=cfg.eta_points, contrast=cfg.contrast, family=cfg.family, tol=cfg.tol,
                           max_iter=cfg.max_iter, theta_mc_points=cfg.mc_points, fit_lo=cfg.fit_lo,
                           fit_hi=cfg.fit_hi, floor_factor=cfg.floor_factor, seed=cfg.seed)
    try:
        report = ex.run_iso_ica(icfg, jobs=jobs)
    except ex.ExperimentError as exc:
        raise CliError("solver", str(exc)) from exc
    ex.write_report(report, cfg.output_dir, cfg_echo(cfg))
    _print_slopes(report)
    if not check:
        return EXIT_OK
    band = CHECKS["iso-ica"]["one_minus_mcc_vs_theta2"]
    slope = _slope_value(report, "one_minus_mcc_vs_theta2")
    ok = _check_lines([("one_minus_mcc_vs_theta2", _in_band(slope, band), f"slope={slope} band={band}")])
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_ica(cfg: RunConfig, jobs: int, check: bool) -> int:
    res = ex.run_single_ica(ex.SingleIcaConfig(d=cfg.d, n=cfg.samples, eta=cfg.eta, contrast=cfg.contrast,
                                               family=cfg.family, solver=cfg.solver, tol=cfg.tol,
                                               max_iter=cfg.max_iter, seed=cfg.seed))
    out = Path(cfg.output_dir)
    _write_echo(cfg, out)
    rows = [[i, res["dist_w_wbar"][i], int(res["converged"][i]), res["iterations"][i]] for i in range(cfg.d)]
    ex.write_rows(out / "rows.csv", ["row", "dist_w_wbar", "converged", "iterations"], rows)
    ex.write_rows(out / "summary.csv", ["metric_name", "metric_value"],
                  [["mcc", res["mcc"]], ["max_dist_w_wbar", res["max_dist_w_wbar"]], ["floor", res["floor"]]])
    print(f"mcc={res['mcc']:.6f} max_dist_w_wbar={res['max_dist_w_wbar']:.6g} floor={res['floor']:.6g}")
    if not check:
        return EXIT_OK
    th = CHECKS["ica"]
    ok = _check_lines([
        ("mcc", res["mcc"] >= th["min_mcc"], f"mcc={res['mcc']:.6f}"),
        ("dist_w_wbar", res["max_dist_w_wbar"] <= th["floor_multiple"] * math.sqrt(cfg.d / cfg.samples),
         f"max={res['max_dist_w_wbar']:.6g}"),
    ])
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify_bounds(cfg: RunConfig, jobs: int, check: bool) -> int:
    rows = ex.run_bound_verification(ex.BoundsConfig(instances=cfg.instances, n=cfg.samples, seed=cfg.seed), jobs)
    out = Path(cfg.output_dir)
    _write_echo(cfg, out)
    ex.write_rows(out / "certificates.csv", ex.BOUND_COLUMNS, rows)
    results = []
    for kind in ("independent", "general"):
        kind_rows = [r for r in rows if r[0] == kind]
        violations = sum(1 - r[-1] for r in kind_rows)
        margin = min(r[7] - r[6] for r in kind_rows)
        print(f"{kind}: instances={len(kind_rows)} violations={violations} min_margin={margin:.6g}")
        results.append((kind, violations == 0, f"violations={violations}"))
    if not check:
        return EXIT_OK
    return EXIT_OK if _check_lines(results) else EXIT_CHECK_FAILED


def cmd_theta(cfg: RunConfig, jobs: int, check: bool) -> int:
    est = ex.run_theta(ex.ThetaConfig(d=cfg.d, mixing=cfg.mixing, eta=cfg.eta, p=cfg.p, mc_points=cfg.mc_points,
                                      family=cfg.family, seed=cfg.seed))
    out = Path(cfg.output_dir)
    _write_echo(cfg, out)
    ex.write_rows(out / "theta.csv", ["p", "value", "std_error", "mc_points", "measure"],
                  [[est.p, est.value, est.std_error, est.mc_points, est.measure]])
    print(f"theta p={_encode(est.p)} value={est.value:.6g} std_error={est.std_error:.3g} mc_points={est.mc_points}")
    return EXIT_OK


COMMANDS = {
    "scaling": cmd_scaling,
    "dim-scaling": cmd_dim_scaling,
    "iso-ica": cmd_iso_ica,
    "ica": cmd_ica,
    "verify-bounds": cmd_verify_bounds,
    "theta": cmd_theta,
}


def cfg_echo(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def _print_slopes(report):
    for name, fit in report.slopes.items():
        if fit is None:
            print(f"slope {name}: n/a ({report.extras.get('slope_notes', {}).get(name, '')})")
        else:
            print(f"slope {name}: {fit.slope:.4f} (r2={fit.r2:.4f}, points={fit.n_points})")


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        jobs = args.jobs if args.jobs is not None else ex.default_jobs()
        if jobs < 1:
            raise CliError("config", "--jobs must be >= 1")
        with np.errstate(over="ignore"):
            return COMMANDS[cfg.subcommand](cfg, jobs, args.check)
    except CliError as exc:
        print(f"isoica: error: code={exc.code} msg={exc}", file=sys.stderr)
        return EXIT_USAGE if exc.code == "config" else EXIT_ERROR
    except (ValueError, RuntimeError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"isoica: error: code={type(exc).__name__} msg={msg}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(dispatch())
