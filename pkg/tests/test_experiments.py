import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isoica.experiments import (
    BoundsConfig,
    DimScalingConfig,
    EtaScalingConfig,
    ExperimentError,
    IsoIcaConfig,
    fit_loglog_slope,
    run_bound_verification,
    run_dim_scaling,
    run_eta_scaling,
    run_iso_ica,
    write_report,
)

SMALL_ETA = dict(d=3, n=5000, runs=2, eta_lo=0.01, eta_hi=0.1, eta_points=4)


def test_slope_of_exact_power():
    xs = np.logspace(-2, -1, 7)
    fit = fit_loglog_slope(list(zip(xs, xs**2)), (0.01, 0.1))
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)


def test_slope_and_intercept_of_linear():
    xs = np.logspace(-3, 0, 9)
    fit = fit_loglog_slope(list(zip(xs, 3 * xs)), (1e-3, 1.0))
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)


def test_slope_of_mixed_power():
    xs = np.logspace(-3, 0, 12)
    fit = fit_loglog_slope(list(zip(xs, xs**2 + xs**3)), (0.01, 0.1))
    # oracle: ordinary least squares written out on the same in-range points
    sel = (xs >= 0.01) & (xs <= 0.1)
    lx, ly = np.log(xs[sel]), np.log(xs[sel] ** 2 + xs[sel] ** 3)
    expected = np.sum((lx - lx.mean()) * (ly - ly.mean())) / np.sum((lx - lx.mean()) ** 2)
    assert fit.slope == pytest.approx(expected, abs=1e-12)
    assert 2.0 <= fit.slope <= 2.1
    assert fit.n_points == int(sel.sum())


def test_slope_errors():
    with pytest.raises(ValueError):
        fit_loglog_slope([(0.02, 1.0), (0.05, 2.0)], (0.01, 0.1))
    with pytest.raises(ValueError):
        fit_loglog_slope([(0.02, 1.0), (0.03, -1.0), (0.05, 2.0)], (0.01, 0.1))


@given(st.floats(-3, 3), st.floats(-5, 5))
def test_slope_recovers_any_power_law(k, c):
    xs = np.logspace(-2, 0, 6)
    fit = fit_loglog_slope(list(zip(xs, math.exp(c) * xs**k)), (0.01, 1.0))
    assert fit.slope == pytest.approx(k, abs=1e-9)


@pytest.fixture(scope="module")
def small_eta_report():
    return run_eta_scaling(EtaScalingConfig(**SMALL_ETA))


def test_eta_report_shape(small_eta_report):
    r = small_eta_report
    assert r.sweep_variable == "eta"
    assert all(b > a for a, b in zip(r.grid, r.grid[1:]))
    for metric, points in r.per_point.items():
        assert len(points) == len(r.grid)
        for p in points:
            assert p["q32"] <= p["median"] <= p["q68"]
    assert r.solves == 3 * 2 * 5  # rows x runs x (grid + baseline)
    assert set(r.floor) == {"dist_w_wbar", "dist_w_wtilde", "one_minus_mcc"}


def test_eta_fit_uses_only_points_in_range():
    r = run_eta_scaling(EtaScalingConfig(**{**SMALL_ETA, "eta_lo": 0.003, "eta_hi": 0.3, "eta_points": 9,
                                            "floor_factor": 0.0}))
    for name, fit in r.slopes.items():
        if fit is not None:
            inside = [v for v in r.grid if fit.fit_lo <= v <= fit.fit_hi]
            assert fit.n_points == len(inside)
            assert (fit.fit_lo, fit.fit_hi) == (0.01, 0.1)


def test_floor_points_excluded():
    cfg = EtaScalingConfig(**{**SMALL_ETA, "floor_factor": 1e6})
    r = run_eta_scaling(cfg)
    assert all(all(flags) for flags in r.floor_flags.values())
    assert all(fit is None for fit in r.slopes.values())


def test_solver_failures_fail_the_run():
    cfg = EtaScalingConfig(**{**SMALL_ETA, "max_iter": 1})
    with pytest.raises(ExperimentError) as info:
        run_eta_scaling(cfg)
    assert info.value.report.failure_fraction > 0.05


def test_config_validation():
    with pytest.raises(ValueError):
        run_eta_scaling(EtaScalingConfig(**{**SMALL_ETA, "eta_hi": 2.0}))
    with pytest.raises(ValueError):
        run_eta_scaling(EtaScalingConfig(**{**SMALL_ETA, "runs": 0}))
    with pytest.raises(ValueError):
        run_dim_scaling(DimScalingConfig(big_d_grid=(32, 16)))
    with pytest.raises(ValueError):
        run_dim_scaling(DimScalingConfig(d=5, big_d_grid=(4, 16)))


def test_random_init_runs():
    # without deflation several rows may find the same component, so only shape is checked
    r = run_eta_scaling(EtaScalingConfig(**{**SMALL_ETA, "init": "random", "n": 20_000}))
    dists = [rec[5] for rec in r.records if rec[4] == "dist_w_wbar"]
    assert len(dists) == 3 * 2 * 5
    assert all(0 <= v <= math.sqrt(2) + 1e-12 for v in dists if math.isfinite(v))


def test_dim_scaling_small():
    r = run_dim_scaling(DimScalingConfig(mc_points=2000, runs=2))
    assert -0.65 <= r.slopes["theta2"].slope <= -0.35
    mc = r.extras["moment_check"]
    assert mc["predicted"] == pytest.approx(0.30)
    assert mc["relative_error"] <= 0.15


def test_dim_scaling_square_case_is_far_from_isometric():
    r = run_dim_scaling(DimScalingConfig(d=2, big_d_grid=(2, 4, 8), mc_points=2000, runs=1, moment_check_dim=8))
    assert r.per_point["theta2"][0]["median"] > 1.0


def test_iso_ica_small():
    r = run_iso_ica(IsoIcaConfig(d=3, n=5000, runs=2, eta_lo=0.01, eta_hi=0.1, eta_points=3))
    thetas = [p["median"] for p in r.per_point["theta2"]]
    assert all(b > a for a, b in zip(thetas, thetas[1:]))
    assert r.floor["theta2"] < 1e-10


def test_bound_verification_small():
    rows = run_bound_verification(BoundsConfig(instances=30, n=5000))
    assert len(rows) == 60
    assert sum(1 - r[-1] for r in rows) == 0


def _read_all(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_parallel_matches_serial(tmp_path):
    cfg = EtaScalingConfig(**SMALL_ETA)
    write_report(run_eta_scaling(cfg, jobs=1), tmp_path / "serial")
    write_report(run_eta_scaling(cfg, jobs=2), tmp_path / "parallel")
    assert _read_all(tmp_path / "serial") == _read_all(tmp_path / "parallel")
    a = run_bound_verification(BoundsConfig(instances=30, n=5000), jobs=1)
    b = run_bound_verification(BoundsConfig(instances=30, n=5000), jobs=2)
    assert a == b


def test_csv_columns(tmp_path, small_eta_report):
    paths = write_report(small_eta_report, tmp_path)
    heads = {p.name: p.read_text().splitlines()[0] for p in paths if p.suffix == ".csv"}
    assert heads["records.csv"] == "sweep_var,value,run,row,metric_name,metric_value"
    assert heads["summary.csv"].startswith("sweep_var,value,metric_name,median,q32,q68")
    assert heads["slopes.csv"] == "metric_name,slope,intercept,r2,fit_lo,fit_hi"
    assert "seed=0" in (tmp_path / "config.txt").read_text()
