import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isoica.linalg_so import rotation_2d
from isoica.model import (
    FAMILIES,
    DiscreteTable,
    JacobianField,
    MixingModel,
    NoPerturbation,
    SourceSpec,
    estimate_theta,
    expect,
    jacobian_of_mixing,
    make_cubic_perturbation,
    make_smooth_perturbation,
    mix,
    moment,
    random_gaussian_jacobians,
    random_mixing_matrix,
    random_rotation,
    sample_sources,
    theta_from_jacobians,
)

N = 10**6


def test_laplace_fourth_and_sixth_moments():
    s = sample_sources(SourceSpec(1, ("laplace",), seed=0), N)[:, 0]
    assert np.mean(s**4) == pytest.approx(6.0, abs=0.1)
    assert np.mean(s**6) == pytest.approx(90.0, abs=3.0)
    assert moment("laplace", 4) == pytest.approx(6.0)
    assert moment("laplace", 6) == pytest.approx(90.0)


def test_laplace_sixth_moment_large_sample():
    # the sixth sample moment has standard error ~2.7 at 1e6 draws; at 1e7 it is ~0.9
    s = sample_sources(SourceSpec(1, ("laplace",), seed=1), 10 * N)[:, 0]
    assert np.mean(s**6) == pytest.approx(90.0, abs=3.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_standardization(family):
    s = sample_sources(SourceSpec(2, (family,), seed=1), N)
    assert np.all(np.abs(s.mean(axis=0)) <= 0.004)
    assert np.all(np.abs(s.var(axis=0) - 1) <= 0.008)


def test_discrete_table_is_standardized():
    t = DiscreteTable((0.0, 1.0, 5.0), (0.5, 0.3, 0.2))
    assert moment(t, 1) == pytest.approx(0.0, abs=1e-12)
    assert moment(t, 2) == pytest.approx(1.0)
    s = sample_sources(SourceSpec(1, (t,), seed=0), 10**5)
    assert set(np.unique(s)) <= set(t.values)
    with pytest.raises(ValueError):
        DiscreteTable((1.0, 1.0), (0.5, 0.5))


def test_sampling_is_deterministic_and_stream_keyed():
    spec = SourceSpec(3, ("laplace", "uniform", "gaussian"), seed=9)
    a = sample_sources(spec, 100, stream=(1, 2))
    np.testing.assert_array_equal(a, sample_sources(spec, 100, stream=(1, 2)))
    assert not np.array_equal(a, sample_sources(spec, 100, stream=(1, 3)))


def test_bad_specs():
    with pytest.raises(ValueError):
        SourceSpec(2, ("cauchy",))
    with pytest.raises(ValueError):
        SourceSpec(3, ("laplace", "uniform"))
    with pytest.raises(ValueError):
        sample_sources(SourceSpec(2), 0)


@pytest.mark.parametrize("family,k", [(f, k) for f in FAMILIES for k in (2, 4, 6)])
def test_quadrature_matches_closed_form_moments(family, k):
    assert expect(family, lambda x: x**k) == pytest.approx(moment(family, k), rel=1e-9)


def test_cubic_constants_laplace_and_gaussian():
    lap = make_cubic_perturbation(SourceSpec(1, ("laplace",)))
    assert lap.beta[0] == pytest.approx(6.0)
    assert lap.shift[0] == pytest.approx(0.0, abs=1e-12)
    assert lap.scale[0] == pytest.approx(1 / math.sqrt(54))
    gau = make_cubic_perturbation(SourceSpec(1, ("gaussian",)))
    assert gau.beta[0] == pytest.approx(3.0)
    assert gau.scale[0] == pytest.approx(1 / math.sqrt(6))
    uni = make_cubic_perturbation(SourceSpec(1, ("uniform",)))
    assert uni.shift[0] == pytest.approx(0.0, abs=1e-12)
    assert uni.beta[0] == pytest.approx(1.8)


def test_cubic_constants_against_monte_carlo():
    spec = SourceSpec(3, ("laplace", "uniform", "gaussian"))
    exact = make_cubic_perturbation(spec)
    mc = make_cubic_perturbation(spec, method="mc", mc=2 * 10**6)
    np.testing.assert_allclose(mc.beta, exact.beta, rtol=0.03)
    np.testing.assert_allclose(mc.scale, exact.scale, rtol=0.05)


def test_cubic_decorrelation_and_unit_norm():
    spec = SourceSpec(3, ("laplace", "uniform", "gaussian"), seed=2)
    h = make_cubic_perturbation(spec)
    n = 10**6
    s = sample_sources(spec, n)
    hs = h(s)
    assert np.all(np.abs(hs.mean(axis=0)) <= 8 / math.sqrt(n))
    cross = s.T @ hs / n
    off = ~np.eye(3, dtype=bool)
    assert np.all(np.abs(cross[off]) <= 8 / math.sqrt(n))
    # S_i h_i(S) is heavy tailed (sd ~5.7 for Laplace), so scale by its spread
    sd = np.std(s * hs, axis=0)
    assert np.all(np.abs(np.diag(cross)) <= 8 * sd / math.sqrt(n))
    np.testing.assert_allclose(np.mean(hs**2, axis=0), 1.0, atol=0.05)


def test_mix_identity_and_covariance():
    spec = SourceSpec(3, seed=4)
    s = sample_sources(spec, N)
    np.testing.assert_array_equal(mix(MixingModel(np.eye(3)), s), s)
    a = random_mixing_matrix(3, 1)
    x = mix(MixingModel(a), s)
    aat = a @ a.T
    assert np.linalg.norm(np.cov(x.T, bias=True) - aat) <= 0.01 * np.linalg.norm(aat)


def test_mix_cross_moment_with_perturbation():
    spec = SourceSpec(3, seed=5)
    n = N
    s = sample_sources(spec, n)
    a = random_mixing_matrix(3, 2)
    eta = 0.1
    x = mix(MixingModel(a, eta, make_cubic_perturbation(spec)), s)
    gap = x.T @ s / n - a @ (s.T @ s / n)
    hs = make_cubic_perturbation(spec)(s)
    spread = np.sqrt(np.mean(hs[:, :, None] ** 2 * s[:, None, :] ** 2, axis=0))
    assert np.all(np.abs(gap) <= 8 * eta * np.maximum(1.0, spread) / math.sqrt(n))


def test_mix_shape_errors():
    with pytest.raises(ValueError):
        mix(MixingModel(np.eye(2)), np.zeros((4, 3)))
    with pytest.raises(ValueError):
        MixingModel(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        MixingModel(np.eye(2), eta=-1.0)


def test_random_mixing_matrix_statistics():
    a = random_mixing_matrix(5, 11)
    np.testing.assert_array_equal(a, random_mixing_matrix(5, 11))
    assert np.linalg.det(a) != 0
    norms = [np.sum(random_mixing_matrix(5, 0, k) ** 2) for k in range(1000)]
    assert np.mean(norms) == pytest.approx(5.0, rel=0.1)
    big = sum(np.sum(np.abs(random_mixing_matrix(2, 0, k)) > 8 / math.sqrt(2)) for k in range(1000))
    assert big < 1
    assert np.linalg.cond(a) <= 1e3


def test_random_rotation_in_so():
    q = random_rotation(4, 3)
    np.testing.assert_allclose(q.T @ q, np.eye(4), atol=1e-12)
    assert np.linalg.det(q) == pytest.approx(1.0)


def test_jacobian_examples():
    a = random_mixing_matrix(3, 7)
    jf = jacobian_of_mixing(MixingModel(a))
    pts = sample_sources(SourceSpec(3), 5)
    np.testing.assert_allclose(jf(pts), np.broadcast_to(a, (5, 3, 3)))
    h = make_cubic_perturbation(SourceSpec(1))
    eta = 0.3
    j0 = jacobian_of_mixing(MixingModel(np.eye(1), eta, h))(np.zeros((1, 1)))
    assert j0[0, 0, 0] == pytest.approx(1 - eta * h.scale[0] * h.beta[0])


@pytest.mark.parametrize("kind", ["cubic", "smooth"])
def test_finite_difference_matches_analytic(kind):
    spec = SourceSpec(4, seed=1)
    a = random_mixing_matrix(4, 3)
    pert = make_cubic_perturbation(spec) if kind == "cubic" else make_smooth_perturbation(spec, n_fit=10**4)
    model = MixingModel(a, 0.2, pert)
    pts = sample_sources(spec, 100, stream=(9,))
    gap = np.max(np.abs(jacobian_of_mixing(model)(pts) - jacobian_of_mixing(model, "finite-difference")(pts)))
    assert gap <= 1e-6 * (1 + np.linalg.norm(a))


def test_smooth_perturbation_is_centered_and_decorrelated():
    spec = SourceSpec(3, seed=6)
    psi = make_smooth_perturbation(spec, n_fit=2 * 10**5)
    s = sample_sources(spec, 10**6, stream=(4,))
    v = psi(s)
    assert np.all(np.abs(v.mean(axis=0)) <= 0.01)
    assert np.all(np.abs(s.T @ v / len(s)) <= 0.01)
    np.testing.assert_allclose(np.mean(v**2, axis=0), 1.0, atol=0.02)


def _constant_field(m):
    return JacobianField(lambda s: np.broadcast_to(m, (s.shape[0],) + m.shape).copy())


def test_theta_examples():
    uniform_square = lambda k: np.random.default_rng(0).uniform(0, 1, size=(k, 2))
    assert estimate_theta(_constant_field(rotation_2d(0.4)), uniform_square).value == pytest.approx(0, abs=1e-12)
    est = estimate_theta(_constant_field(np.diag([2.0, 1.0])), uniform_square, p=2, mc_points=1000)
    assert est.value == pytest.approx(math.sqrt(1.25), abs=1e-12)
    assert est.std_error == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        estimate_theta(_constant_field(np.eye(2)), uniform_square, mc_points=10)
    with pytest.raises(ValueError):
        theta_from_jacobians(np.ones((5, 2, 2)) + np.eye(2), p=1.0)


def test_theta_is_linear_in_eta():
    spec = SourceSpec(3, seed=0)
    q = random_rotation(3, 1)
    psi = make_smooth_perturbation(spec, n_fit=10**5)
    etas = np.array([1e-3, 1e-2, 1e-1])
    vals = [estimate_theta(jacobian_of_mixing(MixingModel(q, e, psi)), spec).value for e in etas]
    slope = np.polyfit(np.log(etas), np.log(vals), 1)[0]
    assert 0.9 <= slope <= 1.1


@given(st.integers(0, 2**31))
def test_theta_left_rotation_invariance(seed):
    spec = SourceSpec(3, seed=1)
    model = MixingModel(random_rotation(3, 5), 0.2, make_cubic_perturbation(spec))
    q = random_rotation(3, seed)
    base = jacobian_of_mixing(model)
    rotated = JacobianField(lambda s: q @ base(s))
    a = estimate_theta(base, spec, mc_points=500)
    b = estimate_theta(rotated, spec, mc_points=500)
    assert b.value == pytest.approx(a.value, abs=max(a.std_error, 1e-9))


def test_gaussian_jacobian_second_moment():
    jac = random_gaussian_jacobians(5, 100, 10**4, 0)
    gram = np.einsum("mki,mkj->mij", jac, jac)
    sq = np.mean(np.sum((gram - np.eye(5)) ** 2, axis=(1, 2)))
    assert sq == pytest.approx(0.30, rel=0.15)


def test_gaussian_jacobian_first_moment_rate():
    for big_d in (16, 64, 256):
        m = 4000
        jac = random_gaussian_jacobians(3, big_d, m, 1, big_d)
        mean_gram = np.einsum("mki,mkj->ij", jac, jac) / m
        assert np.max(np.abs(mean_gram - np.eye(3))) <= 5 * math.sqrt(2) / math.sqrt(m * big_d)


def test_gaussian_jacobian_scalar_case():
    big_d = 50
    jac = random_gaussian_jacobians(1, big_d, 10**5, 2)
    diag = np.sum(jac[:, :, 0] ** 2, axis=1)
    assert diag.mean() == pytest.approx(1.0, abs=0.01)
    assert diag.var() == pytest.approx(2 / big_d, rel=0.05)


def test_no_perturbation_tag():
    assert MixingModel(np.eye(2)).tag == "none"
    assert isinstance(MixingModel(np.eye(2)).perturbation, NoPerturbation)
