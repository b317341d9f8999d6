import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isoica.model import MixingModel, SourceSpec, mix, random_mixing_matrix, sample_sources
from isoica.whiten import Whitener, apply_whitener, fit_whitener


@given(st.integers(0, 2**31))
def test_whitened_sample_has_identity_covariance(seed):
    spec = SourceSpec(4, seed=seed % 1000)
    x = mix(MixingModel(random_mixing_matrix(4, seed)), sample_sources(spec, 2000)) + 3.0
    w = fit_whitener(x)
    z = apply_whitener(w, x)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(z.T @ z / len(z), np.eye(4), atol=1e-8)
    np.testing.assert_allclose(w.inv_sqrt, w.inv_sqrt.T)
    np.testing.assert_allclose(w.sqrt @ w.inv_sqrt, np.eye(4), atol=1e-8)


def test_population_covariance_matches():
    a = random_mixing_matrix(3, 0)
    x = mix(MixingModel(a), sample_sources(SourceSpec(3), 10**6))
    w = fit_whitener(x)
    assert np.linalg.norm(w.cov - a @ a.T) <= 0.01 * np.linalg.norm(a @ a.T)
    assert w.n_fit == 10**6


def test_from_covariance():
    w = Whitener.from_covariance(np.diag([4.0, 9.0]))
    np.testing.assert_allclose(w.inv_sqrt, np.diag([0.5, 1 / 3]))
    np.testing.assert_allclose(w.sqrt, np.diag([2.0, 3.0]))
    with pytest.raises(ValueError):
        Whitener.from_covariance(np.diag([1.0, 0.0]))


def test_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        fit_whitener(rng.standard_normal((20, 3)))
    x = rng.standard_normal((500, 2))
    with pytest.raises(ValueError):
        fit_whitener(np.column_stack([x, x[:, 0]]))
    with pytest.raises(ValueError):
        apply_whitener(fit_whitener(x), np.zeros((5, 3)))
