"""Symmetric (ZCA) whitening with a 1/n covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg_so import inv_sqrt_spd, sqrt_spd


@dataclass(frozen=True)
class Whitener:
    mean: np.ndarray
    cov: np.ndarray
    inv_sqrt: np.ndarray
    sqrt: np.ndarray
    n_fit: int

    @classmethod
    def from_covariance(cls, cov, mean=None, n_fit: int = 0) -> "Whitener":
        """Whitener for a known covariance (e.g. a population one)."""
        cov = np.asarray(cov, dtype=float)
        if mean is None:
            mean = np.zeros(cov.shape[0])
        try:
            inv_sqrt = inv_sqrt_spd(cov)
        except ValueError as exc:
            raise ValueError(f"degenerate covariance: {exc}") from exc
        return cls(mean=np.asarray(mean, dtype=float), cov=cov, inv_sqrt=inv_sqrt, sqrt=sqrt_spd(cov), n_fit=n_fit)


def fit_whitener(x) -> Whitener:
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    if n < 10 * d:
        raise ValueError(f"need at least {10 * d} samples to whiten {d} dimensions, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    cov = 0.5 * (cov + cov.T)
    if np.linalg.eigvalsh(cov)[0] < 1e-10:
        raise ValueError("degenerate covariance: smallest eigenvalue below 1e-10")
    return Whitener.from_covariance(cov, mean=mean, n_fit=n)


def apply_whitener(w: Whitener, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != w.mean.size:
        raise ValueError(f"expected {w.mean.size} columns, got shape {x.shape}")
    return (x - w.mean) @ w.inv_sqrt
