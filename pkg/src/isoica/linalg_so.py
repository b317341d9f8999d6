"""Small dense kernels around the rotation group SO(d).

Everything here is a pure function of its inputs. Distances are Frobenius
distances; the distance of a matrix to SO(d) (or to the isometric embeddings
of R^d into R^D) only depends on its singular values.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

SIGMA_FLOOR = 1e-12


class OrientationError(ValueError):
    """Raised when a square matrix has non-positive determinant."""


class RankDeficientError(ValueError):
    """Raised when a matrix is (numerically) rank deficient."""


class SvdFactors(NamedTuple):
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _check_square_oriented(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.linalg.det(a) <= 0:
        raise OrientationError(
            "determinant is not positive; flip one column first (see fix_orientation)"
        )


def svd(a) -> SvdFactors:
    """Thin SVD with singular values in descending order."""
    a = _as_matrix(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(u, s, vt.T)


def _full_rank_sigma(a: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] < SIGMA_FLOOR or s.size < min(a.shape):
        raise RankDeficientError(f"smallest singular value {s[-1]:.3e} below {SIGMA_FLOOR}")
    return s


def dist_to_so(a) -> float:
    """Frobenius distance of a square matrix with det > 0 to SO(d).

    Equals ``sqrt(sum((sigma_i - 1)**2))`` over the singular values.
    """
    a = _as_matrix(a)
    _check_square_oriented(a)
    s = np.linalg.svd(a, compute_uv=False)
    return float(np.sqrt(np.sum((s - 1.0) ** 2)))


def project_to_so(a) -> np.ndarray:
    """Nearest rotation ``U V^T`` to a square matrix with det > 0."""
    a = _as_matrix(a)
    _check_square_oriented(a)
    u, _, vt = np.linalg.svd(a)
    return u @ vt


def dist_to_so_undercomplete(a) -> float:
    """Distance of a tall D x d matrix to the isometries onto its range."""
    a = _as_matrix(a)
    if a.shape[0] < a.shape[1]:
        raise ValueError(f"expected rows >= cols, got shape {a.shape}")
    s = _full_rank_sigma(a)
    return float(np.sqrt(np.sum((s - 1.0) ** 2)))


def polar_factors(a) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition ``a = U @ P`` of a full-column-rank tall matrix.

    ``U`` has orthonormal columns and ``P = (a^T a)^{1/2}`` is SPD.
    """
    a = _as_matrix(a)
    if a.shape[0] < a.shape[1]:
        raise ValueError(f"expected rows >= cols, got shape {a.shape}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[-1] < SIGMA_FLOOR:
        raise RankDeficientError(f"smallest singular value {s[-1]:.3e} below {SIGMA_FLOOR}")
    p = (vt.T * s) @ vt
    return u @ vt, 0.5 * (p + p.T)


def _spd_eigh(s, tol_sym: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    s = _as_matrix(s)
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if np.max(np.abs(s - s.T)) > tol_sym * max(1.0, np.max(np.abs(s))):
        raise ValueError("matrix is not symmetric")
    lam, vec = np.linalg.eigh(0.5 * (s + s.T))
    if lam[0] <= SIGMA_FLOOR:
        raise ValueError(f"matrix is not positive definite (smallest eigenvalue {lam[0]:.3e})")
    return lam, vec


def inv_sqrt_spd(s) -> np.ndarray:
    """Symmetric inverse square root of an SPD matrix."""
    lam, vec = _spd_eigh(s)
    m = (vec / np.sqrt(lam)) @ vec.T
    return 0.5 * (m + m.T)


def sqrt_spd(s) -> np.ndarray:
    """Symmetric square root of an SPD matrix."""
    lam, vec = _spd_eigh(s)
    m = (vec * np.sqrt(lam)) @ vec.T
    return 0.5 * (m + m.T)


def dist_product_bound_check(a, b) -> tuple[float, float, bool]:
    """Check ``dist(ab) <= 1.5 dist(a) + 1.5 dist(b)`` for det(a), det(b) > 0."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    lhs = dist_to_so(a @ b)
    rhs = 1.5 * dist_to_so(a) + 1.5 * dist_to_so(b)
    return lhs, rhs, bool(lhs <= rhs + 1e-9)


def fix_orientation(a) -> np.ndarray:
    """Return ``a`` with one column negated if ``det(a) < 0``.

    The flipped column is the one with the largest weight in the right
    singular vector of the smallest singular value.
    """
    a = _as_matrix(a).copy()
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.linalg.det(a) >= 0:
        return a
    _, _, vt = np.linalg.svd(a)
    j = int(np.argmax(np.abs(vt[-1])))
    a[:, j] *= -1.0
    return a


def rotation_2d(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def singular_distances(jacobians: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squared distances of ``P`` and ``P^{-1}`` to SO(d), batched.

    ``jacobians`` has shape (m, D, d); ``P = (J^T J)^{1/2}``. Returns two
    arrays of shape (m,).
    """
    jacobians = np.asarray(jacobians, dtype=float)
    s = np.linalg.svd(jacobians, compute_uv=False)
    if np.any(s[:, -1] < SIGMA_FLOOR):
        raise RankDeficientError("rank-deficient Jacobian in batch")
    direct = np.sum((s - 1.0) ** 2, axis=1)
    inverse = np.sum((1.0 / s - 1.0) ** 2, axis=1)
    return direct, inverse
