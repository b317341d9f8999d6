"""Mean correlation coefficient, its lower-bound certificates, and affine centering."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

EXHAUSTIVE_MAX_D = 8


@dataclass(frozen=True)
class MccReport:
    mcc: float
    permutation: np.ndarray
    per_pair_correlations: np.ndarray
    signs: np.ndarray


def col_mean(x: np.ndarray) -> np.ndarray:
    """Column means of a tall block via BLAS (axis-0 ufunc reductions are strided and slow)."""
    return np.ones(x.shape[0]) @ x / x.shape[0]


def col_sumsq(x: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", x, x)


def correlation_matrix(a, b) -> np.ndarray:
    """Pearson correlations ``rho(a_i, b_j)`` between the columns of two blocks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"blocks must have equal 2-d shapes, got {a.shape} and {b.shape}")
    ac = a - col_mean(a)
    bc = b - col_mean(b)
    sa = np.sqrt(col_sumsq(ac))
    sb = np.sqrt(col_sumsq(bc))
    if np.any(sa == 0) or np.any(sb == 0):
        raise ValueError("zero-variance column")
    return np.clip((ac.T @ bc) / np.outer(sa, sb), -1.0, 1.0)


def best_permutation(weights: np.ndarray) -> np.ndarray:
    """Permutation ``pi`` maximizing ``sum_i weights[i, pi[i]]``.

    Exhaustive (first maximizer in lexicographic order) up to
    ``EXHAUSTIVE_MAX_D``, linear assignment beyond.
    """
    d = weights.shape[0]
    if d <= EXHAUSTIVE_MAX_D:
        perms = np.array(list(itertools.permutations(range(d))))
        totals = weights[np.arange(d), perms].sum(axis=1)
        return perms[int(np.argmax(totals))]
    rows, cols = linear_sum_assignment(weights, maximize=True)
    perm = np.empty(d, dtype=int)
    perm[rows] = cols
    return perm


def mcc(s_true, s_est) -> MccReport:
    """``max_pi mean_i |rho(S_i, S_est_pi(i))|``."""
    rho = correlation_matrix(s_true, s_est)
    perm = best_permutation(np.abs(rho))
    pairs = rho[np.arange(rho.shape[0]), perm]
    return MccReport(
        mcc=float(np.mean(np.abs(pairs))),
        permutation=perm,
        per_pair_correlations=pairs,
        signs=np.where(pairs < 0, -1, 1),
    )


# --- lower-bound certificates --------------------------------------------------


@dataclass(frozen=True)
class BoundCertificate:
    c1: float
    c2: float
    c3: float
    bound_value: float
    observed_mcc: float
    holds: bool
    slack: float = 0.0
    holds_within_slack: bool = True
    rho: tuple = ()


HValues = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _bound_inputs(z, a, h):
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    hz = np.asarray(h(z) if callable(h) else h, dtype=float)
    if hz.shape != z.shape or a.shape != (z.shape[1], z.shape[1]):
        raise ValueError("shapes of z, a and h(z) do not agree")
    zc = z - col_mean(z)
    return zc, a, hz


def _certify(z, a, h, c2_rule: str, bound_rule) -> BoundCertificate:
    zc, a, hz = _bound_inputs(z, a, h)
    n, d = zc.shape
    z_norm = np.sqrt(col_sumsq(zc) / n)
    h_norm = np.sqrt(col_sumsq(hz) / n)
    c1 = float(z_norm.max() / z_norm.min())

    def constants(perm):
        diag = np.abs(a[np.arange(d), perm])
        if np.any(diag == 0):
            return None
        off = np.abs(a).copy()
        off[np.arange(d), perm] = 0.0
        if c2_rule == "l1":
            c2 = float(np.max(off.sum(axis=1) / diag))
        else:
            c2 = float(np.sqrt(np.max((off**2).sum(axis=1) / diag**2)))
        c3 = float(np.max(h_norm / (diag * z_norm[perm])))
        return c2, c3

    if d <= EXHAUSTIVE_MAX_D:
        candidates = [np.array(p) for p in itertools.permutations(range(d))]
    else:
        with np.errstate(divide="ignore"):
            r, c = linear_sum_assignment(np.log(np.abs(a)), maximize=True)
        perm = np.empty(d, dtype=int)
        perm[r] = c
        candidates = [perm]
    best = None
    for perm in candidates:
        consts = constants(perm)
        if consts is None:
            continue
        value = bound_rule(c1, *consts)
        if best is None or value > best[0]:
            best = (value, perm, consts)
    if best is None:
        raise ValueError("every permutation hits a vanishing entry A[i, rho(i)]")
    value, perm, (c2, c3) = best
    observed = mcc(zc, zc @ a.T + hz).mcc
    slack = 4.0 / math.sqrt(n)
    return BoundCertificate(
        c1=c1, c2=c2, c3=c3, bound_value=float(value), observed_mcc=observed,
        holds=bool(observed >= value - 1e-9), slack=slack,
        holds_within_slack=bool(observed >= value - slack), rho=tuple(int(p) for p in perm),
    )


def verify_mcc_bound_independent(z, a, h: HValues) -> BoundCertificate:
    """Certificate ``MCC(T(Z), Z) >= 1 - c3^2/2 - (c1 c2)^2/2`` for ``T(z) = A z + h(z)``.

    Valid when ``Z`` has independent centered coordinates and ``E[Z_i h_j] = 0``.
    ``h`` is either the array ``h(z)`` or a callable. ``z`` is centered at the
    sample level before use; the permutation ``rho`` giving the largest bound
    is reported.
    """
    return _certify(z, a, h, "l2", lambda c1, c2, c3: 1.0 - c3**2 / 2 - (c1 * c2) ** 2 / 2)


def verify_mcc_bound_general(z, a, h: HValues) -> BoundCertificate:
    """Certificate ``MCC(T(Z), Z) >= 1 - 2 c3 - 2 c1 c2`` with no decorrelation requirement."""
    return _certify(z, a, h, "l1", lambda c1, c2, c3: 1.0 - 2 * c3 - 2 * c1 * c2)


# --- centering -----------------------------------------------------------------


class Centering(NamedTuple):
    a_prime: np.ndarray
    b_prime: np.ndarray
    residual: np.ndarray


def center_and_decorrelate(s, x) -> Centering:
    """Rewrite ``x = A' s + b' + h'(s)`` with ``h'`` centered and uncorrelated with ``s``.

    ``A'`` is the least-squares regression of ``x`` on ``s`` with intercept, so
    the sample mean of ``h'`` and the sample cross-moment ``E[s h'^T]`` vanish
    up to rounding.
    """
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if s.ndim != 2 or x.ndim != 2 or s.shape[0] != x.shape[0]:
        raise ValueError("s and x must be 2-d blocks with the same number of rows")
    s_mean, x_mean = col_mean(s), col_mean(x)
    sc, xc = s - s_mean, x - x_mean
    gram = sc.T @ sc
    if np.linalg.cond(gram) > 1e12:
        raise ValueError("singular sample Gram matrix")
    a_prime = np.linalg.solve(gram, sc.T @ xc).T
    residual = xc - sc @ a_prime.T
    return Centering(a_prime, x_mean - a_prime @ s_mean, residual)


def gram_lower_bound(s) -> float:
    """Smallest ``a`` with ``E[s s^T] >= a^{-1} Id``, i.e. ``1 / lambda_min``."""
    s = np.asarray(s, dtype=float)
    return float(1.0 / np.linalg.eigvalsh(s.T @ s / s.shape[0])[0])
