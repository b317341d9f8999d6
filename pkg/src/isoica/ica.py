"""Contrast functions and extremum search for H(w) = E G(w^T z) on the sphere.

``z`` always denotes whitened observations, one sample per row. Solvers treat
each row of the unmixing matrix independently from its own starting point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .linalg_so import sqrt_spd
from .model import MixingModel, SourceSpec, expect, sample_sources
from .whiten import Whitener

ALPHA_GUARD = 0.05


@dataclass(frozen=True)
class ContrastFunction:
    """Even contrast ``G`` with derivatives ``g = G'`` and ``gprime = G''``.

    ``growth`` and ``bound`` are the constants in
    ``|G^(k)(x)| <= bound * (1 + |x|)^max(growth - k, 0)``.
    """

    tag: str
    G: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    gprime: Callable[[np.ndarray], np.ndarray]
    growth: int
    bound: float


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


LOGCOSH = ContrastFunction(
    tag="logcosh",
    G=_logcosh,
    g=np.tanh,
    gprime=lambda x: 1.0 - np.tanh(x) ** 2,
    growth=1,
    bound=1.0,
)

QUARTIC = ContrastFunction(
    tag="quartic",
    G=lambda x: x**4,
    g=lambda x: 4.0 * x**3,
    gprime=lambda x: 12.0 * x**2,
    growth=4,
    bound=24.0,
)

CONTRASTS = {"logcosh": LOGCOSH, "quartic": QUARTIC}


def get_contrast(tag: str) -> ContrastFunction:
    try:
        return CONTRASTS[tag]
    except KeyError:
        raise ValueError(f"unknown contrast {tag!r}; expected one of {sorted(CONTRASTS)}") from None


def _check_unit(w, tol: float = 1e-8) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if abs(np.linalg.norm(w) - 1.0) > tol:
        raise ValueError(f"w must have unit norm, got |w| = {np.linalg.norm(w):.12g}")
    return w


def _canonical_sign(w: np.ndarray) -> np.ndarray:
    # G is even; fixing the sign makes H(w) == H(-w) bit for bit
    nz = np.flatnonzero(w)
    return -w if nz.size and w[nz[0]] < 0 else w


def objective_h(contrast: ContrastFunction, whitened, w) -> float:
    """Sample mean of ``G(w^T z)``."""
    w = _canonical_sign(_check_unit(w))
    return float(np.mean(contrast.G(np.asarray(whitened) @ w)))


def alpha_statistic(contrast: ContrastFunction, spec: SourceSpec, i: int, n: int = 10**6,
                    stream: Sequence[int] = (0xA1FA,)) -> float:
    """Monte Carlo ``E[S_i g(S_i) - g'(S_i)]``."""
    if n < 10**5:
        raise ValueError("n must be >= 1e5")
    s = sample_sources(spec, n, stream=(*stream, i))[:, i]
    return float(np.mean(s * contrast.g(s) - contrast.gprime(s)))


def alpha_exact(contrast: ContrastFunction, spec: SourceSpec, i: int) -> float:
    """``E[S_i g(S_i) - g'(S_i)]`` by quadrature against the marginal law."""
    return expect(spec.families[i], lambda x: x * contrast.g(x) - contrast.gprime(x))


def reference_wbar(a) -> np.ndarray:
    """Rows ``(A A^T)^{1/2} A^{-T} e_i``: the exact unmixing of the whitened linear part."""
    a = np.asarray(a, dtype=float)
    if abs(np.linalg.det(a)) < 1e-14:
        raise ValueError("a is singular")
    wbar = np.linalg.solve(a, sqrt_spd(a @ a.T))
    return wbar / np.linalg.norm(wbar, axis=1, keepdims=True)


@dataclass(frozen=True)
class ReferenceVectors:
    w_bar: np.ndarray
    w_tilde: np.ndarray
    v_vectors: np.ndarray
    alpha: np.ndarray


def _v_separable(contrast, spec, b, pert, i) -> np.ndarray:
    # every expectation factorizes into one-dimensional ones
    d = b.shape[0]
    fam_i = spec.families[i]
    e_gprime_i = expect(fam_i, contrast.gprime)
    e_g_i = expect(fam_i, contrast.g)
    e_hg_i = expect(fam_i, lambda x: pert.component(i)(x) * contrast.g(x))
    e_h = np.array([expect(spec.families[k], pert.component(k)) for k in range(d)])
    e_hs = np.array([expect(spec.families[k], lambda x, k=k: pert.component(k)(x) * x) for k in range(d)])
    v = np.zeros(d)
    for j in range(d):
        if j == i:
            continue
        term1 = b[i, j] * e_hs[j] * e_gprime_i
        term2 = b[j, i] * e_hg_i + e_g_i * sum(b[j, k] * e_h[k] for k in range(d) if k != i)
        v[j] = term1 + term2
    return v


def _v_monte_carlo(contrast, s, b, pert, i) -> np.ndarray:
    bh = pert(s) @ b.T
    si = s[:, i]
    gp, gi = contrast.gprime(si), contrast.g(si)
    v = np.mean(bh[:, [i]] * gp[:, None] * s + bh * gi[:, None], axis=0)
    v[i] = 0.0
    return v


def reference_wtilde(a, whitener: Whitener, contrast: ContrastFunction, model: MixingModel,
                     spec: SourceSpec, mc: int = 10**6, method: str = "auto") -> ReferenceVectors:
    """Second-order prediction of the perturbed extrema.

    Row ``i`` is ``normalize(Sigma^{1/2} A^{-T} u)`` with ``u_i = 1`` and
    ``u_j = eta v_j / alpha_i`` for ``j != i``, where
    ``v_j = E[(A^{-1}h)_i g'(S_i) S_j] + E[(A^{-1}h)_j g(S_i)]``.

    ``method="auto"`` uses exact one-dimensional quadrature when the
    perturbation acts coordinatewise and Monte Carlo with ``mc`` draws
    otherwise; ``"mc"`` forces Monte Carlo.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    b = np.linalg.inv(a)
    pert = model.perturbation
    alpha = np.array([alpha_exact(contrast, spec, i) for i in range(d)])
    if np.any(np.abs(alpha) < ALPHA_GUARD):
        raise ValueError(f"degenerate contrast/source pair: alpha = {alpha}")
    use_exact = method == "auto" and pert.separable
    if not use_exact:
        if mc < 10**6:
            raise ValueError("mc must be >= 1e6")
        s = sample_sources(spec, mc, stream=(0x7117DE,))
    v_vectors = np.zeros((d, d))
    w_tilde = np.zeros((d, d))
    sigma_half = whitener.sqrt
    for i in range(d):
        v = _v_separable(contrast, spec, b, pert, i) if use_exact else _v_monte_carlo(contrast, s, b, pert, i)
        v_vectors[i] = v
        u = model.eta * v / alpha[i]
        u[i] = 1.0
        w = sigma_half @ (b.T @ u)
        w_tilde[i] = w / np.linalg.norm(w)
    return ReferenceVectors(w_bar=reference_wbar(a), w_tilde=w_tilde, v_vectors=v_vectors, alpha=alpha)


# --- solvers -----------------------------------------------------------------


class SolveResult(NamedTuple):
    w: np.ndarray
    converged: bool
    iterations: int


class WrongSignError(RuntimeError):
    """The gradient iteration moves the objective the wrong way persistently."""


def fixed_point_update(contrast: ContrastFunction, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    y = z @ w
    w_new = z.T @ contrast.g(y) / z.shape[0] - np.mean(contrast.gprime(y)) * w
    return w_new / np.linalg.norm(w_new)


def fastica_fixed_point(contrast: ContrastFunction, whitened, w0, tol: float = 1e-10,
                        max_iter: int = 500) -> SolveResult:
    """One-unit FastICA iteration ``w <- E[z g(w^T z)] - E[g'(w^T z)] w``, normalized.

    Stops once ``1 - |<w_new, w>| < tol``. The returned vector is signed to
    agree with ``w0``.
    """
    w = _check_unit(w0).copy()
    if not 0 < tol <= 1e-4:
        raise ValueError("tol must be in (0, 1e-4]")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    z = np.asarray(whitened, dtype=float)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w_new = fixed_point_update(contrast, z, w)
        gap = 1.0 - abs(float(w_new @ w))
        w = w_new
        if gap < tol:
            converged = True
            break
    if w @ w0 < 0:
        w = -w
    return SolveResult(w, converged, it)


def _riemannian_grad(contrast, z, w):
    grad = z.T @ contrast.g(z @ w) / z.shape[0]
    return grad - (grad @ w) * w


def gradient_extremum(contrast: ContrastFunction, whitened, w0, sign: int, step: float = 0.05,
                      tol: float = 1e-9, max_iter: int = 5000, patience: int = 10) -> SolveResult:
    """Retracted gradient ascent (``sign=+1``) or descent (``sign=-1``) on the sphere.

    The update is ``w <- normalize(w + sign * step * grad)`` with the
    sphere-tangent part of ``E[z g(w^T z)]``; it stops once the tangent
    gradient norm falls below ``tol``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not 0 < step <= 0.1:
        raise ValueError("step must be in (0, 0.1]")
    w = _check_unit(w0).copy()
    z = np.asarray(whitened, dtype=float)
    value = float(np.mean(contrast.G(z @ w)))
    bad = 0
    for it in range(1, max_iter + 1):
        grad = _riemannian_grad(contrast, z, w)
        if np.linalg.norm(grad) < tol:
            return SolveResult(w, True, it - 1)
        w = w + sign * step * grad
        w /= np.linalg.norm(w)
        new_value = float(np.mean(contrast.G(z @ w)))
        if sign * (new_value - value) < -1e-14 * max(1.0, abs(value)):
            bad += 1
            if bad >= patience:
                raise WrongSignError(
                    f"objective moved against sign={sign:+d} for {patience} consecutive steps "
                    f"(last H={new_value:.6g}); check the sign of alpha"
                )
        else:
            bad = 0
        value = new_value
    converged = np.linalg.norm(_riemannian_grad(contrast, z, w)) < tol
    return SolveResult(w, bool(converged), max_iter)


def sample_alpha_sign(contrast: ContrastFunction, whitened, w) -> int:
    """Sign of ``mean(y g(y) - g'(y))`` for the projection ``y = w^T z``."""
    y = np.asarray(whitened) @ w
    return 1 if np.mean(y * contrast.g(y) - contrast.gprime(y)) > 0 else -1


@dataclass
class IcaEstimate:
    w_rows: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    objective_values: np.ndarray
    whitener: Whitener | None = None

    def sources(self, whitened) -> np.ndarray:
        return np.asarray(whitened) @ self.w_rows.T


@dataclass
class SolverOptions:
    tol: float | None = None
    max_iter: int | None = None
    step: float = 0.05
    signs: Sequence[int] | None = None
    extra: dict = field(default_factory=dict)


def run_ica(contrast: ContrastFunction, whitened, init, solver: str = "fixed-point",
            options: SolverOptions | None = None, whitener: Whitener | None = None) -> IcaEstimate:
    """Solve every row independently from the matching row of ``init``.

    With ``solver="gradient"`` the ascent/descent sign of each row comes from
    ``options.signs`` or, if absent, from the data projected on the start.
    """
    options = options or SolverOptions()
    init = np.asarray(init, dtype=float)
    z = np.asarray(whitened, dtype=float)
    k = init.shape[0]
    rows = np.empty_like(init)
    converged = np.zeros(k, dtype=bool)
    iterations = np.zeros(k, dtype=int)
    for i in range(k):
        w0 = _check_unit(init[i])
        if solver == "fixed-point":
            res = fastica_fixed_point(contrast, z, w0,
                                      tol=options.tol or 1e-10, max_iter=options.max_iter or 500)
        elif solver == "gradient":
            sign = options.signs[i] if options.signs is not None else sample_alpha_sign(contrast, z, w0)
            res = gradient_extremum(contrast, z, w0, sign, step=options.step,
                                    tol=options.tol or 1e-9, max_iter=options.max_iter or 5000)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        rows[i], converged[i], iterations[i] = res.w, res.converged, res.iterations
    objective = np.array([objective_h(contrast, z, w) for w in rows])
    return IcaEstimate(rows, converged, iterations, objective, whitener)


def sign_invariant_distance(w, ref) -> float:
    """``min(|w - ref|, |w + ref|)``."""
    w, ref = np.asarray(w), np.asarray(ref)
    return float(min(np.linalg.norm(w - ref), np.linalg.norm(w + ref)))


def convexity_probe(contrast: ContrastFunction, whitened, w, sign: int, radius: float = 0.02,
                    n_dirs: int = 50, seed: int = 0) -> int:
    """Count random tangent perturbations on the wrong side of a local extremum.

    For ``sign=+1`` (a maximum) a violation is a perturbed point with larger
    objective; for ``sign=-1`` one with smaller objective.
    """
    from .rng import make_rng

    w = _check_unit(w)
    z = np.asarray(whitened, dtype=float)
    h0 = objective_h(contrast, z, w)
    rng = make_rng(seed, 0xC0417E)
    violations = 0
    for _ in range(n_dirs):
        t = rng.standard_normal(w.size)
        t -= (t @ w) * w
        t /= np.linalg.norm(t)
        wp = math.cos(radius) * w + math.sin(radius) * t
        if sign * (objective_h(contrast, z, wp) - h0) > 0:
            violations += 1
    return violations
