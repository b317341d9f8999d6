"""Latent sources, perturbed linear mixings and the non-isometry functional.

The generative model is ``x = A s + eta * h(s)`` with independent,
standardized sources ``s`` and a perturbation ``h`` that is centered and
uncorrelated with the sources, ``E[s h(s)^T] = 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate

from .linalg_so import singular_distances
from .rng import make_rng

log = logging.getLogger(__name__)

FAMILIES = ("laplace", "uniform", "gaussian")
LAPLACE_SCALE = 1.0 / math.sqrt(2.0)
UNIFORM_HALF_WIDTH = math.sqrt(3.0)


@dataclass(frozen=True)
class DiscreteTable:
    """A finitely supported marginal, standardized on construction."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1 or v.size < 2:
            raise ValueError("values and probs must be 1-d of equal length >= 2")
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ValueError("probs must be non-negative and sum to 1")
        mean = float(p @ v)
        std = math.sqrt(float(p @ (v - mean) ** 2))
        if std == 0:
            raise ValueError("degenerate table")
        object.__setattr__(self, "values", tuple((v - mean) / std))
        object.__setattr__(self, "probs", tuple(p / p.sum()))


Family = Union[str, DiscreteTable]


def _check_family(fam: Family) -> None:
    if isinstance(fam, DiscreteTable):
        return
    if fam not in FAMILIES:
        raise ValueError(f"unknown source family {fam!r}; expected one of {FAMILIES} or a DiscreteTable")


@dataclass(frozen=True)
class SourceSpec:
    """Independent latent coordinates with zero mean and unit variance.

    ``families`` holds one family per coordinate, or a single family used for
    all of them.
    """

    dim: int
    families: tuple = ("laplace",)
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        fams = self.families
        if isinstance(fams, (str, DiscreteTable)):
            fams = (fams,)
        fams = tuple(fams)
        if len(fams) == 1:
            fams = fams * self.dim
        if len(fams) != self.dim:
            raise ValueError(f"need 1 or {self.dim} families, got {len(fams)}")
        for fam in fams:
            _check_family(fam)
        object.__setattr__(self, "families", fams)


def _sample_family(fam: Family, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(fam, DiscreteTable):
        return rng.choice(np.asarray(fam.values), size=n, p=np.asarray(fam.probs))
    if fam == "laplace":
        return rng.laplace(0.0, LAPLACE_SCALE, size=n)
    if fam == "uniform":
        return rng.uniform(-UNIFORM_HALF_WIDTH, UNIFORM_HALF_WIDTH, size=n)
    return rng.standard_normal(n)


def sample_sources(spec: SourceSpec, n: int, stream: Sequence[int] = (), rng=None) -> np.ndarray:
    """Draw an ``(n, dim)`` block of independent standardized sources.

    The draw is a deterministic function of ``spec.seed`` and ``stream``
    unless an explicit ``rng`` is given.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = make_rng(spec.seed, *stream)
    out = np.empty((n, spec.dim))
    for i, fam in enumerate(spec.families):
        out[:, i] = _sample_family(fam, rng, n)
    return out


def moment(fam: Family, k: int) -> float:
    """Closed-form raw moment ``E[S^k]`` of a standardized family."""
    _check_family(fam)
    if isinstance(fam, DiscreteTable):
        return float(np.asarray(fam.probs) @ np.asarray(fam.values) ** k)
    if k % 2 == 1:
        return 0.0
    if fam == "laplace":
        return math.factorial(k) * LAPLACE_SCALE**k
    if fam == "uniform":
        return UNIFORM_HALF_WIDTH**k / (k + 1)
    return float(np.prod(np.arange(k - 1, 0, -2))) if k > 0 else 1.0


def expect(fam: Family, fn: Callable[[np.ndarray], np.ndarray]) -> float:
    """``E[fn(S)]`` for one standardized marginal by adaptive quadrature."""
    _check_family(fam)
    if isinstance(fam, DiscreteTable):
        return float(np.asarray(fam.probs) @ fn(np.asarray(fam.values)))
    f = lambda x: float(fn(np.asarray(x)))
    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-12)
    if fam == "uniform":
        c = UNIFORM_HALF_WIDTH
        return integrate.quad(f, -c, 0, **opts)[0] / (2 * c) + integrate.quad(f, 0, c, **opts)[0] / (2 * c)
    if fam == "laplace":
        b = LAPLACE_SCALE
        dens = lambda x: math.exp(-abs(x) / b) / (2 * b)
    else:
        dens = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    lo = integrate.quad(lambda x: f(x) * dens(x), -np.inf, 0, **opts)[0]
    hi = integrate.quad(lambda x: f(x) * dens(x), 0, np.inf, **opts)[0]
    return lo + hi


# --- perturbations -----------------------------------------------------------


@dataclass(frozen=True)
class NoPerturbation:
    tag = "none"
    separable = True

    def __call__(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def jacobian(self, s):
        s = np.atleast_2d(s)
        return np.zeros((s.shape[0], s.shape[1], s.shape[1]))

    def component(self, i):
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class CubicPerturbation:
    """``h_i(s) = scale_i * (s_i^3 - beta_i s_i - shift_i)``, one coordinate each."""

    beta: np.ndarray
    shift: np.ndarray
    scale: np.ndarray
    tag = "cubic-decorrelated"
    separable = True

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.scale * (s**3 - self.beta * s - self.shift)

    def jacobian(self, s):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        diag = self.scale * (3 * s**2 - self.beta)
        jac = np.zeros((s.shape[0], s.shape[1], s.shape[1]))
        idx = np.arange(s.shape[1])
        jac[:, idx, idx] = diag
        return jac

    def component(self, i):
        b, c, a = self.beta[i], self.shift[i], self.scale[i]
        return lambda x: a * (x**3 - b * x - c)


@dataclass(frozen=True)
class SmoothPerturbation:
    """Non-separable smooth field ``amp * (tanh(U s) - offset - C s)``.

    ``offset`` and ``C`` remove the affine part of ``tanh(U s)`` so that the
    field is centered and uncorrelated with the sources; ``amp`` gives each
    coordinate unit second moment.
    """

    directions: np.ndarray
    offset: np.ndarray
    linear: np.ndarray
    amp: np.ndarray
    tag = "smooth-bump"
    separable = False

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.amp * (np.tanh(s @ self.directions.T) - self.offset - s @ self.linear.T)

    def jacobian(self, s):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        sech2 = 1.0 - np.tanh(s @ self.directions.T) ** 2
        jac = sech2[:, :, None] * self.directions[None, :, :] - self.linear[None, :, :]
        return self.amp[None, :, None] * jac


Perturbation = Union[NoPerturbation, CubicPerturbation, SmoothPerturbation]


def make_cubic_perturbation(spec: SourceSpec, method: str = "closed-form", mc: int = 10**7) -> CubicPerturbation:
    """Constants making ``S_i^3 - beta_i S_i - shift_i`` centered, uncorrelated and unit-norm.

    ``method="mc"`` estimates the moments from ``mc`` draws instead.
    """
    d = spec.dim
    beta, shift, scale = np.empty(d), np.empty(d), np.empty(d)
    if method == "mc":
        s = sample_sources(spec, mc, stream=(0xC0B1C,))
        m = {k: np.mean(s**k, axis=0) for k in (1, 2, 3, 4, 6)}
    elif method == "closed-form":
        m = {k: np.array([moment(f, k) for f in spec.families]) for k in (1, 2, 3, 4, 6)}
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(m[6])):
        raise ValueError("source family has no finite sixth moment")
    beta = m[4] / m[2]
    shift = m[3] - beta * m[1]
    var = m[6] - 2 * beta * m[4] + beta**2 * m[2] - shift**2
    if np.any(var <= 0):
        raise ValueError("cubic perturbation degenerates (zero variance)")
    scale = 1.0 / np.sqrt(var)
    return CubicPerturbation(beta=beta, shift=shift, scale=scale)


def make_smooth_perturbation(spec: SourceSpec, stream: Sequence[int] = (), n_fit: int = 10**6,
                             gain: float = 1.0) -> SmoothPerturbation:
    """Random tanh-of-linear field, decorrelated from the sources on ``n_fit`` draws."""
    from .metrics import center_and_decorrelate

    d = spec.dim
    rng = make_rng(spec.seed, *stream, 0x5300)
    u = rng.standard_normal((d, d))
    u = gain * u / np.linalg.norm(u, axis=1, keepdims=True)
    s = sample_sources(spec, n_fit, stream=(*stream, 0x5301))
    raw = np.tanh(s @ u.T)
    a_prime, b_prime, residual = center_and_decorrelate(s, raw)
    amp = 1.0 / np.sqrt(np.mean(residual**2, axis=0))
    return SmoothPerturbation(directions=u, offset=b_prime, linear=a_prime, amp=amp)


@dataclass(frozen=True)
class MixingModel:
    a: np.ndarray
    eta: float = 0.0
    perturbation: Perturbation = field(default_factory=NoPerturbation)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("a must be square")
        if np.linalg.det(a) == 0:
            raise ValueError("a must be invertible")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        object.__setattr__(self, "a", a)

    @property
    def tag(self) -> str:
        return self.perturbation.tag


def mix(model: MixingModel, sources) -> np.ndarray:
    """Row-wise ``x = A s + eta h(s)``."""
    s = np.asarray(sources, dtype=float)
    if s.ndim != 2 or s.shape[1] != model.a.shape[1]:
        raise ValueError(f"sources have shape {s.shape}, mixing expects {model.a.shape[1]} columns")
    x = s @ model.a.T
    if model.eta != 0:
        x = x + model.eta * model.perturbation(s)
    return x


def random_mixing_matrix(d: int, seed: int, *key: int, max_cond: float = 1e3,
                         min_abs_det: float = 1e-6, max_attempts: int = 100) -> np.ndarray:
    """Matrix with i.i.d. N(0, 1/d) entries, resampled until well conditioned."""
    if d < 2:
        raise ValueError("d must be >= 2")
    rng = make_rng(seed, *key)
    for attempt in range(max_attempts):
        a = rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, d))
        if abs(np.linalg.det(a)) >= min_abs_det and np.linalg.cond(a) <= max_cond:
            if attempt:
                log.info("random_mixing_matrix: %d resample(s) for seed=%s key=%s", attempt, seed, key)
            return a
    raise RuntimeError(f"no well-conditioned {d}x{d} matrix after {max_attempts} attempts")


def random_rotation(d: int, seed: int, *key: int) -> np.ndarray:
    """Haar-distributed element of SO(d)."""
    rng = make_rng(seed, *key)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1.0
    return q


# --- Jacobians and the non-isometry functional -------------------------------


@dataclass(frozen=True)
class JacobianField:
    """Batched Jacobian evaluator: ``(m, d)`` points to ``(m, D, d)`` matrices."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    mode: str = "analytic"

    def __call__(self, points) -> np.ndarray:
        return self.evaluator(np.atleast_2d(np.asarray(points, dtype=float)))


def jacobian_of_mixing(model: MixingModel, mode: str = "analytic") -> JacobianField:
    a, eta, pert = model.a, model.eta, model.perturbation
    if mode == "analytic":
        def evaluator(s):
            jac = np.broadcast_to(a, (s.shape[0],) + a.shape).copy()
            if eta != 0:
                jac += eta * pert.jacobian(s)
            return jac
    elif mode == "finite-difference":
        def evaluator(s):
            m, d = s.shape
            jac = np.empty((m, a.shape[0], d))
            for j in range(d):
                step = 1e-5 * (1.0 + np.abs(s[:, j]))
                sp, sm = s.copy(), s.copy()
                sp[:, j] += step
                sm[:, j] -= step
                jac[:, :, j] = (mix(model, sp) - mix(model, sm)) / (2 * step)[:, None]
            return jac
    else:
        raise ValueError(f"unknown Jacobian mode {mode!r}")
    return JacobianField(evaluator=evaluator, mode=mode)


@dataclass(frozen=True)
class ThetaEstimate:
    p: float
    value: float
    mc_points: int
    std_error: float
    measure: str = "P"


def theta_from_jacobians(jacobians, p: float = 2.0, measure: str = "P") -> ThetaEstimate:
    """Monte Carlo non-isometry functional from a batch of sampled Jacobians.

    The integrand at each point is ``dist(P, SO(d))^p + dist(P^{-1}, SO(d))^p``
    with ``P = (J^T J)^{1/2}``; the domain volume is normalized to one.
    """
    if p <= 1:
        raise ValueError("p must be > 1")
    direct, inverse = singular_distances(jacobians)
    integrand = direct ** (p / 2) + inverse ** (p / 2)
    m = integrand.size
    mean = float(np.mean(integrand))
    se_mean = float(np.std(integrand, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    value = mean ** (1.0 / p)
    se = (1.0 / p) * mean ** (1.0 / p - 1.0) * se_mean if mean > 0 else 0.0
    return ThetaEstimate(p=p, value=value, mc_points=m, std_error=se, measure=measure)


def estimate_theta(jacobian_field: JacobianField, domain_sampler, p: float = 2.0, mc_points: int = 5000,
                   measure: str = "P") -> ThetaEstimate:
    """Estimate the non-isometry functional of a mixing from its Jacobian field.

    ``domain_sampler`` is either a :class:`SourceSpec` (integrate against the
    source law) or a callable returning ``(m, d)`` points.
    """
    if mc_points < 100:
        raise ValueError("mc_points must be >= 100")
    if isinstance(domain_sampler, SourceSpec):
        points = sample_sources(domain_sampler, mc_points, stream=(0x7E7A,))
    else:
        points = np.asarray(domain_sampler(mc_points), dtype=float)
    return theta_from_jacobians(jacobian_field(points), p=p, measure=measure)


def random_gaussian_jacobians(d: int, big_d: int, mc_points: int, seed: int, *key: int) -> np.ndarray:
    """``(mc_points, big_d, d)`` matrices with i.i.d. N(0, 1) entries scaled by ``1/sqrt(big_d)``."""
    if big_d < d:
        raise ValueError("big_d must be >= d")
    rng = make_rng(seed, *key)
    return rng.standard_normal((mc_points, big_d, d)) / math.sqrt(big_d)
