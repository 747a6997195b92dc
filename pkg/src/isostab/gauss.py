"""Gaussian functionals of symmetric polytopes: l-norm, mean width, Gaussian measure.

All comparative estimates use common random numbers: bodies evaluated on the
same stream see the same Gaussian draws, so their difference has far smaller
variance than either value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .bodies import SymmetricBody, polar
from .errors import ContainmentViolated, DomainError
from .sampling import GaussianEstimate, default_samples, mc_estimate, mc_estimates


def norm_cdf(x):
    return special.ndtr(x)


def norm_ppf(p):
    """Inverse standard normal CDF with one Newton correction."""
    p = np.asarray(p, dtype=float)
    x = special.ndtri(p)
    with np.errstate(over="ignore", invalid="ignore"):
        dens = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        step = np.where(dens > 0, (special.ndtr(x) - p) / dens, 0.0)
    step = np.where(np.isfinite(step), step, 0.0)
    out = x - step
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExactConstants:
    n: int
    ell_cross: float
    ell_ball: float
    kappa_n: float
    W_ball: float = 2.0

    @classmethod
    def for_dim(cls, n: int) -> "ExactConstants":
        ell_ball = math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2) - math.lgamma(n / 2))
        return cls(n, math.sqrt(2.0 / math.pi) * n, ell_ball, kappa(n))


def kappa(n: int) -> float:
    """Volume of the Euclidean unit ball in ``R^n``."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def ell_cube_exact(n: int) -> float:
    """``l(B_inf^n) = int_0^inf 1 - (2 Phi(t) - 1)^n dt`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda t: -math.expm1(n * math.log1p(-2.0 * special.ndtr(-t))),
                            0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def width_cube_exact(n: int) -> float:
    """``W(B_inf^n) = 2 n E|U_1|`` for ``U`` uniform on the sphere."""
    return 2.0 * n * math.exp(math.lgamma(n / 2) - math.lgamma((n + 1) / 2)) / math.sqrt(math.pi)


def width_cross_exact(n: int) -> float:
    return 2.0 * ell_cube_exact(n) / ExactConstants.for_dim(n).ell_ball


def _samples(n, samples):
    return default_samples(n) if samples is None else int(samples)


def ell_mc(b: SymmetricBody, samples: int | None = None, seed: int = 0, stream: str = "ell/K",
           workers: int = 1) -> GaussianEstimate:
    if samples is not None and samples < 1000:
        raise DomainError("ell_mc needs at least 1000 samples")
    return mc_estimate(b.gauge_many, b.dim, _samples(b.dim, samples), seed, stream, workers=workers)


def ell_paired(bodies: list[SymmetricBody], samples: int | None = None, seed: int = 0,
               stream: str = "ell/paired", workers: int = 1,
               reference: int = 0) -> tuple[list[GaussianEstimate], list[GaussianEstimate]]:
    """l-norms of several bodies on shared draws, plus differences ``body_i - body_ref``."""
    n = bodies[0].dim
    m = len(bodies)

    def fn(x):
        g = np.column_stack([b.gauge_many(x) for b in bodies])
        return np.hstack([g, g - g[:, [reference]]])

    labels = [f"K{i}" for i in range(m)] + [f"K{i}-K{reference}" for i in range(m)]
    est = mc_estimates(fn, n, _samples(n, samples), seed, stream, workers=workers, labels=labels)
    return est[:m], est[m:]


def width_paired(bodies: list[SymmetricBody], samples: int | None = None, seed: int = 0,
                 stream: str = "width/paired", workers: int = 1,
                 reference: int = 0) -> tuple[list[GaussianEstimate], list[GaussianEstimate]]:
    n = bodies[0].dim
    m = len(bodies)

    def fn(u):
        h = np.column_stack([2.0 * b.support_many(u) for b in bodies])
        return np.hstack([h, h - h[:, [reference]]])

    labels = [f"K{i}" for i in range(m)] + [f"K{i}-K{reference}" for i in range(m)]
    est = mc_estimates(fn, n, _samples(n, samples), seed, stream, sphere=True, workers=workers,
                       labels=labels)
    return est[:m], est[m:]


def _gauss_legendre_grid(t_max: float, points: int, order: int = 8):
    panels = max(points // order, 1)
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, t_max, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (0.5 * h[:, None] * w[None, :]).ravel()
    return nodes, weights


def ell_layer(b: SymmetricBody, t_max: float | None = None, quad_points: int = 4096,
              samples_per_t: int | None = None, seed: int = 0, stream: str = "ell/layer",
              workers: int = 1) -> GaussianEstimate:
    """l-norm through ``int_0^inf (1 - gamma_n(tK)) dt``.

    ``gamma_n(tK)`` is estimated at every quadrature node from one shared set
    of draws, so a draw with gauge ``s`` contributes the quadrature weight of
    all nodes below ``s``.
    """
    n = b.dim
    if t_max is None:
        t_max = 10.0 * math.sqrt(n) / b.inradius
    nodes, weights = _gauss_legendre_grid(t_max, quad_points)
    cum = np.concatenate([[0.0], np.cumsum(weights)])
    tail = []

    def fn(x):
        s = b.gauge_many(x)
        tail.append(int(np.count_nonzero(s > t_max)))
        return cum[np.searchsorted(nodes, s, side="left")]

    est = mc_estimate(fn, n, _samples(n, samples_per_t), seed, stream, workers=workers)
    if sum(tail) / est.samples > 1e-4:
        raise DomainError(f"t_max={t_max:.4g} too small: tail mass {sum(tail) / est.samples:.2e}")
    return est


def mean_width_mc(b: SymmetricBody, samples: int | None = None, seed: int = 0,
                  stream: str = "width/K", workers: int = 1) -> GaussianEstimate:
    if samples is not None and samples < 1000:
        raise DomainError("mean_width_mc needs at least 1000 samples")
    return mc_estimate(lambda u: 2.0 * b.support_many(u), b.dim, _samples(b.dim, samples), seed,
                       stream, sphere=True, workers=workers)


@dataclass(frozen=True)
class DualityCheck:
    lhs: GaussianEstimate
    rhs: GaussianEstimate
    gap_in_sigmas: float

    @property
    def ok(self) -> bool:
        return self.gap_in_sigmas <= 3.0


def duality_check(b: SymmetricBody, samples: int | None = None, seed: int = 0,
                  workers: int = 1) -> DualityCheck:
    """Compare ``l(K)`` with ``l(B_2)/2 * W(K polar)`` on independent streams."""
    half = ExactConstants.for_dim(b.dim).ell_ball / 2.0
    lhs = ell_mc(b, samples, seed, stream="duality/ell", workers=workers)
    w = mean_width_mc(polar(b), samples, seed, stream="duality/width", workers=workers)
    rhs = GaussianEstimate(half * w.value, half * w.std_error, w.samples, w.seed, w.stream)
    sigma = math.hypot(lhs.std_error, rhs.std_error)
    gap = abs(lhs.value - rhs.value) / sigma if sigma > 0 else (0.0 if lhs.value == rhs.value else math.inf)
    return DualityCheck(lhs, rhs, gap)


def is_rotated_cube(b: SymmetricBody, tol: float = 1e-12) -> bool:
    g = b.generators
    return (b.form == "H" and g.shape[0] == g.shape[1]
            and np.max(np.abs(g @ g.T - np.eye(g.shape[0]))) <= tol)


def cube_gaussian_measure(n: int, t: float) -> float:
    """``gamma_n(t B_inf^n) = (2 Phi(t) - 1)^n``."""
    return float(math.exp(n * math.log1p(-2.0 * special.ndtr(-t))))


def gaussian_measure(b: SymmetricBody, t: float, samples: int | None = None, seed: int = 0,
                     stream: str = "gauss/K", workers: int = 1) -> GaussianEstimate:
    if not t > 0:
        raise DomainError("scale must be positive")
    if is_rotated_cube(b):
        return GaussianEstimate(cube_gaussian_measure(b.dim, t), 0.0, 0, int(seed), "exact")
    return mc_estimate(lambda x: (b.gauge_many(x) <= t).astype(float), b.dim,
                       _samples(b.dim, samples), seed, stream, workers=workers)


def gaussian_measure_paired(bodies: list[SymmetricBody], t: float, samples: int | None = None,
                            seed: int = 0, stream: str = "gauss/paired", workers: int = 1,
                            reference: int = 0) -> tuple[list[GaussianEstimate], list[GaussianEstimate]]:
    """``gamma_n(t K_i)`` on shared draws, plus differences against ``K_ref``."""
    if not t > 0:
        raise DomainError("scale must be positive")
    n = bodies[0].dim
    m = len(bodies)

    def fn(x):
        g = np.column_stack([(b.gauge_many(x) <= t).astype(float) for b in bodies])
        return np.hstack([g, g - g[:, [reference]]])

    labels = [f"K{i}" for i in range(m)] + [f"K{i}-K{reference}" for i in range(m)]
    est = mc_estimates(fn, n, _samples(n, samples), seed, stream, workers=workers, labels=labels)
    return est[:m], est[m:]


def cap_fraction(n: int, alpha: float) -> float:
    """Normalized area of a spherical cap of angular radius ``alpha <= pi/2`` on ``S^{n-1}``."""
    return 0.5 * float(special.betainc((n - 1) / 2.0, 0.5, math.sin(alpha) ** 2))


def cap_measure_check(n: int, alpha: float) -> tuple[float, float, bool]:
    """Gaussian measure of the cone ``<x, w> >= |x| cos(alpha)`` against ``sin^{n-1}(alpha)/sqrt(2 pi n)``."""
    if not 0.0 < alpha <= math.pi / 2:
        raise DomainError("alpha must lie in (0, pi/2]")
    exact = cap_fraction(n, alpha)
    bound = math.sin(alpha) ** (n - 1) / math.sqrt(2 * math.pi * n)
    return exact, bound, exact >= bound


def contained_in(inner: SymmetricBody, outer: SymmetricBody, tol: float = 1e-9) -> bool:
    return bool(np.all(outer.contains(inner.vertices, tol)))


@dataclass(frozen=True)
class EllDifference:
    lhs: GaussianEstimate
    rhs: float
    ok: bool


def ell_difference_check(inner: SymmetricBody, outer: SymmetricBody, R: float,
                         samples: int | None = None, seed: int = 0, workers: int = 1) -> EllDifference:
    """``l(K) - l(C) >= (n/(2 pi e))^{n/2} R^{-(n+1)} V(C \\ K)`` for ``K ⊆ C ⊆ R B_2``."""
    from .metrics import volume

    n = inner.dim
    if not contained_in(inner, outer):
        raise ContainmentViolated("inner body is not contained in outer body")
    if outer.circumradius > R * (1 + 1e-12):
        raise ContainmentViolated(f"outer body is not contained in {R} B_2")
    _, diffs = ell_paired([outer, inner], samples, seed, stream="elldiff", workers=workers)
    lhs = diffs[1]
    rhs = (n / (2 * math.pi * math.e)) ** (n / 2) * R ** (-(n + 1)) * (volume(outer) - volume(inner))
    return EllDifference(lhs, rhs, lhs.value >= rhs - 3 * lhs.std_error)
