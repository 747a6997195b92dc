"""Truncated-Gaussian transport map, Ball-Barthe inequality, Brascamp-Lieb checks.

``phi_b`` pushes the standard Gaussian restricted to ``(-b, b)`` (renormalized
by ``Gamma_b``) forward to the standard Gaussian on the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.spatial import ConvexHull

from .bodies import z_bodies
from .errors import DomainError, PrecisionFailure, PreconditionUnmet, ValidationError
from .gauss import cube_gaussian_measure, gaussian_measure
from .isotropy import IsotropicMeasure, verify_isotropy
from .sampling import GaussianEstimate

_SQRT2PI = math.sqrt(2.0 * math.pi)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT2PI


def _upper(x):
    return special.ndtr(-np.asarray(x, dtype=float))


def _band_mass(t: np.ndarray, b: float) -> np.ndarray:
    """``Q(t) - Q(b) = int_t^b pdf`` for ``0 <= t < b``, accurate as ``t -> b``."""
    out = _upper(t) - _upper(b)
    near = (b - t) < 0.5
    if np.any(near):
        tn = t[near]
        half = 0.5 * (b - tn)
        mid = 0.5 * (b + tn)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        out[near] = half * (_pdf(nodes) @ _GL_W)
    return out


@dataclass(frozen=True)
class TransportKernel:
    b: float
    gamma_b: float = field(init=False)
    t_b: float = field(init=False)

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise DomainError("b must be positive and finite")
        tail = math.erfc(self.b / math.sqrt(2.0))
        object.__setattr__(self, "gamma_b", 1.0 - tail)
        object.__setattr__(self, "t_b", math.sqrt(-2.0 * math.log1p(-tail)))

    def phi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) >= self.b):
            raise DomainError(f"transport map is defined on (-{self.b}, {self.b}) only")
        a = np.abs(np.atleast_1d(t))
        q = _band_mass(a, self.b) / self.gamma_b
        x = -special.ndtri(q)
        for _ in range(3):
            x = x + (_upper(x) - q) / _pdf(x)
        resid = np.abs(_upper(x) - q) / q
        if np.any(resid > 1e-10):
            raise PrecisionFailure(f"Newton refinement stalled at relative residual {resid.max():.2e}")
        out = np.sign(np.atleast_1d(t)) * x
        return out.reshape(t.shape)

    def dphi(self, t, phi=None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        phi = self.phi(t) if phi is None else phi
        return np.exp(0.5 * (phi * phi - t * t)) / self.gamma_b

    def ddphi(self, t, phi=None, dphi=None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        phi = self.phi(t) if phi is None else phi
        dphi = self.dphi(t, phi) if dphi is None else dphi
        return phi * dphi * dphi - t * dphi


def transport_eval(k: TransportKernel, t) -> tuple:
    """``(phi_b(t), phi_b'(t), phi_b''(t))``; scalars in, scalars out."""
    phi = k.phi(t)
    d1 = k.dphi(t, phi)
    d2 = k.ddphi(t, phi, d1)
    if np.ndim(t) == 0:
        return float(phi), float(d1), float(d2)
    return phi, d1, d2


@dataclass(frozen=True)
class SuiteCheck:
    name: str
    margin: float
    ok: bool


def transport_bound_suite(b: float, points: int = 1000) -> dict:
    """Grid checks of the bounds on ``t_b``, ``phi_b``, ``phi_b'`` and ``phi_b''``.

    Each check reports its worst margin (>= 0 means the bound holds).
    """
    if not 1.0 <= b <= 2.0:
        raise DomainError("the bounds are stated for b in [1, 2]")
    k = TransportKernel(b)
    tol = 1e-12
    long = np.linspace(0.0, k.t_b, points)
    short = np.linspace(0.0, 0.3, points)
    pl, ps = k.phi(long), k.phi(short)
    dl, ds = k.dphi(long, pl), k.dphi(short, ps)
    ddl = k.ddphi(long, pl, dl)
    coeff = (1.0 - k.gamma_b) / k.gamma_b ** 2
    growth = np.diff(pl * pl - long * long)
    margins = {
        "t_b_range": min(k.t_b - 0.3, b - k.t_b),
        "dphi_lower": float(np.min(dl - 1.0)),
        "dphi_upper": float(np.min(1.6 - ds)),
        "phi_lower": float(np.min(ps - short)),
        "phi_upper": float(np.min(1.6 * short - ps)),
        "ddphi_lower": float(np.min(ddl - 0.049 * long)),
        "ddphi_sharp": float(np.min(ddl - coeff * long)),
        "sharp_coefficient": coeff - 0.049,
        "phi2_minus_t2_monotone": float(np.min(growth)) if growth.size else 0.0,
    }
    checks = [SuiteCheck(name, m, m >= -tol) for name, m in margins.items()]
    return {
        "b": b,
        "gamma_b": k.gamma_b,
        "t_b": k.t_b,
        "points": points,
        "checks": [c.__dict__ for c in checks],
        "ok": all(c.ok for c in checks),
    }


def _log_ratio(m: IsotropicMeasure, t: np.ndarray) -> float:
    u, c = m.directions, m.weights
    mat = (u * (t * c)[:, None]).T @ u
    sign, logdet = np.linalg.slogdet(mat)
    if sign <= 0:
        raise ValidationError("weighted moment matrix is singular")
    return logdet - float(np.dot(c, np.log(t)))


def ball_barthe_ratio(m: IsotropicMeasure, t) -> float:
    """``det(sum t_i c_i u_i u_i^T) / prod t_i^{c_i}``."""
    t = np.asarray(t, dtype=float)
    if t.shape != (m.size,) or np.any(~(t > 0)):
        raise DomainError("t must be one positive weight per atom")
    ratio = math.exp(_log_ratio(m, t))
    if verify_isotropy(m, 1e-9).ok:
        assert ratio >= 1.0 - 1e-9, f"Ball-Barthe ratio below one: {ratio!r}"
    return ratio


def weighted_det2(m: IsotropicMeasure, idx) -> float:
    idx = list(idx)
    return float(np.prod(m.weights[idx]) * np.linalg.det(m.directions[idx]) ** 2)


@dataclass(frozen=True)
class StabilityCheck:
    lhs: float
    rhs: float
    ok: bool


def ball_barthe_stability_check(m: IsotropicMeasure, t, idx, beta: float) -> StabilityCheck:
    """Stability lower bound for the Ball-Barthe ratio; ``idx`` holds ``n+1`` zero-based atoms."""
    n = m.dim
    idx = [int(i) for i in idx]
    if len(idx) != n + 1 or len(set(idx)) != n + 1:
        raise ValidationError(f"need {n + 1} distinct atom indices")
    for name, sub in (("first", idx[:n]), ("last", idx[1:])):
        v = weighted_det2(m, sub)
        if v < beta * (1 - 1e-12):
            raise PreconditionUnmet(f"{name} subset {sub} has weighted det^2 {v:.6g} < beta={beta:.6g}")
    t = np.asarray(t, dtype=float)
    lhs = ball_barthe_ratio(m, t)
    ta, tb = t[idx[0]], t[idx[-1]]
    rhs = 1.0 + beta * (ta - tb) ** 2 / (4.0 * (ta + tb) ** 2)
    return StabilityCheck(lhs, rhs, lhs >= rhs - 1e-9)


@dataclass(frozen=True)
class BLResult:
    lhs: GaussianEstimate
    rhs: float
    ok: bool
    chain: tuple[float, float, float] | None = None
    nodes: int = 0

    def to_dict(self) -> dict:
        return {"lhs": self.lhs.to_dict(), "rhs": self.rhs, "ok": self.ok,
                "chain": list(self.chain) if self.chain else None, "nodes": self.nodes}


def _polygon_rule(vertices: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on a convex polygon containing the origin.

    The polygon is fanned into triangles ``(0, v_k, v_{k+1})``; each triangle
    is the image of the unit square under ``(r, s) -> r((1-s) v_k + s v_{k+1})``,
    so the nodes follow the edges exactly.
    """
    hull = ConvexHull(vertices)
    v = vertices[hull.vertices]
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    r, s = np.meshgrid(x, x, indexing="ij")
    wr = np.outer(w, w) * r
    pts, wts = [], []
    for k in range(len(v)):
        a, c = v[k], v[(k + 1) % len(v)]
        area2 = abs(a[0] * c[1] - a[1] * c[0])
        p = r[..., None] * ((1.0 - s)[..., None] * a + s[..., None] * c)
        pts.append(p.reshape(-1, 2))
        wts.append((wr * area2).ravel())
    return np.vstack(pts), np.concatenate(wts)


def theta_chain(m: IsotropicMeasure, b: float, nodes: int = 200) -> tuple[tuple[float, float, float], bool]:
    """Planar quadrature of the three integrals in the transport proof of the BL bound.

    Returns ``(I1, I2, I3)``: the product of truncated densities, its upper
    bound after Ball-Barthe, and the Gaussian pulled back by the transport
    field.  Also reports whether ``I1 <= I2 <= I3`` held at every node.
    ``nodes`` is the Gauss-Legendre order per direction on each triangle of
    ``b Z*``.
    """
    if m.dim != 2:
        raise ValidationError("theta quadrature is implemented for n = 2 only")
    k = TransportKernel(b)
    u, c = m.directions, m.weights
    _, z_star = z_bodies(m)
    x, wts = _polygon_rule(b * np.asarray(z_star.vertices), nodes)
    s = x @ u.T
    # Gauss nodes are interior, but rounding can put a node on an edge
    s = np.clip(s, -b * (1 - 1e-15), b * (1 - 1e-15))
    phi = k.phi(s)
    d1 = k.dphi(s, phi)
    dens = _pdf(s) / k.gamma_b
    i1 = np.prod(dens ** c, axis=1)
    jac = np.einsum("pi,i,ij,ik->pjk", d1, c, u, u)
    det = np.linalg.det(jac)
    i2 = np.exp(-0.5 * (phi * phi) @ c) * det / (2 * math.pi)
    theta = (phi * c) @ u
    i3 = np.exp(-0.5 * np.einsum("pj,pj->p", theta, theta)) * det / (2 * math.pi)
    rel = 1e-10
    ordered = bool(np.all(i1 <= i2 * (1 + rel) + 1e-300) and np.all(i2 <= i3 * (1 + rel) + 1e-300))
    return (float(i1 @ wts), float(i2 @ wts), float(i3 @ wts)), ordered


def bl_verify(m: IsotropicMeasure, b: float, method: str = "mc", samples: int | None = None,
              seed: int = 0, nodes: int = 200, workers: int = 1) -> BLResult:
    """``gamma_n(b Z*(m)) <= (2 Phi(b) - 1)^n`` and, on request, the planar proof chain."""
    if not 1.0 <= b <= 2.0:
        raise DomainError("b must lie in [1, 2]")
    _, z_star = z_bodies(m)
    lhs = gaussian_measure(z_star, b, samples, seed, stream="bl/gauss", workers=workers)
    rhs = cube_gaussian_measure(m.dim, b)
    ok = lhs.value <= rhs + 3 * lhs.std_error + 1e-12
    if method == "mc":
        return BLResult(lhs, rhs, ok)
    if method != "theta_quadrature":
        raise ValidationError(f"unknown method {method!r}")
    if m.dim != 2:
        raise ValidationError("theta quadrature is implemented for n = 2 only")
    chain, ordered = theta_chain(m, b, nodes)
    return BLResult(lhs, rhs, ok and ordered and chain[2] <= 1 + 1e-3, chain, nodes)
