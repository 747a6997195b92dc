"""Distances between point sets, symmetric polytopes and isotropic measures."""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.special import ndtr

from .bodies import SymmetricBody
from .errors import NumericError, ValidationError
from .isotropy import IsotropicMeasure
from .sampling import block_generator, mc_estimate


# -- point sets ---------------------------------------------------------------

def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)


def hausdorff_points(a, b) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValidationError("Hausdorff distance needs nonempty sets")
    d = _pairwise(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def min_norm_point(points: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Point of minimal Euclidean norm in ``conv(points)`` (Wolfe's active-set method)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    sq = np.einsum("ij,ij->i", p, p)
    scale = max(float(sq.max()), 1e-300)
    s = [int(np.argmin(sq))]
    lam = np.array([1.0])
    x = p[s[0]].copy()
    for _ in range(max_iter):
        dots = p @ x
        j = int(np.argmin(dots))
        if x @ x - dots[j] <= tol * scale or j in s:
            return x
        s.append(j)
        lam = np.append(lam, 0.0)
        while True:
            q = p[s]
            k = len(s)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = q @ q.T
            kkt[:k, k] = kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            alpha = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
            if np.all(alpha > 1e-14):
                lam = alpha
                break
            bad = (alpha <= 1e-14) & (lam - alpha > 0)
            theta = min(1.0, float(np.min(lam[bad] / (lam[bad] - alpha[bad])))) if np.any(bad) else 0.0
            lam = theta * alpha + (1.0 - theta) * lam
            keep = lam > 1e-14
            if np.all(keep):
                keep[int(np.argmin(lam))] = False
            s = [s[i] for i in range(k) if keep[i]]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ p[s]
    raise NumericError("min-norm-point iteration did not terminate")


def point_hull_distance(x: np.ndarray, vertices: np.ndarray) -> float:
    return float(np.linalg.norm(min_norm_point(vertices - x)))


# -- bodies ---------------------------------------------------------------------

@dataclass(frozen=True)
class _Poly:
    vertices: np.ndarray
    normals: np.ndarray  # body = {x : <f, x> <= 1}

    @classmethod
    def of(cls, b: SymmetricBody, rotation: np.ndarray | None = None) -> "_Poly":
        v, f = np.asarray(b.vertices), np.asarray(b.facet_normals)
        if rotation is not None:
            v, f = v @ rotation.T, f @ rotation.T
        return cls(v, f)

    def gauge(self, x: np.ndarray) -> np.ndarray:
        return np.maximum((np.atleast_2d(x) @ self.normals.T).max(axis=1), 0.0)


def _directed(src: _Poly, dst: _Poly) -> float:
    outside = dst.gauge(src.vertices) > 1.0 + 1e-12
    best = 0.0
    for v in src.vertices[outside]:
        best = max(best, point_hull_distance(v, dst.vertices))
    return best


def _hausdorff_polys(p: _Poly, q: _Poly) -> float:
    return max(_directed(p, q), _directed(q, p))


@dataclass(frozen=True)
class HausdorffResult:
    value: float
    mode: str
    resolution: float | None = None


def _grid_directions(n: int, count: int, seed: int) -> np.ndarray:
    if n == 2:
        ang = np.pi * (np.arange(count) + 0.5) / count
        u = np.column_stack([np.cos(ang), np.sin(ang)])
        return np.vstack([u, -u])
    g = block_generator(seed, "hausdorff/grid", 0).standard_normal((count, n))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([u, -u])


def hausdorff_bodies(p: SymmetricBody, q: SymmetricBody, mode: str = "exact",
                     grid: int = 20000, seed: int = 0) -> HausdorffResult:
    """Hausdorff distance of two symmetric polytopes.

    ``exact`` takes the farthest vertex of each body from the other (a convex
    distance is maximized at a vertex) with point-to-hull distances from the
    min-norm-point algorithm.  ``grid`` maximizes ``|h_P - h_Q|`` over a
    direction grid followed by local refinement; it only bounds the true
    value from below and reports its grid resolution.
    """
    if p.dim != q.dim:
        raise ValidationError("bodies have different dimensions")
    if mode == "exact":
        return HausdorffResult(_hausdorff_polys(_Poly.of(p), _Poly.of(q)), "exact")
    if mode != "grid":
        raise ValidationError(f"unknown Hausdorff mode {mode!r}")
    n = p.dim
    u = _grid_directions(n, grid, seed)
    diff = np.abs(p.support_many(u) - q.support_many(u))
    best = float(diff.max())

    def neg(z):
        z = z / max(np.linalg.norm(z), 1e-300)
        return -float(abs(p.support_many(z)[0] - q.support_many(z)[0]))

    for i in np.argsort(diff)[-5:]:
        res = minimize(neg, u[i], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13})
        best = max(best, -float(res.fun))
    if n == 2:
        resolution = math.pi / grid
    else:
        resolution = (sphere_area(n) / grid) ** (1.0 / (n - 1))
    warnings.warn(f"grid-mode Hausdorff distance: angular resolution ~{resolution:.2e}",
                  RuntimeWarning, stacklevel=2)
    return HausdorffResult(best, "grid", resolution)


def sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


# -- volume -------------------------------------------------------------------

def _ccw_polygon(b: SymmetricBody, rotation=None) -> np.ndarray:
    v = _Poly.of(b, rotation).vertices
    hull = ConvexHull(v)
    return v[hull.vertices]  # counter-clockwise in 2-D


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman intersection of two counter-clockwise convex polygons."""
    out = subject
    for i in range(len(clip)):
        a, b = clip[i], clip[(i + 1) % len(clip)]
        edge = b - a
        if len(out) == 0:
            break
        inp, out = out, []
        side = edge[0] * (inp[:, 1] - a[1]) - edge[1] * (inp[:, 0] - a[0])
        for j in range(len(inp)):
            cur, prev = inp[j], inp[j - 1]
            sc, sp = side[j], side[j - 1]
            if sc >= 0:
                if sp < 0:
                    out.append(prev + (cur - prev) * (sp / (sp - sc)))
                out.append(cur)
            elif sp >= 0:
                out.append(prev + (cur - prev) * (sp / (sp - sc)))
        out = np.array(out)
    return np.asarray(out)


def volume(b: SymmetricBody) -> float:
    if b.dim == 2:
        return polygon_area(_ccw_polygon(b))
    return float(ConvexHull(np.asarray(b.vertices)).volume)


def _intersection_volume(p: _Poly, q: _Poly) -> float:
    f = np.vstack([p.normals, q.normals])
    hs = np.hstack([f, -np.ones((f.shape[0], 1))])
    pts = HalfspaceIntersection(hs, np.zeros(f.shape[1])).intersections
    return float(ConvexHull(pts).volume)


@dataclass(frozen=True)
class VolumeResult:
    value: float
    std_error: float
    method: str
    samples: int = 0


def vol_diff(p: SymmetricBody, q: SymmetricBody, samples: int = 200_000, seed: int = 0,
             method: str = "auto", rotation: np.ndarray | None = None) -> VolumeResult:
    """Volume of the symmetric difference ``P Δ (rotation Q)``.

    ``auto`` clips polygons exactly in the plane and intersects halfspaces
    with qhull in higher dimension; ``mc`` samples a common bounding box.
    """
    if p.dim != q.dim:
        raise ValidationError("bodies have different dimensions")
    n = p.dim
    pp, qq = _Poly.of(p), _Poly.of(q, rotation)
    if method == "auto":
        method = "clip" if n == 2 else "exact"
    if method == "clip":
        if n != 2:
            raise ValidationError("polygon clipping is planar only")
        a = ConvexHull(pp.vertices)
        b = ConvexHull(qq.vertices)
        pa, qa = pp.vertices[a.vertices], qq.vertices[b.vertices]
        inter = clip_convex(pa, qa)
        ia = polygon_area(inter) if len(inter) >= 3 else 0.0
        return VolumeResult(max(polygon_area(pa) + polygon_area(qa) - 2 * ia, 0.0), 0.0, "clip")
    if method == "exact":
        vp = float(ConvexHull(pp.vertices).volume)
        vq = float(ConvexHull(qq.vertices).volume)
        return VolumeResult(max(vp + vq - 2 * _intersection_volume(pp, qq), 0.0), 0.0, "exact")
    if method == "mc":
        half = max(np.abs(pp.vertices).max(), np.abs(qq.vertices).max())
        box = (2 * half) ** n

        def fn(g):
            # Gaussian draws pushed through the normal CDF are uniform on the box
            z = half * (2 * ndtr(g) - 1)
            return box * ((pp.gauge(z) <= 1) != (qq.gauge(z) <= 1)).astype(float)

        est = mc_estimate(fn, n, samples, seed, "vol/box")
        return VolumeResult(est.value, est.std_error, "mc", est.samples)
    raise ValidationError(f"unknown volume method {method!r}")


# -- measures -------------------------------------------------------------------

def geodesic_cost(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Angle between unit vectors, stable near 0 and pi."""
    diff = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2)
    summ = np.linalg.norm(x[:, None, :] + y[None, :, :], axis=2)
    return 2.0 * np.arctan2(diff, summ)


def chordal_cost(x, y):
    return _pairwise(x, y)


@dataclass(frozen=True)
class TransportResult:
    value: float
    plan: np.ndarray
    source: np.ndarray
    target: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["source"] + [f"t{j}" for j in range(self.plan.shape[1])])
            for i, row in enumerate(self.plan):
                w.writerow([f"s{i}"] + [repr(float(v)) for v in row])


def wasserstein_plan(mu: IsotropicMeasure, nu: IsotropicMeasure, cost: str = "geodesic",
                     rotation: np.ndarray | None = None) -> TransportResult:
    if mu.dim != nu.dim:
        raise ValidationError("measures live in different dimensions")
    x, a = mu.expanded()
    y, b = nu.expanded()
    if rotation is not None:
        y = y @ np.asarray(rotation).T
    if abs(a.sum() - b.sum()) > 1e-9:
        raise ValidationError(f"total masses differ: {a.sum()!r} vs {b.sum()!r}")
    b = b * (a.sum() / b.sum())
    c = geodesic_cost(x, y) if cost == "geodesic" else chordal_cost(x, y)
    k1, k2 = c.shape
    a_eq = np.zeros((k1 + k2, k1 * k2))
    for i in range(k1):
        a_eq[i, i * k2:(i + 1) * k2] = 1.0
    for j in range(k2):
        a_eq[k1 + j, j::k2] = 1.0
    res = linprog(c.ravel(), A_eq=a_eq[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise NumericError(f"transport LP failed: {res.message}")
    return TransportResult(float(res.fun), res.x.reshape(k1, k2), x, y)


def wasserstein_sphere(mu: IsotropicMeasure, nu: IsotropicMeasure, cost: str = "geodesic") -> float:
    return wasserstein_plan(mu, nu, cost).value


# -- alignment over O(n) -----------------------------------------------------------

@dataclass(frozen=True)
class AlignmentResult:
    rotation: np.ndarray
    distance: float
    certificate: str
    evaluations: int = 0
    budget_exhausted: bool = False
    unaligned: float = math.nan


def signed_permutations(n: int):
    for perm in itertools.permutations(range(n)):
        for signs in itertools.product((1.0, -1.0), repeat=n):
            m = np.zeros((n, n))
            m[np.arange(n), perm] = signs
            yield m


def procrustes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` minimizing ``sum |x_i - R y_i|^2`` (reflections allowed)."""
    u, _, vt = np.linalg.svd(x.T @ y)
    return u @ vt


def _skew(theta: np.ndarray, n: int) -> np.ndarray:
    s = np.zeros((n, n))
    s[np.triu_indices(n, 1)] = theta
    return s - s.T


def _metric_for(base: str, x, y, cost: str = "geodesic"):
    """Return ``(f(R), X points, Y points)`` for the chosen base metric."""
    if base == "hausdorff_points":
        xa, ya = np.atleast_2d(np.asarray(x, float)), np.atleast_2d(np.asarray(y, float))
        return (lambda r: hausdorff_points(xa, ya @ r.T)), xa, ya
    if base == "hausdorff_bodies":
        px = _Poly.of(x)
        qv = np.asarray(y.vertices)
        qf = np.asarray(y.facet_normals)
        return (lambda r: _hausdorff_polys(px, _Poly(qv @ r.T, qf @ r.T))), px.vertices, qv
    if base == "vol_diff":
        return (lambda r: vol_diff(x, y, rotation=r).value), np.asarray(x.vertices), np.asarray(y.vertices)
    if base == "wasserstein":
        return (lambda r: wasserstein_plan(x, y, cost, rotation=r).value), x.support(), y.support()
    raise ValidationError(f"unknown base metric {base!r}")


def _frame(cols: np.ndarray) -> np.ndarray:
    """Orthonormal basis whose leading columns span the given columns in order."""
    n, k = cols.shape
    q, r = np.linalg.qr(np.column_stack([cols, np.eye(n)]))
    return q[:, :n] * np.where(np.diag(r)[:n] < 0, -1.0, 1.0)


def _spread_tuple(xp: np.ndarray, size: int) -> list[int]:
    """Greedy pick of ``size`` points, each farthest from the span of the previous ones."""
    chosen: list[int] = []
    resid = xp.copy()
    for _ in range(size):
        norms = np.linalg.norm(resid, axis=1)
        i = int(np.argmax(norms))
        if norms[i] <= 1e-9:
            break
        chosen.append(i)
        e = resid[i] / norms[i]
        resid = resid - np.outer(resid @ e, e)
    return chosen


def _tuple_frame_candidates(xp: np.ndarray, yp: np.ndarray, limit: int) -> list[np.ndarray]:
    """Rotations taking a tuple of Y points onto a spread tuple of ``n-1`` X points.

    Y tuples come from a beam search ranked by Gram-matrix mismatch with the X
    tuple; once ``n-1`` independent points are matched the map is fixed up to
    a mirror in the last coordinate, and both choices are returned.
    """
    n = xp.shape[1]
    xs = _spread_tuple(xp, n - 1)
    if n < 2 or len(xs) < n - 1:
        return []
    gx = xp[xs] @ xp[xs].T
    gy = yp @ yp.T
    ny = np.sqrt(np.diag(gy))
    # unit-norm supports tie on the first point, so the beam keeps every start
    width = max(limit // 2, len(yp))
    beam = [((), 0.0)]
    for step in range(n - 1):
        grown = []
        for tup, cost in beam:
            c = cost + np.abs(ny - math.sqrt(gx[step, step]))
            for prev, jy in enumerate(tup):
                c = c + np.abs(gy[:, jy] - gx[step, prev])
            for jy in np.argsort(c, kind="stable")[:width]:
                if int(jy) not in tup:
                    grown.append((tup + (int(jy),), float(c[jy])))
        grown.sort(key=lambda t: (t[1], t[0]))
        beam = grown[:width]
    fx = _frame(xp[xs].T)
    flip = np.ones(n)
    flip[-1] = -1.0
    out = []
    for tup, _ in beam:
        ycols = yp[list(tup)].T
        if np.linalg.matrix_rank(ycols, tol=1e-9) < n - 1:
            continue
        fy = _frame(ycols)
        out += [fx @ fy.T, (fx * flip) @ fy.T]
    return out[:limit]


EXACT_TOL = 1e-12  # stop searching once the distance is at rounding level


def align_over_On(base: str, x, y, budget: int = 400, seed: int = 0, cost: str = "geodesic",
                  extra_starts: list[np.ndarray] | None = None) -> AlignmentResult:
    """Upper bound on ``min_R base(X, R Y)`` over orthogonal ``R``.

    Candidates come from signed coordinate permutations, Procrustes/ICP
    alignments of nearest-neighbour matchings, and a final Nelder-Mead
    refinement in exponential coordinates around the best rotation.
    """
    f, xp, yp = _metric_for(base, x, y, cost)
    n = xp.shape[1]
    evals = 0
    best_r, best_d, best_tag = np.eye(n), math.inf, "signed_perm"

    def score(r, tag):
        nonlocal evals, best_r, best_d, best_tag
        evals += 1
        d = f(r)
        if d < best_d - 1e-15:
            best_r, best_d, best_tag = r, d, tag
        return d

    unaligned = score(np.eye(n), "signed_perm")
    perm_budget = max(budget // 4, 1)
    total_perms = math.factorial(n) * 2 ** n
    perms = list(signed_permutations(n)) if total_perms <= perm_budget else None
    if perms is None:
        rng = block_generator(seed, "align/perms", 0)
        all_p = list(itertools.permutations(range(n)))
        perms = []
        for _ in range(perm_budget):
            m = np.zeros((n, n))
            m[np.arange(n), all_p[rng.integers(len(all_p))]] = rng.choice([1.0, -1.0], n)
            perms.append(m)
    scored = []
    for m in perms:
        if evals >= perm_budget or best_d <= EXACT_TOL:
            break
        scored.append((score(m, "signed_perm"), evals, m))
    for m in _tuple_frame_candidates(xp, yp, max(budget // 8, 2)):
        if best_d <= EXACT_TOL:
            break
        scored.append((score(m, "tuple_frame"), evals, m))
    scored.sort(key=lambda t: (t[0], t[1]))
    starts = [m for _, _, m in scored[:3]] + list(extra_starts or [])
    rng = block_generator(seed, "align/starts", 0)
    for _ in range(2):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        starts.append(q)
    icp_budget = budget // 2
    for r0 in starts:
        r = r0
        for _ in range(15):
            if evals >= perm_budget + icp_budget or best_d <= EXACT_TOL:
                break
            yr = yp @ r.T
            d = _pairwise(xp, yr)
            pairs_x = np.vstack([xp, xp[d.argmin(axis=0)]])
            pairs_y = np.vstack([yp[d.argmin(axis=1)], yp])
            r_new = procrustes(pairs_x, pairs_y)
            score(r_new, "procrustes")
            if np.allclose(r_new, r, atol=1e-13):
                break
            r = r_new
    remaining = budget - evals
    if remaining > 0 and n > 1 and best_d > EXACT_TOL:
        r0 = best_r
        k = n * (n - 1) // 2

        def obj(theta):
            if evals >= budget:
                return best_d
            return score(r0 @ expm(_skew(theta, n)), "local_refined")

        simplex = np.vstack([np.zeros(k), 0.05 * np.eye(k)])
        minimize(obj, np.zeros(k), method="Nelder-Mead",
                 options={"maxfev": remaining, "initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-14})
    rot = best_r
    # re-orthogonalize against drift
    u, _, vt = np.linalg.svd(rot)
    rot = u @ vt
    dist = f(rot)
    return AlignmentResult(rot, float(dist), best_tag, evals, evals >= budget, float(unaligned))


# -- comparison lemmas ------------------------------------------------------------

def kappa(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass
class Check:
    name: str
    ok: bool | None
    lhs: float | None = None
    rhs: float | None = None
    note: str = ""

    @property
    def margin(self) -> float | None:
        if self.lhs is None or self.rhs is None:
            return None
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "note": self.note}


def groemer_check(k: SymmetricBody, l: SymmetricBody) -> list[Check]:
    """Hausdorff distance bounded by the volume difference (symmetric Groemer bound)."""
    n = k.dim
    r = min(k.inradius, l.inradius)
    big_r = max(k.circumradius, l.circumradius)
    dh = hausdorff_bodies(k, l).value
    dv = vol_diff(k, l).value
    rhs = (n / kappa(n - 1)) ** (1 / n) * (big_r / r) ** ((n - 1) / n) * dv ** (1 / n)
    out = [Check("groemer", dh <= rhs + 1e-9, dh, rhs)]
    if r >= 1 - 1e-12 and big_r <= math.sqrt(n) + 1e-12:
        rhs2 = n * n ** (1 / (2 * n)) * dv ** (1 / n)
        out.append(Check("groemer_specialized", dh <= rhs2 + 1e-9, dh, rhs2))
    else:
        out.append(Check("groemer_specialized", None, note="needs B_2 ⊆ K, L ⊆ sqrt(n) B_2"))
    return out


def dilation_check(k: SymmetricBody, c: SymmetricBody) -> list[Check]:
    n = k.dim
    lo, hi = 1 / math.sqrt(n), math.sqrt(n)
    if min(k.inradius, c.inradius) < lo - 1e-12 or max(k.circumradius, c.circumradius) > hi + 1e-12:
        return [Check("dilation_sandwich", None, note="needs n^{-1/2} B_2 ⊆ K, C ⊆ sqrt(n) B_2"),
                Check("dilation_converse", None, note="hypothesis unmet")]
    dh = hausdorff_bodies(k, c).value
    s = 1 + math.sqrt(n) * dh
    k_in_c = float(c.gauge_many(np.asarray(k.vertices)).max())
    c_in_k = float(k.gauge_many(np.asarray(c.vertices)).max())
    sandwich = max(k_in_c, c_in_k)
    t = max(sandwich - 1.0, 0.0)
    return [Check("dilation_sandwich", sandwich <= s + 1e-9, sandwich, s),
            Check("dilation_converse", dh <= math.sqrt(n) * t + 1e-9, dh, math.sqrt(n) * t)]


def hw_check(mu: IsotropicMeasure, nu: IsotropicMeasure) -> Check:
    n = mu.dim
    dw = wasserstein_sphere(mu, nu)
    dh = hausdorff_points(mu.support(), nu.support())
    rhs = 7 * math.pi * n ** 3 * dh
    return Check("wasserstein_hausdorff", dw <= rhs + 1e-8, dw, rhs)


def bound_suite(k: SymmetricBody | None = None, l: SymmetricBody | None = None,
                mu: IsotropicMeasure | None = None, nu: IsotropicMeasure | None = None) -> dict:
    checks: list[Check] = []
    if k is not None and l is not None:
        checks += groemer_check(k, l)
        checks += dilation_check(k, l)
    if mu is not None and nu is not None:
        checks.append(hw_check(mu, nu))
    return {
        "checks": [c.to_dict() for c in checks],
        "ok": all(c.ok is not False for c in checks),
    }
